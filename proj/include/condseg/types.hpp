#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "condseg/error.hpp"

namespace condseg {

enum class Phase { ED, ES };

inline const char* phase_name(Phase p) { return p == Phase::ED ? "ED" : "ES"; }

inline Phase phase_from_string(const std::string& s) {
    if (s == "ED") return Phase::ED;
    if (s == "ES") return Phase::ES;
    throw InputError("unknown phase: " + s);
}

// Scaled per-class pixel percentages (RV cavity, myocardium, LV cavity),
// each in [0, 100]. Background contributes to the denominator only.
struct ConditioningVector {
    double rv = 0.0;
    double myo = 0.0;
    double lv = 0.0;

    double operator[](int i) const { return i == 0 ? rv : (i == 1 ? myo : lv); }
    double& operator[](int i) { return i == 0 ? rv : (i == 1 ? myo : lv); }
    double sum() const { return rv + myo + lv; }

    bool operator==(const ConditioningVector& o) const {
        return rv == o.rv && myo == o.myo && lv == o.lv;
    }
};

struct Grid2D {
    int h = 0, w = 0;
    std::vector<float> v;

    Grid2D() = default;
    Grid2D(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0.0f) {}
    float& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    float at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
};

struct Mask2D {
    int h = 0, w = 0;
    std::vector<uint8_t> v;

    Mask2D() = default;
    Mask2D(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0) {}
    uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
};

struct Volume3D {
    int ns = 0, h = 0, w = 0;  // slices, rows, cols
    std::vector<float> v;

    Volume3D() = default;
    Volume3D(int ns_, int h_, int w_)
        : ns(ns_), h(h_), w(w_), v(static_cast<size_t>(ns_) * h_ * w_, 0.0f) {}
    float& at(int s, int y, int x) { return v[(static_cast<size_t>(s) * h + y) * w + x]; }
    float at(int s, int y, int x) const { return v[(static_cast<size_t>(s) * h + y) * w + x]; }
};

struct MaskVolume3D {
    int ns = 0, h = 0, w = 0;
    std::vector<uint8_t> v;

    MaskVolume3D() = default;
    MaskVolume3D(int ns_, int h_, int w_)
        : ns(ns_), h(h_), w(w_), v(static_cast<size_t>(ns_) * h_ * w_, 0) {}
    uint8_t& at(int s, int y, int x) { return v[(static_cast<size_t>(s) * h + y) * w + x]; }
    uint8_t at(int s, int y, int x) const { return v[(static_cast<size_t>(s) * h + y) * w + x]; }
};

constexpr int kNumLabels = 4;  // background + RV cavity + myocardium + LV cavity

// One subject/phase 3D image with its ground-truth label volume and voxel
// spacing metadata. Dimensions are arbitrary before preprocessing.
struct VolumeSample {
    std::string subject_id;
    Phase phase = Phase::ED;
    Volume3D image;
    MaskVolume3D labels;
    double spacing_x = 1.0;  // mm per pixel, in-plane
    double spacing_y = 1.0;
    double slice_spacing = 1.0;  // mm between slices

    void validate() const {
        if (image.ns != labels.ns || image.h != labels.h || image.w != labels.w)
            throw ShapeError("VolumeSample: image and label dimensions differ");
        if (!(spacing_x > 0.0 && spacing_y > 0.0 && slice_spacing > 0.0))
            throw InputError("VolumeSample: spacings must be positive");
        for (uint8_t l : labels.v)
            if (l >= kNumLabels)
                throw CorruptLabelsError("VolumeSample: label value " + std::to_string(int(l)) +
                                         " outside {0,1,2,3}");
    }
};

// Preprocessed 2D training sample: standardized 224x224 image, label mask,
// conditioning vector and provenance ids.
struct SliceSample {
    std::string subject_id;
    Phase phase = Phase::ED;
    int slice_index = 0;
    Grid2D image;
    Mask2D labels;
    ConditioningVector z;
};

// Subject-level split for one cross-validation repeat, plus the
// training-fraction subset actually used for optimization.
struct SplitPlan {
    int repeat_index = 0;
    uint64_t seed = 0;  // per-repeat derived seed, used for nested subsampling
    std::vector<std::string> train_subjects;
    std::vector<std::string> val_subjects;
    std::vector<std::string> test_subjects;
    double fraction = 1.0;
    std::vector<std::string> effective_train_subjects;
};

}  // namespace condseg
