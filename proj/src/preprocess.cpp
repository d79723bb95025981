#include "condseg/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "condseg/conditioning.hpp"
#include "condseg/error.hpp"

namespace condseg {

namespace {

// Half-pixel-center coordinate mapping: output index i at scale r maps to
// input coordinate (i + 0.5) * r - 0.5, which is the identity when r == 1.
inline double src_coord(int i, double ratio) { return (i + 0.5) * ratio - 0.5; }

inline float bilinear_at(const float* img, int h, int w, double u, double v) {
    // u: row coordinate, v: column coordinate; edges clamped
    const double uc = std::clamp(u, 0.0, static_cast<double>(h - 1));
    const double vc = std::clamp(v, 0.0, static_cast<double>(w - 1));
    const int y0 = static_cast<int>(std::floor(uc));
    const int x0 = static_cast<int>(std::floor(vc));
    const int y1 = std::min(y0 + 1, h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const double fy = uc - y0;
    const double fx = vc - x0;
    const double a = img[static_cast<size_t>(y0) * w + x0];
    const double b = img[static_cast<size_t>(y0) * w + x1];
    const double c = img[static_cast<size_t>(y1) * w + x0];
    const double d = img[static_cast<size_t>(y1) * w + x1];
    return static_cast<float>((1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d));
}

inline uint8_t nearest_at(const uint8_t* m, int h, int w, double u, double v) {
    int y = static_cast<int>(std::lround(std::clamp(u, 0.0, static_cast<double>(h - 1))));
    int x = static_cast<int>(std::lround(std::clamp(v, 0.0, static_cast<double>(w - 1))));
    y = std::min(y, h - 1);
    x = std::min(x, w - 1);
    return m[static_cast<size_t>(y) * w + x];
}

}  // namespace

VolumeSample resample_volume(const VolumeSample& v, double target_spacing) {
    if (!(target_spacing > 0.0)) throw InputError("resample_volume: target spacing must be > 0");
    if (!(v.spacing_x > 0.0 && v.spacing_y > 0.0))
        throw InputError("resample_volume: volume spacing must be > 0");

    const int oh = static_cast<int>(std::lround(v.image.h * v.spacing_y / target_spacing));
    const int ow = static_cast<int>(std::lround(v.image.w * v.spacing_x / target_spacing));
    if (oh < 1 || ow < 1) throw InputError("resample_volume: degenerate output dims");

    const double ry = static_cast<double>(v.image.h) / oh;
    const double rx = static_cast<double>(v.image.w) / ow;

    VolumeSample out;
    out.subject_id = v.subject_id;
    out.phase = v.phase;
    out.spacing_x = target_spacing;
    out.spacing_y = target_spacing;
    out.slice_spacing = v.slice_spacing;
    out.image = Volume3D(v.image.ns, oh, ow);
    out.labels = MaskVolume3D(v.image.ns, oh, ow);

    for (int s = 0; s < v.image.ns; ++s) {
        const float* img = v.image.v.data() + static_cast<size_t>(s) * v.image.h * v.image.w;
        const uint8_t* lab = v.labels.v.data() + static_cast<size_t>(s) * v.image.h * v.image.w;
        for (int y = 0; y < oh; ++y) {
            const double u = src_coord(y, ry);
            for (int x = 0; x < ow; ++x) {
                const double vv = src_coord(x, rx);
                out.image.at(s, y, x) = bilinear_at(img, v.image.h, v.image.w, u, vv);
                out.labels.at(s, y, x) = nearest_at(lab, v.image.h, v.image.w, u, vv);
            }
        }
    }
    return out;
}

VolumeSample standardize_intensity(const VolumeSample& v, double clip_sigma) {
    if (v.image.v.empty()) throw InputError("standardize_intensity: empty volume");
    double mean = 0.0;
    for (float x : v.image.v) mean += x;
    mean /= static_cast<double>(v.image.v.size());
    double var = 0.0;
    for (float x : v.image.v) {
        const double d = x - mean;
        var += d * d;
    }
    var /= static_cast<double>(v.image.v.size());  // population variance
    const double sigma = std::max(std::sqrt(var), 1e-8);

    VolumeSample out = v;
    for (float& x : out.image.v) {
        const double z = (x - mean) / sigma;
        x = static_cast<float>(std::clamp(z, -clip_sigma, clip_sigma));
    }
    return out;
}

Grid2D resize_image_slice(const Grid2D& in, int out_h, int out_w) {
    if (in.v.empty()) throw InputError("resize_image_slice: empty input");
    Grid2D out(out_h, out_w);
    const double ry = static_cast<double>(in.h) / out_h;
    const double rx = static_cast<double>(in.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double u = src_coord(y, ry);
        for (int x = 0; x < out_w; ++x)
            out.at(y, x) = bilinear_at(in.v.data(), in.h, in.w, u, src_coord(x, rx));
    }
    return out;
}

Mask2D resize_label_slice(const Mask2D& in, int out_h, int out_w) {
    if (in.v.empty()) throw InputError("resize_label_slice: empty input");
    Mask2D out(out_h, out_w);
    const double ry = static_cast<double>(in.h) / out_h;
    const double rx = static_cast<double>(in.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double u = src_coord(y, ry);
        for (int x = 0; x < out_w; ++x)
            out.at(y, x) = nearest_at(in.v.data(), in.h, in.w, u, src_coord(x, rx));
    }
    return out;
}

VolumeSample resize_volume_slices(const VolumeSample& v, int out_h, int out_w) {
    VolumeSample out;
    out.subject_id = v.subject_id;
    out.phase = v.phase;
    out.spacing_x = v.spacing_x;
    out.spacing_y = v.spacing_y;
    out.slice_spacing = v.slice_spacing;
    out.image = Volume3D(v.image.ns, out_h, out_w);
    out.labels = MaskVolume3D(v.image.ns, out_h, out_w);
    for (int s = 0; s < v.image.ns; ++s) {
        Grid2D gi(v.image.h, v.image.w);
        Mask2D gm(v.image.h, v.image.w);
        std::copy_n(v.image.v.begin() + static_cast<long>(s) * v.image.h * v.image.w,
                    static_cast<long>(v.image.h) * v.image.w, gi.v.begin());
        std::copy_n(v.labels.v.begin() + static_cast<long>(s) * v.image.h * v.image.w,
                    static_cast<long>(v.image.h) * v.image.w, gm.v.begin());
        const Grid2D ri = resize_image_slice(gi, out_h, out_w);
        const Mask2D rm = resize_label_slice(gm, out_h, out_w);
        std::copy(ri.v.begin(), ri.v.end(),
                  out.image.v.begin() + static_cast<long>(s) * out_h * out_w);
        std::copy(rm.v.begin(), rm.v.end(),
                  out.labels.v.begin() + static_cast<long>(s) * out_h * out_w);
    }
    return out;
}

VolumeSample preprocess_volume(const VolumeSample& v, const PreprocessParams& params) {
    VolumeSample out = resample_volume(v, params.target_spacing);
    out = standardize_intensity(out, params.clip_sigma);
    out = resize_volume_slices(out, params.out_height, params.out_width);
    return out;
}

std::vector<SliceSample> extract_slices(const VolumeSample& v, bool per_volume_z) {
    std::vector<SliceSample> out;
    out.reserve(static_cast<size_t>(v.image.ns));
    ConditioningVector volume_z;
    if (per_volume_z) volume_z = compute_label_distribution(v.labels);
    for (int s = 0; s < v.image.ns; ++s) {
        SliceSample ss;
        ss.subject_id = v.subject_id;
        ss.phase = v.phase;
        ss.slice_index = s;
        ss.image = Grid2D(v.image.h, v.image.w);
        ss.labels = Mask2D(v.image.h, v.image.w);
        const long n = static_cast<long>(v.image.h) * v.image.w;
        std::copy_n(v.image.v.begin() + static_cast<long>(s) * n, n, ss.image.v.begin());
        std::copy_n(v.labels.v.begin() + static_cast<long>(s) * n, n, ss.labels.v.begin());
        ss.z = per_volume_z ? volume_z : compute_label_distribution(ss.labels);
        out.push_back(std::move(ss));
    }
    return out;
}

}  // namespace condseg
