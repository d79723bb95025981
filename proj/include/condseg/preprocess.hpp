#pragma once

#include <vector>

#include "condseg/types.hpp"

namespace condseg {

struct PreprocessParams {
    double target_spacing = 1.37;  // mm per pixel, in-plane
    int out_height = 224;
    int out_width = 224;
    double clip_sigma = 3.0;
    bool per_volume_z = false;  // conditioning vector from the whole volume instead of per slice
};

// In-plane resampling to a common resolution; slice spacing is untouched
// (the networks are 2D). Images bilinear, labels nearest-neighbor.
VolumeSample resample_volume(const VolumeSample& v, double target_spacing = 1.37);

// Per-volume z-score with clipping at +/- clip_sigma standard deviations;
// sigma guarded by epsilon = 1e-8 so constant volumes map to zero.
VolumeSample standardize_intensity(const VolumeSample& v, double clip_sigma = 3.0);

Grid2D resize_image_slice(const Grid2D& in, int out_h = 224, int out_w = 224);
Mask2D resize_label_slice(const Mask2D& in, int out_h = 224, int out_w = 224);

// Resize every axial slice of the volume.
VolumeSample resize_volume_slices(const VolumeSample& v, int out_h = 224, int out_w = 224);

// resample -> standardize -> resize.
VolumeSample preprocess_volume(const VolumeSample& v, const PreprocessParams& params = {});

// One SliceSample per axial slice of a preprocessed volume, with the
// conditioning vector recomputed from each slice's own mask (or from the
// whole volume when per_volume_z is set).
std::vector<SliceSample> extract_slices(const VolumeSample& v, bool per_volume_z = false);

}  // namespace condseg
