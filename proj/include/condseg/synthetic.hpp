#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "condseg/types.hpp"

namespace condseg {

// Desk-scale synthetic dataset: randomized concentric-disc phantoms with an
// adjacent blob. Inner disc = LV cavity (3), surrounding ring = myocardium
// (2), adjacent blob = RV cavity (1). Intensities are blurred and noisy so
// structure extents are ambiguous from the image alone; the label maps and
// conditioning vectors are exact by construction.
struct SyntheticConfig {
    int n_subjects = 6;
    int slices_per_volume = 5;
    int height = 224;
    int width = 224;
    double spacing = 1.37;        // mm per pixel, already at the target resolution
    double slice_spacing = 10.0;  // mm
    double blur_sigma = 3.0;      // px, boundary blur
    double noise_sigma = 0.30;    // additive Gaussian, fraction of the intensity range
    uint64_t seed = 0;
};

VolumeSample generate_synthetic_volume(const SyntheticConfig& cfg, int subject_index, Phase phase);

// All subjects x {ED, ES}, ED first within each subject.
std::vector<VolumeSample> generate_synthetic_dataset(const SyntheticConfig& cfg);

std::string synthetic_subject_id(int subject_index);  // "patient001", ...

// Persist in the ACDC directory layout (Info.cfg + NIfTI frames) so the rest
// of the pipeline is format-agnostic.
void write_synthetic_dataset(const std::string& root, const SyntheticConfig& cfg);

}  // namespace condseg
