#pragma once

#include <string>
#include <vector>

namespace condseg {

// Minimal NIfTI-1 volume IO, enough for ACDC-style single-frame volumes.
// Data is stored x-fastest (as on disk); supports .nii and .nii.gz, the
// common scalar datatypes, scl_slope/scl_inter scaling, and byte-swapped
// files. Writing emits little-endian float32 or uint8 with a n+1 magic.
struct NiftiVolume {
    int nx = 0, ny = 0, nz = 0;
    double dx = 1.0, dy = 1.0, dz = 1.0;  // pixdim, mm
    std::vector<float> data;              // nx*ny*nz, x fastest

    float at(int x, int y, int z) const {
        return data[(static_cast<size_t>(z) * ny + y) * nx + x];
    }
};

NiftiVolume read_nifti(const std::string& path);

void write_nifti(const std::string& path, const NiftiVolume& v, bool as_uint8 = false);

}  // namespace condseg
