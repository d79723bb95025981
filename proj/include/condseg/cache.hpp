#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "condseg/acdc.hpp"
#include "condseg/preprocess.hpp"
#include "condseg/types.hpp"

namespace condseg {

struct ManifestRecord {
    std::string subject;
    Phase phase = Phase::ED;
    int slice_index = 0;
    ConditioningVector z;
    std::string file;  // relative to the cache directory
};

struct PrepareOptions {
    PreprocessParams preprocess;
    LabelMap labels;
};

struct PrepareResult {
    bool skipped = false;  // cache was already up to date
    int volumes = 0;
    int slices = 0;
    std::vector<std::string> subject_errors;  // "subject: message"
};

// Preprocesses every subject under an ACDC-layout root into one file per
// slice plus a manifest. Re-runs detect an up-to-date cache by a content
// fingerprint of the inputs and the preprocessing options and skip all work.
// Unreadable subjects are reported and skipped; an empty result is an error.
PrepareResult prepare_data(const std::string& dataset_root, const std::string& cache_dir,
                           const PrepareOptions& opts, std::ostream* log = nullptr);

std::vector<ManifestRecord> read_manifest(const std::string& cache_dir);

SliceSample load_slice(const std::string& cache_dir, const ManifestRecord& rec);

// All slices of one (subject, phase), ordered by slice index.
std::vector<SliceSample> load_volume_slices(const std::string& cache_dir,
                                            const std::vector<ManifestRecord>& manifest,
                                            const std::string& subject, Phase phase);

std::vector<std::string> manifest_subjects(const std::vector<ManifestRecord>& manifest);

// Content fingerprint of a dataset root combined with the options.
uint64_t dataset_fingerprint(const std::string& dataset_root, const PrepareOptions& opts);

}  // namespace condseg
