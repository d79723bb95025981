#pragma once

#include <stdexcept>
#include <string>

namespace condseg {

// Error taxonomy. Callers are expected to catch by type: configuration
// problems, malformed runtime inputs, tensor shape mismatches, file IO, and
// the two dataset-specific failure modes of the loader.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Ground-truth file absent for a frame that has an image.
struct AnnotationMissingError : IoError {
    using IoError::IoError;
};

// Label volume contains values outside the expected label set.
struct CorruptLabelsError : IoError {
    using IoError::IoError;
};

// Training produced a non-finite loss; carries the path of the state dump.
struct TrainingDivergedError : std::runtime_error {
    explicit TrainingDivergedError(const std::string& msg, std::string dump = "")
        : std::runtime_error(msg), dump_info(std::move(dump)) {}
    std::string dump_info;
};

}  // namespace condseg
