#pragma once

#include <stdexcept>
#include <string>

namespace steadapt {

// Base for all library errors. Subclasses map 1:1 onto the failure kinds the
// public operations document, so callers can catch a specific condition.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidShape : Error {
    using Error::Error;
};
struct InvalidConfig : Error {
    using Error::Error;
};
struct InvalidInput : Error {
    using Error::Error;
};
struct ShapeConflict : Error {
    using Error::Error;
};
struct MissingWeights : Error {
    using Error::Error;
};
struct EmptyDataset : Error {
    using Error::Error;
};
struct DecodeError : Error {
    using Error::Error;
};
struct PatchTooLarge : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

struct DivergenceError : Error {
    long iteration;
    DivergenceError(const std::string& msg, long iter)
        : Error(msg + " (iteration " + std::to_string(iter) + ")"), iteration(iter) {}
};

}  // namespace steadapt
