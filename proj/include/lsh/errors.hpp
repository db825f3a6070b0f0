#pragma once

#include <stdexcept>
#include <string>

namespace lsh {

// Error categories mirror the failure modes of the public operations.
// The CLI maps them onto exit codes; library code throws and never aborts.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct InvalidArgumentError : Error {
    using Error::Error;
};

struct InsufficientDataError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct InvalidDataError : Error {
    using Error::Error;
};

struct CapacityError : Error {
    using Error::Error;
};

struct UndefinedDistanceError : Error {
    using Error::Error;
};

// Training loss went non-finite; carries the offending batch index.
struct DivergedError : Error {
    long batch_index;
    DivergedError(const std::string& msg, long batch)
        : Error(msg), batch_index(batch) {}
};

// A ranking was requested while a live candidate lacks a measurement.
struct IncompleteStateError : Error {
    std::string candidate_id;
    IncompleteStateError(const std::string& msg, std::string candidate)
        : Error(msg), candidate_id(std::move(candidate)) {}
};

struct ConfigError : Error {
    using Error::Error;
};

struct IncompleteArtifactError : Error {
    using Error::Error;
};

}  // namespace lsh
