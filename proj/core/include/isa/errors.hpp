#pragma once

#include <stdexcept>
#include <string>

namespace isa {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or size mismatch between array operands.
struct DimensionError : Error {
    using Error::Error;
};

// Input that is formally valid but mathematically unusable (zero row, empty set).
struct DegenerateInputError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Unparseable record, modifier, or file payload.
struct FormatError : Error {
    using Error::Error;
};

struct VocabError : Error {
    using Error::Error;
};

struct LookupError : Error {
    using Error::Error;
};

struct GenerationError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace isa
