#pragma once

#include <stdexcept>
#include <string>

namespace ddqa {

/// Base of every error raised by the library. Subclasses name the failure
/// category so callers (the CLI in particular) can map them to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input bytes (JSON that does not parse, truncated files).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed JSON that does not match the expected document shape.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Documents that parse but violate a cross-field invariant.
class IntegrityError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Image bytes that cannot be decoded, or decode to an unsupported layout.
class DecodeError : public Error {
public:
    using Error::Error;
};

class EmptyMaskError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Incompatible or invalid configuration (accumulator modes, bin ranges, weights).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Metric finalization with no positive or no negative observations.
class DegenerateError : public Error {
public:
    using Error::Error;
};

class VocabularyError : public Error {
public:
    using Error::Error;
};

class ScoringError : public Error {
public:
    using Error::Error;
};

}  // namespace ddqa
