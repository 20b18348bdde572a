#pragma once

#include <stdexcept>
#include <string>

namespace flowml {

// base for everything thrown by this library
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// row with the wrong number of cells
struct ArityError : Error {
    explicit ArityError(const std::string& msg) : Error(msg) {}
};

// unparseable numeric cell
struct TypeError : Error {
    explicit TypeError(const std::string& msg) : Error(msg) {}
};

// label and attack category disagree
struct LabelConflict : Error {
    explicit LabelConflict(const std::string& msg) : Error(msg) {}
};

struct ArgumentError : Error {
    explicit ArgumentError(const std::string& msg) : Error(msg) {}
};

struct EmptyInput : Error {
    explicit EmptyInput(const std::string& msg) : Error(msg) {}
};

struct SchemaMismatch : Error {
    explicit SchemaMismatch(const std::string& msg) : Error(msg) {}
};

// bad layer stack description
struct SpecError : Error {
    explicit SpecError(const std::string& msg) : Error(msg) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// batch-norm statistics are undefined for a single-row training batch
struct TrainModeError : Error {
    explicit TrainModeError(const std::string& msg) : Error(msg) {}
};

struct LengthMismatch : Error {
    explicit LengthMismatch(const std::string& msg) : Error(msg) {}
};

struct SingleClassError : Error {
    explicit SingleClassError(const std::string& msg) : Error(msg) {}
};

// unreadable or inconsistent serialized artifact
struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

} // namespace flowml
