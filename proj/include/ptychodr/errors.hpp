#pragma once

#include <stdexcept>
#include <string>

namespace ptychodr {

// Error hierarchy. Every failure the library raises derives from Error so
// callers can catch one type; the subtypes map onto distinct CLI exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/size disagreement between operands.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Invalid parameter or inconsistent configuration (exit code 2).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf in an iterate, divergence guard tripped, or a violated runtime
// bound (exit code 3).
class NumericalFailure : public Error {
public:
    explicit NumericalFailure(const std::string& msg) : Error(msg) {}
};

// Zero Gram entry on a pixel the reconstruction needs.
class SingularGramError : public NumericalFailure {
public:
    explicit SingularGramError(const std::string& msg) : NumericalFailure(msg) {}
};

// File / serialization problems (exit code 4).
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Requested dense computation exceeds the configured size cap.
class CapacityError : public Error {
public:
    explicit CapacityError(const std::string& msg) : Error(msg) {}
};

// Metric undefined for the given input (e.g. zero reference).
class UndefinedMetricError : public Error {
public:
    explicit UndefinedMetricError(const std::string& msg) : Error(msg) {}
};

}  // namespace ptychodr
