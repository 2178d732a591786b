#pragma once

#include <stdexcept>
#include <string>

namespace misspec {

/// Malformed covariance or problem description.
class InvalidSpec : public std::invalid_argument {
public:
    explicit InvalidSpec(const std::string& what) : std::invalid_argument(what) {}
};

/// Arguments that are well-formed but inconsistent (shapes, ranges).
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// A closed form was requested outside the hypotheses it holds under.
class Unsupported : public std::domain_error {
public:
    explicit Unsupported(const std::string& what) : std::domain_error(what) {}
};

/// A file could not be read or written.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Input data that was read but cannot be used (bad table, missing column).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace misspec
