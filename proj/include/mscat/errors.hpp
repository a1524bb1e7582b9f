#pragma once

#include <stdexcept>
#include <string>

namespace mscat {

/// Malformed or inconsistent input data (files, geometries, configs).
class input_error : public std::runtime_error {
public:
    explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical procedure failed to produce a usable result.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace mscat
