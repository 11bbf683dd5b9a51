#pragma once

#include <iostream>
#include <stdexcept>
#include <string>

namespace rppg {

// Malformed or missing input data (manifests, frames, model files).
// The CLI maps this to exit code 2.
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure (non-finite loss, invalid configuration for the math).
// The CLI maps this to exit code 3.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void warn(const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
}

}  // namespace rppg
