#pragma once

#include <stdexcept>
#include <string>

namespace charlab {

// Bad configuration (unknown keys, invalid objective cells, ...) -> exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input data (malformed UTF-8, CoNLL-U, task files, ...) -> exit code 3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure during training (NaN loss halt) -> exit code 4.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace charlab
