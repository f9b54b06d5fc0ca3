#pragma once

#include <stdexcept>
#include <string>

namespace fusion {

// Error taxonomy shared across the library. The C API and CLI map these onto
// stable exit codes: usage/contract -> 2, io/data -> 3, numeric abort -> 4.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fusion
