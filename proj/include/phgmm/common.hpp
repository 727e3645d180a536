#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace phgmm {

// Error taxonomy, mapped to CLI exit codes in tools/phgmm_main.cpp:
//   config_error -> 2, refusal_error -> 3, numeric_error -> 4.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct shape_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct refusal_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr int kIgnoreIndex = 255;

}  // namespace phgmm
