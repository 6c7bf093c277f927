#pragma once

#include <stdexcept>
#include <string>

namespace microloc {

// the discrete box cannot host the experiment (boundary mass, Nyquist, window reach)
struct BoxViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN or unbounded growth during time stepping / iteration
struct BlowUp : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace microloc
