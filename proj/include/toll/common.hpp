#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace toll {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct shape_error : error {
    using error::error;
};
struct numeric_error : error {
    using error::error;
};
struct parse_error : error {
    using error::error;
};
struct config_error : error {
    using error::error;
};

// Canonical float encoding for every text format we emit: 17 significant
// digits round-trips any IEEE double.
inline std::string fmt_f64(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace toll
