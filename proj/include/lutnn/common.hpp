#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lutnn {

// Error type thrown by every module on contract violations. Messages name
// the offending file/layer/index so callers can act on them.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void format_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void format_into(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    format_into(os, rest...);
}
} // namespace detail

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
    std::ostringstream os;
    detail::format_into(os, args...);
    throw Error(os.str());
}

template <typename... Args>
void require(bool cond, const Args&... args) {
    if (!cond) fail(args...);
}

// Rounding convention used across the whole codebase: nearest integer,
// ties away from zero.
inline int64_t round_half_away(double x) { return std::llround(x); }

// Smallest b with 2^b >= n; bit width needed to index n values.
inline int ceil_log2(uint64_t n) {
    int b = 0;
    while ((uint64_t{1} << b) < n) ++b;
    return b;
}

// Nearest-level index in a sorted level list, ties away from zero.
// cuts[i] is the midpoint between levels[i] and levels[i+1]; a value equal
// to a cut belongs to the level with the larger magnitude.
int nearest_level_index(const std::vector<double>& levels, double x);

std::vector<double> midpoint_cuts(const std::vector<double>& levels);
int nearest_by_cuts(const std::vector<double>& cuts, double x);

} // namespace lutnn
