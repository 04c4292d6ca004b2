#pragma once
// Shared plumbing: half-open intervals, error types, locale-independent
// number formatting, FNV-1a content hashing, deterministic RNG streams.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace sfl {

struct BoundaryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyCylinderError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AlignmentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MeasureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct QuadratureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Closed-open interval [lo, hi). Degenerate (hi <= lo) means empty.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double length() const { return hi > lo ? hi - lo : 0.0; }
    bool empty() const { return hi <= lo; }
    bool contains(double x) const { return x >= lo && x < hi; }

    Interval intersect(const Interval& o) const {
        return Interval{lo > o.lo ? lo : o.lo, hi < o.hi ? hi : o.hi};
    }
    Interval shifted(double d) const { return Interval{lo + d, hi + d}; }
};

inline double overlap_length(const Interval& a, const Interval& b) {
    return a.intersect(b).length();
}

// Shortest round-trip decimal formatting, independent of locale.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e)
        throw ConfigError("not a decimal number: '" + s + "'");
    return v;
}

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Worker stream i draws from master_seed ^ i, expanded through splitmix64
// so that nearby master seeds do not give overlapping mt19937 states.
inline std::mt19937_64 worker_rng(std::uint64_t master_seed,
                                  std::uint64_t worker_index) {
    std::uint64_t s = master_seed ^ worker_index;
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    std::uint64_t c = splitmix64(s);
    std::uint64_t d = splitmix64(s);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                      static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(d >> 32)};
    return std::mt19937_64(seq);
}

inline bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

constexpr double kPi = 3.141592653589793238462643383279502884;

}  // namespace sfl
