#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace osc {

/// Compile-time cap on grid dimension. Raise and recompile for higher
/// dimensions; everything below is written against runtime `dim`.
inline constexpr int kMaxDim = 6;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid user-facing configuration (bad spec, bad flag, bad file).
/// The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

using AxisInts = std::array<int, kMaxDim>;
using AxisInts64 = std::array<std::int64_t, kMaxDim>;
using AxisReals = std::array<double, kMaxDim>;

/// Half-open box of cell indices, [lo[a], hi[a]) per axis.
struct IndexBox {
    int dim = 0;
    AxisInts lo{};
    AxisInts hi{};

    int extent(int a) const { return hi[a] - lo[a]; }

    std::int64_t cells() const {
        std::int64_t n = 1;
        for (int a = 0; a < dim; ++a) n *= extent(a);
        return n;
    }

    bool empty() const {
        for (int a = 0; a < dim; ++a)
            if (hi[a] <= lo[a]) return true;
        return dim == 0;
    }

    bool contains(const IndexBox& other) const {
        for (int a = 0; a < dim; ++a)
            if (other.lo[a] < lo[a] || other.hi[a] > hi[a]) return false;
        return true;
    }

    bool intersects(const IndexBox& other) const {
        for (int a = 0; a < dim; ++a)
            if (other.hi[a] <= lo[a] || other.lo[a] >= hi[a]) return false;
        return true;
    }

    IndexBox intersection(const IndexBox& other) const {
        IndexBox r;
        r.dim = dim;
        for (int a = 0; a < dim; ++a) {
            r.lo[a] = std::max(lo[a], other.lo[a]);
            r.hi[a] = std::min(hi[a], other.hi[a]);
        }
        return r;
    }

    IndexBox hull(const IndexBox& other) const {
        IndexBox r;
        r.dim = dim;
        for (int a = 0; a < dim; ++a) {
            r.lo[a] = std::min(lo[a], other.lo[a]);
            r.hi[a] = std::max(hi[a], other.hi[a]);
        }
        return r;
    }

    bool operator==(const IndexBox& other) const {
        if (dim != other.dim) return false;
        for (int a = 0; a < dim; ++a)
            if (lo[a] != other.lo[a] || hi[a] != other.hi[a]) return false;
        return true;
    }
};

}  // namespace osc
