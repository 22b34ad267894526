#pragma once

// Cell-centered grids over boxes in R^n plus the two range-aggregate
// engines everything else leans on: inclusion-exclusion prefix sums for
// O(1) box sums and a multi-axis sparse table for O(1) box minima.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <vector>

#include "osc/common.hpp"

namespace osc {

/// Axis-aligned box in domain units; lo[a] < hi[a] for every axis.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    int dim() const { return static_cast<int>(lo.size()); }

    double volume() const {
        double v = 1.0;
        for (int a = 0; a < dim(); ++a) v *= hi[a] - lo[a];
        return v;
    }

    void validate() const {
        if (lo.empty() || lo.size() != hi.size())
            throw ConfigError("box: lo/hi must be non-empty and of equal length");
        if (dim() > kMaxDim)
            throw ConfigError("box: dimension exceeds compiled limit " + std::to_string(kMaxDim));
        for (int a = 0; a < dim(); ++a) {
            if (!std::isfinite(lo[a]) || !std::isfinite(hi[a]) || !(lo[a] < hi[a]))
                throw ConfigError("box: need finite lo < hi on axis " + std::to_string(a));
        }
    }
};

/// Geometry of a grid without its sample payload: domain box, per-axis
/// resolution, cell steps and linearisation strides (axis 0 contiguous).
struct GridShell {
    Box domain;
    int dim = 0;
    AxisInts res{};
    AxisReals step{};
    AxisInts64 stride{};
    std::int64_t size = 0;
    double cell_measure = 0.0;

    GridShell() = default;

    GridShell(Box box, const std::vector<int>& resolution) {
        box.validate();
        if (static_cast<int>(resolution.size()) != box.dim())
            throw ConfigError("grid: res length must match box dimension");
        domain = std::move(box);
        dim = domain.dim();
        size = 1;
        cell_measure = 1.0;
        for (int a = 0; a < dim; ++a) {
            if (resolution[a] < 1)
                throw ConfigError("grid: res must be >= 1 on axis " + std::to_string(a));
            res[a] = resolution[a];
            stride[a] = size;
            size *= res[a];
            step[a] = (domain.hi[a] - domain.lo[a]) / res[a];
            cell_measure *= step[a];
        }
    }

    double center(int axis, int i) const { return domain.lo[axis] + (i + 0.5) * step[axis]; }

    std::int64_t linear(const AxisInts& idx) const {
        std::int64_t k = 0;
        for (int a = 0; a < dim; ++a) k += stride[a] * idx[a];
        return k;
    }

    void unpack(std::int64_t k, AxisInts& idx) const {
        for (int a = 0; a < dim; ++a) {
            idx[a] = static_cast<int>(k % res[a]);
            k /= res[a];
        }
    }

    IndexBox full_box() const {
        IndexBox b;
        b.dim = dim;
        for (int a = 0; a < dim; ++a) {
            b.lo[a] = 0;
            b.hi[a] = res[a];
        }
        return b;
    }

    bool in_bounds(const IndexBox& b) const {
        if (b.dim != dim) return false;
        for (int a = 0; a < dim; ++a)
            if (b.lo[a] < 0 || b.hi[a] > res[a] || b.lo[a] >= b.hi[a]) return false;
        return true;
    }

    /// Shell of the sub-grid spanned by axes [axis0, axis0 + ndim).
    GridShell factor_shell(int axis0, int ndim) const {
        Box sub;
        std::vector<int> sub_res;
        for (int a = axis0; a < axis0 + ndim; ++a) {
            sub.lo.push_back(domain.lo[a]);
            sub.hi.push_back(domain.hi[a]);
            sub_res.push_back(res[a]);
        }
        return GridShell(std::move(sub), sub_res);
    }

    bool same_geometry(const GridShell& o) const {
        if (dim != o.dim) return false;
        for (int a = 0; a < dim; ++a)
            if (res[a] != o.res[a] || domain.lo[a] != o.domain.lo[a] || domain.hi[a] != o.domain.hi[a])
                return false;
        return true;
    }
};

/// What to do with a non-finite (or out-of-threshold) sample.
/// Default is to reject: oscillation norms must never ingest NaN, and
/// silent clipping would corrupt suprema. Clipping is opt-in.
struct SamplePolicy {
    enum class OnBad { reject, clip };
    OnBad on_bad = OnBad::reject;
    double clip_threshold = std::numeric_limits<double>::infinity();

    static SamplePolicy rejecting() { return {}; }
    static SamplePolicy clipping(double threshold) {
        SamplePolicy p;
        p.on_bad = OnBad::clip;
        p.clip_threshold = threshold;
        return p;
    }
};

/// Dense cell-centered samples of a scalar function on a box.
/// Immutable once filled; construction is single-threaded.
class GridFunction {
public:
    GridFunction() = default;

    /// Zero-filled grid (make_grid).
    GridFunction(Box box, const std::vector<int>& resolution)
        : shell_(std::move(box), resolution), values_(shell_.size, 0.0) {}

    explicit GridFunction(GridShell shell) : shell_(std::move(shell)), values_(shell_.size, 0.0) {}

    static GridFunction from_values(Box box, const std::vector<int>& resolution,
                                    std::vector<double> values,
                                    const SamplePolicy& policy = SamplePolicy::rejecting()) {
        GridFunction g(std::move(box), resolution);
        if (static_cast<std::int64_t>(values.size()) != g.size())
            throw ConfigError("grid: value count " + std::to_string(values.size()) +
                              " does not match res product " + std::to_string(g.size()));
        g.values_ = std::move(values);
        for (std::int64_t i = 0; i < g.size(); ++i) g.values_[i] = g.apply_policy(g.values_[i], i, policy);
        return g;
    }

    const GridShell& shell() const { return shell_; }
    int dim() const { return shell_.dim; }
    int res(int axis) const { return shell_.res[axis]; }
    std::int64_t size() const { return shell_.size; }
    double cell_measure() const { return shell_.cell_measure; }
    const Box& domain() const { return shell_.domain; }
    double center(int axis, int i) const { return shell_.center(axis, i); }

    double operator[](std::int64_t i) const { return values_[i]; }
    double& operator[](std::int64_t i) { return values_[i]; }
    const double* data() const { return values_.data(); }
    double* data() { return values_.data(); }
    const std::vector<double>& values() const { return values_; }

    double at(const AxisInts& idx) const { return values_[shell_.linear(idx)]; }

    double apply_policy(double v, std::int64_t cell, const SamplePolicy& policy) const {
        if (std::isfinite(v) && std::abs(v) <= policy.clip_threshold) return v;
        if (policy.on_bad == SamplePolicy::OnBad::clip) {
            double t = policy.clip_threshold;
            if (std::isnan(v)) throw Error("grid: NaN sample at cell " + cell_name(cell));
            return v > 0 ? t : -t;
        }
        throw Error("grid: non-finite sample at cell " + cell_name(cell) +
                    " (use the clip policy to admit it)");
    }

    std::string cell_name(std::int64_t linear) const {
        AxisInts idx;
        shell_.unpack(linear, idx);
        std::ostringstream os;
        os << "(";
        for (int a = 0; a < dim(); ++a) os << (a ? "," : "") << idx[a];
        os << ") center (";
        for (int a = 0; a < dim(); ++a) os << (a ? "," : "") << shell_.center(a, idx[a]);
        os << ")";
        return os.str();
    }

private:
    GridShell shell_;
    std::vector<double> values_;
};

inline GridFunction make_grid(Box box, const std::vector<int>& resolution) {
    return GridFunction(std::move(box), resolution);
}

namespace detail {

/// Iterates the rows of an index box: all index combinations of axes
/// 1..dim-1, presenting each as the linear offset of the row's first cell.
/// Axis 0 is the contiguous direction.
template <class F>
void for_each_row(const GridShell& g, const IndexBox& b, F&& f) {
    AxisInts idx = b.lo;
    for (;;) {
        std::int64_t base = 0;
        for (int a = 1; a < g.dim; ++a) base += g.stride[a] * idx[a];
        f(idx, base);
        int a = 1;
        for (; a < g.dim; ++a) {
            if (++idx[a] < b.hi[a]) break;
            idx[a] = b.lo[a];
        }
        if (a >= g.dim) break;
    }
}

}  // namespace detail

/// Inclusion-exclusion cumulative sums over a grid-shaped array.
/// sums has extent res[a]+1 per axis; any box sum is a signed combination
/// of its 2^n corners. Accumulation axis order is fixed (axis 0 first) so
/// results are bit-reproducible.
class PrefixTable {
public:
    PrefixTable() = default;

    template <class Transform>
    PrefixTable(const GridFunction& f, Transform&& t) {
        build(f.shell(), f.data(), std::forward<Transform>(t));
    }

    explicit PrefixTable(const GridFunction& f) : PrefixTable(f, [](double v) { return v; }) {}

    template <class Transform>
    void build(const GridShell& shell, const double* values, Transform&& t) {
        shell_ = shell;
        std::int64_t total = 1;
        for (int a = 0; a < shell_.dim; ++a) {
            ext_[a] = shell_.res[a] + 1;
            pstride_[a] = total;
            total *= ext_[a];
        }
        sums_.assign(total, 0.0);
        // Scatter values into the (res+1)-shaped array at offset +1 per axis.
        {
            AxisInts idx{};
            for (std::int64_t k = 0; k < shell_.size; ++k) {
                shell_.unpack(k, idx);
                std::int64_t p = 0;
                for (int a = 0; a < shell_.dim; ++a) p += pstride_[a] * (idx[a] + 1);
                sums_[p] = t(values[k]);
            }
        }
        // One accumulation sweep per axis, axis 0 innermost first.
        for (int a = 0; a < shell_.dim; ++a) {
            std::int64_t sa = pstride_[a];
            for (std::int64_t base = 0; base < total; ++base) {
                // walk only positions whose a-coordinate is 0
                std::int64_t coord = (base / sa) % ext_[a];
                if (coord != 0) continue;
                for (int i = 1; i < ext_[a]; ++i) sums_[base + sa * i] += sums_[base + sa * (i - 1)];
            }
        }
    }

    const GridShell& shell() const { return shell_; }

    /// Sum of covered cell values; exact to floating accumulation.
    double box_sum(const IndexBox& b) const {
        require(b);
        double total = 0.0;
        int n = shell_.dim;
        for (unsigned corner = 0; corner < (1u << n); ++corner) {
            std::int64_t p = 0;
            int ones = 0;
            for (int a = 0; a < n; ++a) {
                bool take_hi = corner & (1u << a);
                ones += take_hi;
                p += pstride_[a] * (take_hi ? b.hi[a] : b.lo[a]);
            }
            double s = sums_[p];
            total += ((n - ones) & 1) ? -s : s;
        }
        return total;
    }

    /// Mean of covered cells.
    double box_average(const IndexBox& b) const { return box_sum(b) / static_cast<double>(b.cells()); }

private:
    void require(const IndexBox& b) const {
        if (!shell_.in_bounds(b)) throw Error("prefix table: empty or out-of-range index box");
    }

    GridShell shell_;
    AxisInts ext_{};
    AxisInts64 pstride_{};
    std::vector<double> sums_;
};

/// Range-minimum over index boxes. Uses a multi-axis sparse table when the
/// table fits in the memory budget, otherwise falls back to direct scans.
/// The choice never changes results.
class MinTable {
public:
    static constexpr std::int64_t kMemoryBudgetBytes = 512ll << 20;

    MinTable() = default;

    explicit MinTable(const GridFunction& f, std::int64_t memory_budget = kMemoryBudgetBytes)
        : shell_(f.shell()), values_(f.data()) {
        std::int64_t combos = 1;
        for (int a = 0; a < shell_.dim; ++a) {
            levels_[a] = std::bit_width(static_cast<unsigned>(shell_.res[a]));
            lstride_[a] = combos;
            combos *= levels_[a];
        }
        if (combos * shell_.size * static_cast<std::int64_t>(sizeof(double)) > memory_budget) return;
        build(combos);
    }

    bool sparse() const { return !table_.empty(); }

    /// Minimum over covered cells; identical to a direct scan.
    double box_min(const IndexBox& b) const {
        if (!shell_.in_bounds(b)) throw Error("min table: empty or out-of-range index box");
        return sparse() ? sparse_min(b) : scan_min(b);
    }

private:
    void build(std::int64_t combos) {
        table_.assign(combos * shell_.size, std::numeric_limits<double>::infinity());
        std::copy(values_, values_ + shell_.size, table_.begin());
        // Grow one axis at a time; level combo (k0,..,k_{n-1}) holds minima
        // of 2^k0 x ... x 2^k_{n-1} windows anchored at each cell.
        AxisInts k{};
        for (int axis = 0; axis < shell_.dim; ++axis) {
            // enumerate all combos where axes > axis are at level 0
            enumerate_levels(0, axis, k);
        }
    }

    void enumerate_levels(int a, int axis, AxisInts& k) {
        if (a == axis) {
            for (int lvl = 1; lvl < levels_[axis]; ++lvl) {
                k[axis] = lvl;
                std::int64_t dst = combo_base(k, axis + 1);
                k[axis] = lvl - 1;
                std::int64_t src = combo_base(k, axis + 1);
                k[axis] = lvl;
                int half = 1 << (lvl - 1);
                fill_level(axis, src, dst, half);
            }
            k[axis] = 0;
            return;
        }
        for (int lvl = 0; lvl < levels_[a]; ++lvl) {
            k[a] = lvl;
            enumerate_levels(a + 1, axis, k);
        }
        k[a] = 0;
    }

    std::int64_t combo_base(const AxisInts& k, int upto) const {
        std::int64_t c = 0;
        for (int a = 0; a < upto; ++a) c += lstride_[a] * k[a];
        return c * shell_.size;
    }

    void fill_level(int axis, std::int64_t src, std::int64_t dst, int half) {
        std::int64_t sa = shell_.stride[axis];
        int n = shell_.res[axis];
        AxisInts idx{};
        for (std::int64_t cell = 0; cell < shell_.size; ++cell) {
            shell_.unpack(cell, idx);
            if (idx[axis] + 2 * half > n) continue;
            table_[dst + cell] = std::min(table_[src + cell], table_[src + cell + sa * half]);
        }
    }

    double sparse_min(const IndexBox& b) const {
        AxisInts k{};
        AxisInts off{};
        for (int a = 0; a < shell_.dim; ++a) {
            int len = b.extent(a);
            k[a] = std::bit_width(static_cast<unsigned>(len)) - 1;
            off[a] = b.hi[a] - (1 << k[a]);
        }
        std::int64_t base = combo_base(k, shell_.dim);
        double best = std::numeric_limits<double>::infinity();
        int n = shell_.dim;
        for (unsigned corner = 0; corner < (1u << n); ++corner) {
            std::int64_t p = 0;
            for (int a = 0; a < n; ++a)
                p += shell_.stride[a] * ((corner & (1u << a)) ? off[a] : b.lo[a]);
            best = std::min(best, table_[base + p]);
        }
        return best;
    }

    double scan_min(const IndexBox& b) const {
        double best = std::numeric_limits<double>::infinity();
        int len = b.extent(0);
        detail::for_each_row(shell_, b, [&](const AxisInts&, std::int64_t base) {
            const double* row = values_ + base + b.lo[0];
            for (int i = 0; i < len; ++i) best = std::min(best, row[i]);
        });
        return best;
    }

    GridShell shell_;
    const double* values_ = nullptr;
    AxisInts levels_{};
    AxisInts64 lstride_{};
    std::vector<double> table_;
};

/// Aggregates over the cells whose centers satisfy a predicate.
/// The predicate receives the cell-center coordinates.
template <class Pred>
double masked_sum(const GridFunction& f, Pred&& pred, std::int64_t* count_out = nullptr) {
    double sum = 0.0;
    std::int64_t count = 0;
    AxisInts idx{};
    AxisReals pt{};
    for (std::int64_t k = 0; k < f.size(); ++k) {
        f.shell().unpack(k, idx);
        for (int a = 0; a < f.dim(); ++a) pt[a] = f.center(a, idx[a]);
        if (pred(pt)) {
            sum += f[k];
            ++count;
        }
    }
    if (count == 0) throw Error("masked aggregate: mask selects no cell");
    if (count_out) *count_out = count;
    return sum;
}

template <class Pred>
double masked_min(const GridFunction& f, Pred&& pred) {
    double best = std::numeric_limits<double>::infinity();
    std::int64_t count = 0;
    AxisInts idx{};
    AxisReals pt{};
    for (std::int64_t k = 0; k < f.size(); ++k) {
        f.shell().unpack(k, idx);
        for (int a = 0; a < f.dim(); ++a) pt[a] = f.center(a, idx[a]);
        if (pred(pt)) {
            best = std::min(best, f[k]);
            ++count;
        }
    }
    if (count == 0) throw Error("masked aggregate: mask selects no cell");
    return best;
}

template <class Pred>
double masked_average(const GridFunction& f, Pred&& pred) {
    std::int64_t count = 0;
    double sum = masked_sum(f, pred, &count);
    return sum / static_cast<double>(count);
}

}  // namespace osc
