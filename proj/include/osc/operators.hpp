#pragma once

// The functionals: geometric maximal operator and the oscillation norms
// (BMO^p, BLO, lower-dimensional variants, rectangular BMO/BLO and the
// rejected naive rectangular BLO kept as a diagnostic). Per-shape
// statistics run off prefix/min tables; the supremum is a deterministic
// max-reduction with first-in-enumeration-order tie breaking.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "osc/basis.hpp"
#include "osc/grid.hpp"
#include "osc/parallel.hpp"

namespace osc {

enum class MaximalMode { abs, signed_avg };

struct OscReport {
    std::string kind;
    double p = 1.0;
    double value = 0.0;
    Shape argmax;
    std::vector<Shape> argmax_factors;
    std::int64_t argmax_index = -1;
    int factor = -1;  // lower norms: which factor the norm ranged over
    nlohmann::json basis_json;
    std::vector<int> res;
    std::vector<double> domain_lo, domain_hi;
    std::vector<int> split;
    std::string fn;  // provenance, filled by callers that know it
    double runtime_ms = 0.0;

    nlohmann::json to_json(bool no_meta = false) const {
        nlohmann::json j;
        j["kind"] = kind;
        if (kind == "bmo_p" || kind.rfind("bmo_lower", 0) == 0) j["p"] = p;
        j["value"] = value;
        j["argmax"] = shape_to_json(argmax);
        if (!argmax_factors.empty()) {
            nlohmann::json arr = nlohmann::json::array();
            for (const Shape& s : argmax_factors) arr.push_back(shape_to_json(s));
            j["argmax_factors"] = arr;
        }
        j["argmax_index"] = argmax_index;
        if (factor >= 0) j["factor"] = factor;
        j["basis"] = basis_json;
        j["res"] = res;
        j["domain"] = {{"lo", domain_lo}, {"hi", domain_hi}};
        if (!split.empty()) j["split"] = split;
        if (!fn.empty()) j["fn"] = fn;
        if (!no_meta) j["runtime_ms"] = runtime_ms;
        return j;
    }
};

namespace detail {

inline void fill_report_meta(OscReport& r, const GridShell& g) {
    r.res.assign(g.res.begin(), g.res.begin() + g.dim);
    r.domain_lo = g.domain.lo;
    r.domain_hi = g.domain.hi;
}

class StopWatch {
public:
    StopWatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        auto d = std::chrono::steady_clock::now() - start_;
        return std::chrono::duration<double, std::milli>(d).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// shape aggregates

inline double shape_sum(const PrefixTable& P, const GridShell& g, const Shape& s) {
    if (s.is_box()) return P.box_sum(s.box);
    double total = 0.0;
    IndexBox b;
    b.dim = g.dim;
    for_each_span(s, g, [&](const AxisInts& row, int x0, int x1, std::int64_t) {
        b.lo[0] = x0;
        b.hi[0] = x1;
        for (int a = 1; a < g.dim; ++a) {
            b.lo[a] = row[a];
            b.hi[a] = row[a] + 1;
        }
        total += P.box_sum(b);
    });
    return total;
}

inline double shape_mean(const PrefixTable& P, const GridShell& g, const Shape& s) {
    return shape_sum(P, g, s) / static_cast<double>(s.cells);
}

inline double shape_min(const MinTable& M, const GridShell& g, const Shape& s) {
    if (s.is_box()) return M.box_min(s.box);
    double best = std::numeric_limits<double>::infinity();
    IndexBox b;
    b.dim = g.dim;
    for_each_span(s, g, [&](const AxisInts& row, int x0, int x1, std::int64_t) {
        b.lo[0] = x0;
        b.hi[0] = x1;
        for (int a = 1; a < g.dim; ++a) {
            b.lo[a] = row[a];
            b.hi[a] = row[a] + 1;
        }
        best = std::min(best, M.box_min(b));
    });
    return best;
}

/// Shared read-only tables for per-shape statistics over one grid.
struct Tables {
    const GridFunction* f = nullptr;
    PrefixTable sum;
    PrefixTable sumsq;
    MinTable mins;
    bool has_sq = false;
    bool has_min = false;

    Tables(const GridFunction& fn, bool need_sq, bool need_min) : f(&fn), sum(fn) {
        if (need_sq) {
            sumsq.build(fn.shell(), fn.data(), [](double v) { return v * v; });
            has_sq = true;
        }
        if (need_min) {
            mins = MinTable(fn);
            has_min = true;
        }
    }

    const GridShell& shell() const { return f->shell(); }
};

/// Per-shape statistic kernels plus the scratch they need. One instance per
/// worker thread; the Tables object is shared read-only.
class StatEngine {
public:
    explicit StatEngine(const Tables& t) : t_(t), g_(t.shell()) {}

    double mean(const Shape& s) const { return shape_sum(t_.sum, g_, s) / double(s.cells); }

    double bmo(const Shape& s, double p) {
        double mu = mean(s);
        if (p == 2.0 && t_.has_sq) {
            double m2 = shape_sum(t_.sumsq, g_, s) / double(s.cells);
            return std::sqrt(std::max(0.0, m2 - mu * mu));
        }
        const double* v = t_.f->data();
        double acc = 0.0;
        if (p == 1.0) {
            for_each_span(s, g_, [&](const AxisInts&, int x0, int x1, std::int64_t base) {
                const double* run = v + base;
                double local = 0.0;
                for (int x = x0; x < x1; ++x) local += std::abs(run[x] - mu);
                acc += local;
            });
            return acc / double(s.cells);
        }
        for_each_span(s, g_, [&](const AxisInts&, int x0, int x1, std::int64_t base) {
            const double* run = v + base;
            double local = 0.0;
            for (int x = x0; x < x1; ++x) local += std::pow(std::abs(run[x] - mu), p);
            acc += local;
        });
        return std::pow(acc / double(s.cells), 1.0 / p);
    }

    double blo(const Shape& s) const {
        return mean(s) - shape_min(t_.mins, g_, s);
    }

    /// k = 2 rectangular mean oscillation against the marginal ansatz.
    double rec_bmo(const Shape& whole, const std::vector<Shape>& parts, const FactorSplit& split) {
        require_k2(split);
        fill_marginal_means(whole, parts, split);
        double m = mean(whole);
        const double* v = t_.f->data();
        const int alo = parts[0].box.lo[0];
        double acc = 0.0;
        int n1 = split.parts[0];
        for_each_span(whole, g_, [&](const AxisInts& row, int x0, int x1, std::int64_t base) {
            const double* run = v + base;
            double c = b_[b_index(row, split)] - m;
            if (n1 == 1) {
                const double* arow = a_.data() - alo;
                double local = 0.0;
                for (int x = x0; x < x1; ++x) local += std::abs(run[x] - arow[x] - c);
                acc += local;
            } else {
                std::int64_t abase = a_index_row(row, parts[0]);
                const double* arow = a_.data() + abase - alo;
                double local = 0.0;
                for (int x = x0; x < x1; ++x) local += std::abs(run[x] - arow[x] - c);
                acc += local;
            }
        });
        return acc / double(whole.cells);
    }

    /// General-k rectangular lower oscillation; integrand is nonnegative
    /// cell-wise (each slice minimum includes the cell itself).
    double rec_blo(const Shape& whole, const std::vector<Shape>& parts, const FactorSplit& split,
                   double* min_integrand = nullptr) {
        int k = split.k();
        fill_slice_mins(whole, parts, split);
        const double* v = t_.f->data();
        double acc = 0.0;
        double mini = std::numeric_limits<double>::infinity();
        for_each_span(whole, g_, [&](const AxisInts& row, int x0, int x1, std::int64_t base) {
            const double* run = v + base;
            // factor 0 excludes axis 0 from its slice index: constant per row
            double m0 = m_[0][slice_index(row, 0, split, 0)];
            if (k == 2 && split.offsets[1] == 1 && g_.dim == 2) {
                const double* m1 = m_[1].data() - whole.box.lo[0];
                double local = 0.0;
                for (int x = x0; x < x1; ++x) {
                    double d = run[x] - std::max(m0, m1[x]);
                    mini = std::min(mini, d);
                    local += d;
                }
                acc += local;
            } else {
                for (int x = x0; x < x1; ++x) {
                    double mx = m0;
                    for (int i = 1; i < k; ++i) mx = std::max(mx, m_[i][slice_index(row, x, split, i)]);
                    double d = run[x] - mx;
                    mini = std::min(mini, d);
                    acc += d;
                }
            }
        });
        if (min_integrand) *min_integrand = mini;
        return acc / double(whole.cells);
    }

    /// The rejected k = 2 definition with the joint essential infimum and
    /// absolute values; diagnostic only.
    double rec_blo_naive(const Shape& whole, const std::vector<Shape>& parts,
                         const FactorSplit& split) {
        require_k2(split);
        fill_slice_mins(whole, parts, split);
        double gmin = shape_min(t_.mins, g_, whole);
        const double* v = t_.f->data();
        double acc = 0.0;
        for_each_span(whole, g_, [&](const AxisInts& row, int x0, int x1, std::int64_t base) {
            const double* run = v + base;
            double m0 = m_[0][slice_index(row, 0, split, 0)];
            double local = 0.0;
            for (int x = x0; x < x1; ++x) {
                double m1 = m_[1][slice_index(row, x, split, 1)];
                local += std::abs(run[x] - m1 - m0 + gmin);
            }
            acc += local;
        });
        return acc / double(whole.cells);
    }

private:
    static void require_k2(const FactorSplit& split) {
        if (split.k() != 2)
            throw ConfigError("this rectangular statistic is defined for two factors (k = 2)");
    }

    // flat index of the factor-0 marginal over part-0 bbox of the shape
    std::int64_t a_index_row(const AxisInts& row, const Shape& s1) const {
        std::int64_t idx = 0, stride = 1;
        for (int a = 0; a < s1.box.dim; ++a) {
            if (a > 0) idx += stride * (row[a] - s1.box.lo[a]);
            stride *= s1.box.extent(a);
        }
        return idx;
    }

    std::int64_t b_index(const AxisInts& row, const FactorSplit& split) const {
        int off = split.offsets[1];
        std::int64_t idx = 0, stride = 1;
        for (int a = off; a < g_.dim; ++a) {
            idx += stride * (row[a] - bb_lo_[a]);
            stride *= bb_ext_[a];
        }
        return idx;
    }

    // flat index over the axes outside part i ("the other factors") at the
    // given row with axis 0 replaced by x
    std::int64_t slice_index(const AxisInts& row, int x, const FactorSplit& split, int i) const {
        int off = split.offsets[i], len = split.parts[i];
        std::int64_t idx = 0, stride = 1;
        for (int a = 0; a < g_.dim; ++a) {
            if (a >= off && a < off + len) continue;
            int c = a == 0 ? x : row[a];
            idx += stride * (c - sl_lo_[i][a]);
            stride *= sl_ext_[i][a];
        }
        return idx;
    }

    /// a over cells of part 0 (mean with the part-1 coordinates ranging over
    /// S2), b over cells of part 1.
    void fill_marginal_means(const Shape& whole, const std::vector<Shape>& parts,
                             const FactorSplit& split) {
        const Shape& s1 = parts[0];
        const Shape& s2 = parts[1];
        int off = split.offsets[1];
        std::int64_t an = 1;
        for (int a = 0; a < s1.box.dim; ++a) an *= s1.box.extent(a);
        std::int64_t bn = 1;
        for (int a = off; a < g_.dim; ++a) {
            bb_lo_[a] = whole.box.lo[a];
            bb_ext_[a] = whole.box.extent(a);
            bn *= bb_ext_[a];
        }
        a_.assign(an, 0.0);
        b_.assign(bn, 0.0);

        bool fast2d = g_.dim == 2 && whole.is_box() && split.parts[0] == 1;
        if (fast2d) {
            // contiguous prefix-row arithmetic for both marginals
            int x0 = whole.box.lo[0], x1 = whole.box.hi[0];
            int y0 = whole.box.lo[1], y1 = whole.box.hi[1];
            double len2 = double(y1 - y0), len1 = double(x1 - x0);
            for (int x = x0; x < x1; ++x) {
                IndexBox col;
                col.dim = 2;
                col.lo = {x, y0};
                col.hi = {x + 1, y1};
                a_[x - x0] = t_.sum.box_sum(col) / len2;
            }
            for (int y = y0; y < y1; ++y) {
                IndexBox rowb;
                rowb.dim = 2;
                rowb.lo = {x0, y};
                rowb.hi = {x1, y + 1};
                b_[y - y0] = t_.sum.box_sum(rowb) / len1;
            }
            return;
        }

        // generic: pin part-0 cell, aggregate over S2 (and vice versa)
        IndexBox q;
        q.dim = g_.dim;
        GridShell sh1 = g_.factor_shell(0, split.parts[0]);
        GridShell sh2 = g_.factor_shell(off, split.parts[1]);
        // a: iterate cells of S1 on the factor shell via spans
        for_each_span(s1, sh1, [&](const AxisInts& row, int c0, int c1, std::int64_t) {
            for (int c = c0; c < c1; ++c) {
                AxisInts cell = row;
                cell[0] = c;
                std::int64_t ai = 0, stride = 1;
                for (int a = 0; a < split.parts[0]; ++a) {
                    ai += stride * (cell[a] - s1.box.lo[a]);
                    stride *= s1.box.extent(a);
                }
                if (s2.is_box()) {
                    for (int a = 0; a < split.parts[0]; ++a) {
                        q.lo[a] = cell[a];
                        q.hi[a] = cell[a] + 1;
                    }
                    for (int a = off; a < g_.dim; ++a) {
                        q.lo[a] = s2.box.lo[a - off];
                        q.hi[a] = s2.box.hi[a - off];
                    }
                    a_[ai] = t_.sum.box_sum(q) / double(s2.cells);
                } else {
                    // masked S2: accumulate its spans with part-0 pinned
                    double total = 0.0;
                    IndexBox qq;
                    qq.dim = g_.dim;
                    for (int a = 0; a < split.parts[0]; ++a) {
                        qq.lo[a] = cell[a];
                        qq.hi[a] = cell[a] + 1;
                    }
                    for_each_span(s2, sh2, [&](const AxisInts& r2, int d0, int d1, std::int64_t) {
                        qq.lo[off] = d0;
                        qq.hi[off] = d1;
                        for (int a = 1; a < split.parts[1]; ++a) {
                            qq.lo[off + a] = r2[a];
                            qq.hi[off + a] = r2[a] + 1;
                        }
                        total += t_.sum.box_sum(qq);
                    });
                    a_[ai] = total / double(s2.cells);
                }
            }
        });
        // b: iterate cells of S2
        for_each_span(s2, sh2, [&](const AxisInts& row, int c0, int c1, std::int64_t) {
            for (int c = c0; c < c1; ++c) {
                AxisInts cell = row;
                cell[0] = c;
                double total = 0.0;
                if (s1.is_box()) {
                    for (int a = 0; a < split.parts[0]; ++a) {
                        q.lo[a] = s1.box.lo[a];
                        q.hi[a] = s1.box.hi[a];
                    }
                    for (int a = 0; a < split.parts[1]; ++a) {
                        q.lo[off + a] = cell[a];
                        q.hi[off + a] = cell[a] + 1;
                    }
                    total = t_.sum.box_sum(q);
                } else {
                    IndexBox qq;
                    qq.dim = g_.dim;
                    for (int a = 0; a < split.parts[1]; ++a) {
                        qq.lo[off + a] = cell[a];
                        qq.hi[off + a] = cell[a] + 1;
                    }
                    for_each_span(s1, sh1, [&](const AxisInts& r1, int d0, int d1, std::int64_t) {
                        qq.lo[0] = d0;
                        qq.hi[0] = d1;
                        for (int a = 1; a < split.parts[0]; ++a) {
                            qq.lo[a] = r1[a];
                            qq.hi[a] = r1[a] + 1;
                        }
                        total += t_.sum.box_sum(qq);
                    });
                }
                std::int64_t bi = 0, stride = 1;
                for (int a = 0; a < split.parts[1]; ++a) {
                    bi += stride * (cell[a] - bb_lo_[off + a]);
                    stride *= bb_ext_[off + a];
                }
                b_[bi] = total / double(s1.cells);
            }
        });
    }

    /// m_[i] = essential infimum of the slice through each cell of the
    /// other factors (min over S_i with the remaining coordinates pinned).
    void fill_slice_mins(const Shape& whole, const std::vector<Shape>& parts,
                         const FactorSplit& split) {
        int k = split.k();
        m_.resize(k);
        for (int i = 0; i < k; ++i) {
            int off = split.offsets[i], len = split.parts[i];
            GridShell shi = parts[i].is_box() ? GridShell() : g_.factor_shell(off, len);
            std::int64_t n = 1;
            for (int a = 0; a < g_.dim; ++a) {
                if (a >= off && a < off + len) continue;
                sl_lo_[i][a] = whole.box.lo[a];
                sl_ext_[i][a] = whole.box.extent(a);
                n *= sl_ext_[i][a];
            }
            m_[i].assign(n, 0.0);
            // iterate combos of the other axes
            AxisInts idx{};
            for (int a = 0; a < g_.dim; ++a) idx[a] = whole.box.lo[a];
            IndexBox q;
            q.dim = g_.dim;
            std::int64_t flat = 0;
            for (;;) {
                double mval;
                if (parts[i].is_box()) {
                    for (int a = 0; a < g_.dim; ++a) {
                        if (a >= off && a < off + len) {
                            q.lo[a] = parts[i].box.lo[a - off];
                            q.hi[a] = parts[i].box.hi[a - off];
                        } else {
                            q.lo[a] = idx[a];
                            q.hi[a] = idx[a] + 1;
                        }
                    }
                    mval = t_.mins.box_min(q);
                } else {
                    double best = std::numeric_limits<double>::infinity();
                    IndexBox qq;
                    qq.dim = g_.dim;
                    for (int a = 0; a < g_.dim; ++a) {
                        if (a < off || a >= off + len) {
                            qq.lo[a] = idx[a];
                            qq.hi[a] = idx[a] + 1;
                        }
                    }
                    for_each_span(parts[i], shi, [&](const AxisInts& r, int d0, int d1, std::int64_t) {
                        qq.lo[off] = d0;
                        qq.hi[off] = d1;
                        for (int a = 1; a < len; ++a) {
                            qq.lo[off + a] = r[a];
                            qq.hi[off + a] = r[a] + 1;
                        }
                        best = std::min(best, t_.mins.box_min(qq));
                    });
                    mval = best;
                }
                m_[i][flat] = mval;
                // advance over the axes outside part i
                ++flat;
                int a = 0;
                for (; a < g_.dim; ++a) {
                    if (a >= off && a < off + len) continue;
                    if (++idx[a] < whole.box.hi[a]) break;
                    idx[a] = whole.box.lo[a];
                }
                if (a >= g_.dim) break;
            }
        }
    }

    const Tables& t_;
    const GridShell& g_;
    std::vector<double> a_, b_;
    std::vector<std::vector<double>> m_;
    AxisInts bb_lo_{};
    AxisInts bb_ext_{};
    std::array<AxisInts, kMaxDim> sl_lo_{};
    std::array<AxisInts, kMaxDim> sl_ext_{};
};

// ---------------------------------------------------------------------------
// enumeration guards (complexity control)

namespace detail {

inline bool spec_has_full(const BasisSpec& s) {
    if (!s.factors.empty()) {
        for (const auto& f : s.factors)
            if (spec_has_full(f)) return true;
        return false;
    }
    return s.granularity == Granularity::full;
}

inline void guard_enumeration(const Basis& basis, bool per_cell_pass) {
    if (basis.size() > (std::int64_t(1) << 31))
        throw ConfigError("basis enumerates " + std::to_string(basis.size()) +
                          " shapes; coarsen the granularity (dyadic or stride)");
    const GridShell& g = basis.shell();
    int maxres = 0;
    for (int a = 0; a < g.dim; ++a) maxres = std::max(maxres, g.res[a]);
    if (per_cell_pass && g.dim >= 2 && maxres > 64 && spec_has_full(basis.spec()))
        throw ConfigError(
            "full enumeration with per-shape passes is capped at 64 cells per axis in "
            "dimension >= 2; use dyadic or stride granularity at this resolution");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// direct recomputation (no prefix/min tables) for the argmax invariant

namespace direct_check {

inline double mean(const GridFunction& f, const Shape& s) {
    double total = 0.0;
    const double* v = f.data();
    for_each_span(s, f.shell(), [&](const AxisInts&, int x0, int x1, std::int64_t base) {
        for (int x = x0; x < x1; ++x) total += v[base + x];
    });
    return total / double(s.cells);
}

inline double minimum(const GridFunction& f, const Shape& s) {
    double best = std::numeric_limits<double>::infinity();
    const double* v = f.data();
    for_each_span(s, f.shell(), [&](const AxisInts&, int x0, int x1, std::int64_t base) {
        for (int x = x0; x < x1; ++x) best = std::min(best, v[base + x]);
    });
    return best;
}

inline double bmo_stat(const GridFunction& f, const Shape& s, double p) {
    double mu = mean(f, s);
    double acc = 0.0;
    const double* v = f.data();
    for_each_span(s, f.shell(), [&](const AxisInts&, int x0, int x1, std::int64_t base) {
        for (int x = x0; x < x1; ++x) acc += std::pow(std::abs(v[base + x] - mu), p);
    });
    return std::pow(acc / double(s.cells), 1.0 / p);
}

inline double blo_stat(const GridFunction& f, const Shape& s) {
    return mean(f, s) - minimum(f, s);
}

inline Shape pinned(const Shape& whole, const FactorSplit& split, int i, const AxisInts& cell,
                    const Shape& part) {
    // full-dimension shape: part i spans S_i, every other axis pinned to `cell`
    Shape s;
    s.box.dim = whole.box.dim;
    int off = split.offsets[i], len = split.parts[i];
    for (int a = 0; a < whole.box.dim; ++a) {
        if (a >= off && a < off + len) {
            s.box.lo[a] = part.box.lo[a - off];
            s.box.hi[a] = part.box.hi[a - off];
        } else {
            s.box.lo[a] = cell[a];
            s.box.hi[a] = cell[a] + 1;
        }
    }
    for (BallPart b : part.balls) {
        b.axis0 += off;
        s.balls.push_back(b);
    }
    s.cells = part.cells;
    return s;
}

inline double rec_bmo_stat(const GridFunction& f, const Shape& whole,
                           const std::vector<Shape>& parts, const FactorSplit& split) {
    if (split.k() != 2) throw ConfigError("rectangular mean oscillation needs k = 2");
    const GridShell& g = f.shell();
    double m = mean(f, whole);
    double acc = 0.0;
    for_each_span(whole, g, [&](const AxisInts& row, int x0, int x1, std::int64_t base) {
        AxisInts cell = row;
        for (int x = x0; x < x1; ++x) {
            cell[0] = x;
            double a = mean(f, pinned(whole, split, 1, cell, parts[1]));
            double b = mean(f, pinned(whole, split, 0, cell, parts[0]));
            acc += std::abs(f[base + x] - a - b + m);
        }
    });
    return acc / double(whole.cells);
}

inline double rec_blo_stat(const GridFunction& f, const Shape& whole,
                           const std::vector<Shape>& parts, const FactorSplit& split) {
    const GridShell& g = f.shell();
    double acc = 0.0;
    for_each_span(whole, g, [&](const AxisInts& row, int x0, int x1, std::int64_t base) {
        AxisInts cell = row;
        for (int x = x0; x < x1; ++x) {
            cell[0] = x;
            double mx = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < split.k(); ++i)
                mx = std::max(mx, minimum(f, pinned(whole, split, i, cell, parts[i])));
            acc += f[base + x] - mx;
        }
    });
    return acc / double(whole.cells);
}

inline double rec_blo_naive_stat(const GridFunction& f, const Shape& whole,
                                 const std::vector<Shape>& parts, const FactorSplit& split) {
    if (split.k() != 2) throw ConfigError("naive rectangular lower oscillation needs k = 2");
    const GridShell& g = f.shell();
    double gmin = minimum(f, whole);
    double acc = 0.0;
    for_each_span(whole, g, [&](const AxisInts& row, int x0, int x1, std::int64_t base) {
        AxisInts cell = row;
        for (int x = x0; x < x1; ++x) {
            cell[0] = x;
            double m1 = minimum(f, pinned(whole, split, 1, cell, parts[1]));
            double m0 = minimum(f, pinned(whole, split, 0, cell, parts[0]));
            acc += std::abs(f[base + x] - m1 - m0 + gmin);
        }
    });
    return acc / double(whole.cells);
}

}  // namespace direct_check

namespace detail {

inline void check_argmax(double reported, double direct, const char* what) {
    double tol = 1e-9 * std::max({1.0, std::abs(reported), std::abs(direct)});
    if (std::abs(reported - direct) > tol)
        throw Error(std::string(what) +
                    ": argmax recomputation mismatch (reported " + std::to_string(reported) +
                    ", direct " + std::to_string(direct) + ")");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// maximal function

/// M f: per cell, the largest average of |f| (or of f in signed mode) over
/// enumerated shapes containing the cell. Errors if the basis fails to
/// cover some cell.
inline GridFunction maximal(const GridFunction& f, const Basis& basis,
                            MaximalMode mode = MaximalMode::abs, int threads = 0) {
    detail::guard_enumeration(basis, true);
    const GridShell& g = f.shell();
    if (!g.same_geometry(basis.shell())) throw ConfigError("maximal: basis compiled for another grid");
    PrefixTable P(f, [mode](double v) { return mode == MaximalMode::abs ? std::abs(v) : v; });

    threads = resolve_threads(threads);
    std::int64_t M = basis.size();
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> partial(std::max(1, threads),
                                             std::vector<double>(g.size, neg_inf));
    parallel_chunks(M, threads, [&](int t, std::int64_t b, std::int64_t e) {
        std::vector<double>& out = partial[t];
        Shape s;
        for (std::int64_t i = b; i < e; ++i) {
            basis.shape_at(i, s);
            double avg = shape_sum(P, g, s) / double(s.cells);
            for_each_span(s, g, [&](const AxisInts&, int x0, int x1, std::int64_t base) {
                double* run = out.data() + base;
                for (int x = x0; x < x1; ++x) run[x] = std::max(run[x], avg);
            });
        }
    });
    GridFunction out(g);
    for (std::int64_t k = 0; k < g.size; ++k) {
        double m = neg_inf;
        for (const auto& part : partial) m = std::max(m, part[k]);
        if (m == neg_inf)
            throw Error("maximal: basis does not cover cell " + out.cell_name(k) +
                        "; loosen min_cells or change granularity");
        out[k] = m;
    }
    return out;
}

// ---------------------------------------------------------------------------
// norms

namespace detail {

template <class Stat>
OscReport sup_over_basis(const GridFunction& f, const Basis& basis, const Tables& tables,
                         const char* kind, double p, bool per_cell, int threads, Stat&& stat) {
    if (!f.shell().same_geometry(basis.shell()))
        throw ConfigError("norm: basis compiled for another grid");
    guard_enumeration(basis, per_cell);
    StopWatch watch;
    threads = resolve_threads(threads);
    std::int64_t M = basis.size();
    std::vector<MaxWitness> best(std::max(1, threads));
    parallel_chunks(M, threads, [&](int t, std::int64_t b, std::int64_t e) {
        StatEngine engine(tables);
        Shape s;
        for (std::int64_t i = b; i < e; ++i) {
            basis.shape_at(i, s);
            best[t].offer(stat(engine, s), i);
        }
    });
    MaxWitness w;
    for (const auto& part : best) w.merge(part);

    OscReport r;
    r.kind = kind;
    r.p = p;
    r.value = w.value;
    r.argmax_index = w.index;
    r.argmax = basis.shape_at(w.index);
    r.basis_json = basis.spec().to_json();
    fill_report_meta(r, f.shell());
    r.runtime_ms = watch.ms();
    return r;
}

}  // namespace detail

inline OscReport bmo_norm(const GridFunction& f, const Basis& basis, double p = 1.0,
                          int threads = 0) {
    if (!(p >= 1.0)) throw ConfigError("bmo norm needs p >= 1");
    Tables tables(f, p == 2.0, false);
    OscReport r = detail::sup_over_basis(
        f, basis, tables, "bmo_p", p, p != 2.0, threads,
        [p](StatEngine& e, const Shape& s) { return e.bmo(s, p); });
    detail::check_argmax(r.value, direct_check::bmo_stat(f, r.argmax, p), "bmo_norm");
    return r;
}

inline OscReport blo_norm(const GridFunction& f, const Basis& basis, int threads = 0) {
    Tables tables(f, false, true);
    OscReport r = detail::sup_over_basis(
        f, basis, tables, "blo", 1.0, false, threads,
        [](StatEngine& e, const Shape& s) { return e.blo(s); });
    detail::check_argmax(r.value, direct_check::blo_stat(f, r.argmax), "blo_norm");
    return r;
}

// ---------------------------------------------------------------------------
// lower-dimensional norms: supremum over all slices of the factor norm.
// Each slice statistic equals the statistic of a one-cell-thick full-grid
// shape, so these share kernels (and floating behaviour) with the product
// norms.

namespace detail {

struct SliceWalker {
    const GridShell& g;
    int off, len;
    std::int64_t count = 1;

    SliceWalker(const GridShell& shell, const FactorSplit& split, int factor)
        : g(shell), off(split.offsets[factor]), len(split.parts[factor]) {
        for (int a = 0; a < g.dim; ++a)
            if (a < off || a >= off + len) count *= g.res[a];
    }

    /// cell combo of the complement axes for a flat slice id
    void cell(std::int64_t flat, AxisInts& idx) const {
        for (int a = 0; a < g.dim; ++a) {
            if (a >= off && a < off + len) {
                idx[a] = 0;
                continue;
            }
            idx[a] = static_cast<int>(flat % g.res[a]);
            flat /= g.res[a];
        }
    }
};

inline Shape embed_thin(const GridShell& g, const FactorSplit& split, int factor,
                        const AxisInts& slice_cell, const Shape& part) {
    Shape s;
    s.box.dim = g.dim;
    int off = split.offsets[factor], len = split.parts[factor];
    for (int a = 0; a < g.dim; ++a) {
        if (a >= off && a < off + len) {
            s.box.lo[a] = part.box.lo[a - off];
            s.box.hi[a] = part.box.hi[a - off];
        } else {
            s.box.lo[a] = slice_cell[a];
            s.box.hi[a] = slice_cell[a] + 1;
        }
    }
    for (BallPart b : part.balls) {
        b.axis0 += off;
        s.balls.push_back(b);
    }
    s.cells = part.cells;
    return s;
}

template <class Stat>
OscReport lower_norm(const GridFunction& f, const FactorSplit& split, int factor,
                     const BasisSpec& factor_spec, const Tables& tables, const char* kind,
                     double p, int threads, Stat&& stat) {
    split.validate_for(f.dim());
    if (factor < 0 || factor >= split.k()) throw ConfigError("lower norm: factor index out of range");
    GridShell fshell = f.shell().factor_shell(split.offsets[factor], split.parts[factor]);
    Basis fb = Basis::compile(factor_spec, fshell);
    SliceWalker slices(f.shell(), split, factor);
    std::int64_t total = slices.count * fb.size();
    if (total > (std::int64_t(1) << 31))
        throw ConfigError("lower norm: too many slice/shape pairs; coarsen the factor basis");

    StopWatch watch;
    threads = resolve_threads(threads);
    std::vector<MaxWitness> best(std::max(1, threads));
    parallel_chunks(total, threads, [&](int t, std::int64_t b, std::int64_t e) {
        StatEngine engine(tables);
        Shape part;
        AxisInts cell{};
        for (std::int64_t i = b; i < e; ++i) {
            std::int64_t slice = i / fb.size();
            std::int64_t si = i % fb.size();
            slices.cell(slice, cell);
            fb.shape_at(si, part);
            Shape thin = embed_thin(f.shell(), split, factor, cell, part);
            best[t].offer(stat(engine, thin), i);
        }
    });
    MaxWitness w;
    for (const auto& part : best) w.merge(part);

    OscReport r;
    r.kind = kind;
    r.p = p;
    r.factor = factor;
    r.value = w.value;
    r.argmax_index = w.index;
    {
        AxisInts cell{};
        Shape part;
        slices.cell(w.index / fb.size(), cell);
        fb.shape_at(w.index % fb.size(), part);
        r.argmax = embed_thin(f.shell(), split, factor, cell, part);
    }
    r.basis_json = fb.spec().to_json();
    r.split.assign(split.parts.begin(), split.parts.end());
    fill_report_meta(r, f.shell());
    r.runtime_ms = watch.ms();
    return r;
}

}  // namespace detail

inline OscReport lower_bmo(const GridFunction& f, const FactorSplit& split, int factor,
                           const BasisSpec& factor_spec, double p = 1.0, int threads = 0) {
    if (!(p >= 1.0)) throw ConfigError("bmo norm needs p >= 1");
    Tables tables(f, p == 2.0, false);
    OscReport r = detail::lower_norm(
        f, split, factor, factor_spec, tables, "bmo_lower", p, threads,
        [p](StatEngine& e, const Shape& s) { return e.bmo(s, p); });
    r.kind = "bmo_lower(" + std::to_string(factor) + ")";
    detail::check_argmax(r.value, direct_check::bmo_stat(f, r.argmax, p), "lower_bmo");
    return r;
}

inline OscReport lower_blo(const GridFunction& f, const FactorSplit& split, int factor,
                           const BasisSpec& factor_spec, int threads = 0) {
    Tables tables(f, false, true);
    OscReport r = detail::lower_norm(
        f, split, factor, factor_spec, tables, "blo_lower", 1.0, threads,
        [](StatEngine& e, const Shape& s) { return e.blo(s); });
    r.kind = "blo_lower(" + std::to_string(factor) + ")";
    detail::check_argmax(r.value, direct_check::blo_stat(f, r.argmax), "lower_blo");
    return r;
}

// ---------------------------------------------------------------------------
// rectangular norms over a product basis

namespace detail {

/// Specialised tables for two 1-dimensional box factors on a 2D grid:
/// marginal means and slice minima indexed by (interval id, coordinate).
/// These make the per-shape cost of the rectangular norms pure integrand
/// work at full enumeration.
struct RecTables2D {
    std::vector<std::pair<int, int>> xiv, yiv;
    int nx = 0, ny = 0;
    std::vector<double> colmean;  // [y-interval][x]
    std::vector<double> rowmean;  // [x-interval][y]
    std::vector<double> colmin;   // [y-interval][x]
    std::vector<double> rowmin;   // [x-interval][y]

    static bool eligible(const GridFunction& f, const Basis& product) {
        if (f.dim() != 2 || product.factor_count() != 2) return false;
        if (product.split().parts[0] != 1 || product.split().parts[1] != 1) return false;
        return product.factor(0).shape_at(0).is_box() && product.factor(1).shape_at(0).is_box();
    }

    RecTables2D(const GridFunction& f, const Basis& product, const Tables& t, bool need_mean,
                bool need_min) {
        nx = f.res(0);
        ny = f.res(1);
        materialise(product.factor(0), xiv);
        materialise(product.factor(1), yiv);
        if (need_mean) {
            colmean.resize(yiv.size() * nx);
            rowmean.resize(xiv.size() * ny);
            IndexBox b;
            b.dim = 2;
            for (std::size_t j = 0; j < yiv.size(); ++j) {
                double len = yiv[j].second - yiv[j].first;
                b.lo[1] = yiv[j].first;
                b.hi[1] = yiv[j].second;
                double* row = colmean.data() + j * nx;
                for (int x = 0; x < nx; ++x) {
                    b.lo[0] = x;
                    b.hi[0] = x + 1;
                    row[x] = t.sum.box_sum(b) / len;
                }
            }
            for (std::size_t i = 0; i < xiv.size(); ++i) {
                double len = xiv[i].second - xiv[i].first;
                b.lo[0] = xiv[i].first;
                b.hi[0] = xiv[i].second;
                double* row = rowmean.data() + i * ny;
                for (int y = 0; y < ny; ++y) {
                    b.lo[1] = y;
                    b.hi[1] = y + 1;
                    row[y] = t.sum.box_sum(b) / len;
                }
            }
        }
        if (need_min) {
            colmin.resize(yiv.size() * nx);
            rowmin.resize(xiv.size() * ny);
            IndexBox b;
            b.dim = 2;
            for (std::size_t j = 0; j < yiv.size(); ++j) {
                b.lo[1] = yiv[j].first;
                b.hi[1] = yiv[j].second;
                double* row = colmin.data() + j * nx;
                for (int x = 0; x < nx; ++x) {
                    b.lo[0] = x;
                    b.hi[0] = x + 1;
                    row[x] = t.mins.box_min(b);
                }
            }
            for (std::size_t i = 0; i < xiv.size(); ++i) {
                b.lo[0] = xiv[i].first;
                b.hi[0] = xiv[i].second;
                double* row = rowmin.data() + i * ny;
                for (int y = 0; y < ny; ++y) {
                    b.lo[1] = y;
                    b.hi[1] = y + 1;
                    row[y] = t.mins.box_min(b);
                }
            }
        }
    }

private:
    static void materialise(const Basis& child, std::vector<std::pair<int, int>>& out) {
        out.resize(child.size());
        Shape s;
        for (std::int64_t i = 0; i < child.size(); ++i) {
            child.shape_at(i, s);
            out[i] = {s.box.lo[0], s.box.hi[0]};
        }
    }
};

enum class RecKind { bmo, blo, blo_naive };

/// stat over one product shape (xi, yj) off the 2D tables
inline double rec_stat_2d(RecKind which, const GridFunction& f, const Tables& t,
                          const RecTables2D& rt, std::int64_t xi, std::int64_t yj) {
    auto [x0, x1] = rt.xiv[xi];
    auto [y0, y1] = rt.yiv[yj];
    const double* v = f.data();
    std::int64_t stride = f.shell().stride[1];
    double cells = double(x1 - x0) * double(y1 - y0);
    IndexBox box;
    box.dim = 2;
    box.lo = {x0, y0};
    box.hi = {x1, y1};
    double acc = 0.0;
    switch (which) {
        case RecKind::bmo: {
            double m = t.sum.box_sum(box) / cells;
            const double* A = rt.colmean.data() + yj * rt.nx;
            const double* B = rt.rowmean.data() + xi * rt.ny;
            for (int y = y0; y < y1; ++y) {
                const double* run = v + y * stride;
                double c = B[y] - m;
                double local = 0.0;
                for (int x = x0; x < x1; ++x) local += std::abs(run[x] - A[x] - c);
                acc += local;
            }
            return acc / cells;
        }
        case RecKind::blo: {
            const double* A = rt.colmin.data() + yj * rt.nx;
            const double* B = rt.rowmin.data() + xi * rt.ny;
            double mini = 0.0;
            for (int y = y0; y < y1; ++y) {
                const double* run = v + y * stride;
                double b = B[y];
                double local = 0.0;
                for (int x = x0; x < x1; ++x) {
                    double d = run[x] - std::max(A[x], b);
                    mini = std::min(mini, d);
                    local += d;
                }
                acc += local;
            }
            if (mini < -1e-12)
                throw Error("rec_blo: integrand dipped below -1e-12; slice minima are inconsistent");
            return acc / cells;
        }
        case RecKind::blo_naive: {
            double gmin = t.mins.box_min(box);
            const double* A = rt.colmin.data() + yj * rt.nx;
            const double* B = rt.rowmin.data() + xi * rt.ny;
            for (int y = y0; y < y1; ++y) {
                const double* run = v + y * stride;
                double c = B[y] - gmin;
                double local = 0.0;
                for (int x = x0; x < x1; ++x) local += std::abs(run[x] - A[x] - c);
                acc += local;
            }
            return acc / cells;
        }
    }
    return acc;
}

template <class Stat>
OscReport rec_norm(const GridFunction& f, const Basis& product, const char* kind, int threads,
                   Stat&& stat, const Tables& tables, RecKind which) {
    if (!product.is_product())
        throw ConfigError("rectangular norms need a product basis (or rectangles with a split)");
    if (!f.shell().same_geometry(product.shell()))
        throw ConfigError("norm: basis compiled for another grid");
    guard_enumeration(product, true);
    StopWatch watch;
    threads = resolve_threads(threads);
    std::int64_t M = product.size();
    std::vector<MaxWitness> best(std::max(1, threads));

    if (RecTables2D::eligible(f, product)) {
        bool need_mean = which == RecKind::bmo;
        bool need_min = which != RecKind::bmo;
        RecTables2D rt(f, product, tables, need_mean, need_min);
        std::int64_t ny = product.factor(1).size();
        parallel_chunks(M, threads, [&](int t, std::int64_t b, std::int64_t e) {
            for (std::int64_t i = b; i < e; ++i)
                best[t].offer(rec_stat_2d(which, f, tables, rt, i / ny, i % ny), i);
        });
    } else {
        parallel_chunks(M, threads, [&](int t, std::int64_t b, std::int64_t e) {
            StatEngine engine(tables);
            Shape whole;
            std::vector<Shape> parts;
            for (std::int64_t i = b; i < e; ++i) {
                product.product_at(i, whole, parts);
                best[t].offer(stat(engine, whole, parts), i);
            }
        });
    }
    MaxWitness w;
    for (const auto& part : best) w.merge(part);

    OscReport r;
    r.kind = kind;
    r.value = w.value;
    r.argmax_index = w.index;
    product.product_at(w.index, r.argmax, r.argmax_factors);
    r.basis_json = product.spec().to_json();
    r.split.assign(product.split().parts.begin(), product.split().parts.end());
    fill_report_meta(r, f.shell());
    r.runtime_ms = watch.ms();
    return r;
}

}  // namespace detail

inline OscReport rec_bmo_norm(const GridFunction& f, const Basis& product, int threads = 0) {
    if (product.split().k() != 2)
        throw ConfigError("rectangular mean oscillation is defined for two factors (k = 2)");
    Tables tables(f, false, false);
    OscReport r = detail::rec_norm(
        f, product, "rec_bmo", threads,
        [&](StatEngine& e, const Shape& whole, const std::vector<Shape>& parts) {
            return e.rec_bmo(whole, parts, product.split());
        },
        tables, detail::RecKind::bmo);
    detail::check_argmax(r.value,
                         direct_check::rec_bmo_stat(f, r.argmax, r.argmax_factors, product.split()),
                         "rec_bmo_norm");
    return r;
}

inline OscReport rec_blo_norm(const GridFunction& f, const Basis& product, int threads = 0) {
    if (product.split().k() < 2) throw ConfigError("rectangular lower oscillation needs k >= 2");
    Tables tables(f, false, true);
    double worst_neg = 0.0;
    OscReport r = detail::rec_norm(
        f, product, "rec_blo", threads,
        [&](StatEngine& e, const Shape& whole, const std::vector<Shape>& parts) {
            double mini = 0.0;
            double v = e.rec_blo(whole, parts, product.split(), &mini);
            if (mini < -1e-12)
                throw Error("rec_blo: integrand dipped below -1e-12; slice minima are inconsistent");
            worst_neg = std::min(worst_neg, mini);
            return v;
        },
        tables, detail::RecKind::blo);
    detail::check_argmax(r.value,
                         direct_check::rec_blo_stat(f, r.argmax, r.argmax_factors, product.split()),
                         "rec_blo_norm");
    return r;
}

inline OscReport rec_blo_naive_norm(const GridFunction& f, const Basis& product, int threads = 0) {
    if (product.split().k() != 2)
        throw ConfigError("naive rectangular lower oscillation is defined for k = 2");
    Tables tables(f, false, true);
    OscReport r = detail::rec_norm(
        f, product, "rec_blo_naive", threads,
        [&](StatEngine& e, const Shape& whole, const std::vector<Shape>& parts) {
            return e.rec_blo_naive(whole, parts, product.split());
        },
        tables, detail::RecKind::blo_naive);
    detail::check_argmax(
        r.value, direct_check::rec_blo_naive_stat(f, r.argmax, r.argmax_factors, product.split()),
        "rec_blo_naive_norm");
    return r;
}

/// Convenience: product basis from per-factor specs.
inline BasisSpec product_spec(const std::vector<BasisSpec>& factors, const std::vector<int>& split) {
    BasisSpec s;
    s.kind = BasisKind::product;
    s.factors = factors;
    s.split = split;
    return s;
}

/// Intervals-per-factor product over a split; the discrete stand-in for
/// rectangles decomposed along that split.
inline BasisSpec intervals_product_spec(const std::vector<int>& split,
                                        Granularity g = Granularity::full, int stride = 1) {
    BasisSpec iv;
    iv.kind = BasisKind::intervals;
    iv.granularity = g;
    iv.stride = stride;
    std::vector<BasisSpec> factors;
    for (std::size_t i = 0; i < split.size(); ++i) {
        BasisSpec f = iv;
        if (split[i] > 1) f.kind = BasisKind::rectangles;
        factors.push_back(f);
    }
    return product_spec(factors, split);
}

}  // namespace osc
