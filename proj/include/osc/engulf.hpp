#pragma once

// Engulfing geometry: the concentric-double association rule, the
// ball construction that engulfs an escaping shape with radius
// max(2R, 3r), and the checker that measures empirical doubling and
// engulfing constants over enumerated shape pairs. Rectangles have no
// finite engulfing constant; the checker reports the blow-up instead
// of hiding it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "osc/basis.hpp"
#include "osc/rng.hpp"

namespace osc {

inline bool shape_covers(const Shape& big, const Shape& small, const GridShell& g) {
    if (big.is_box()) {
        if (small.is_box()) return big.box.contains(small.box);
        bool all = true;
        for_each_span(small, g, [&](const AxisInts& row, int x0, int x1, std::int64_t) {
            if (!all) return;
            if (x0 < big.box.lo[0] || x1 > big.box.hi[0]) {
                all = false;
                return;
            }
            for (int a = 1; a < g.dim; ++a)
                if (row[a] < big.box.lo[a] || row[a] >= big.box.hi[a]) {
                    all = false;
                    return;
                }
        });
        return all;
    }
    bool all = true;
    for_each_span(small, g, [&](const AxisInts& row, int x0, int x1, std::int64_t) {
        if (!all) return;
        AxisInts idx = row;
        for (int x = x0; x < x1; ++x) {
            idx[0] = x;
            if (!shape_member(big, g, idx)) {
                all = false;
                return;
            }
        }
    });
    return all;
}

inline bool shapes_intersect(const Shape& a, const Shape& b, const GridShell& g) {
    if (!a.box.intersects(b.box)) return false;
    if (a.is_box() && b.is_box()) return true;
    bool hit = false;
    for_each_span(a, g, [&](const AxisInts& row, int x0, int x1, std::int64_t) {
        if (hit) return;
        AxisInts idx = row;
        for (int x = x0; x < x1; ++x) {
            idx[0] = x;
            if (shape_member(b, g, idx)) {
                hit = true;
                return;
            }
        }
    });
    return hit;
}

/// The public doubling operation: defined only for bases whose kinds carry
/// an engulfing structure (intervals, cubes, centered_cubes, p_balls).
inline Shape associate_double(const Shape& s, const Basis& basis) {
    if (!basis.engulfing_capable())
        throw ConfigError("doubling is not defined for basis kind '" +
                          to_string(basis.spec().kind) + "'");
    return basis.double_of(s);
}

namespace detail {

inline double pnorm_dist(const double* a, const double* b, int n, double p) {
    if (std::isinf(p)) {
        double m = 0;
        for (int i = 0; i < n; ++i) m = std::max(m, std::abs(a[i] - b[i]));
        return m;
    }
    double s = 0;
    for (int i = 0; i < n; ++i) s += pdist_term(a[i] - b[i], p);
    return p == 1.0 ? s : (p == 2.0 ? std::sqrt(s) : std::pow(s, 1.0 / p));
}

/// Largest p-distance from `pt` to any cell center of `box` (attained at a
/// per-axis extreme, so only the farther end per axis matters).
inline double max_corner_dist(const AxisReals& pt, const IndexBox& box, const GridShell& g,
                              double p) {
    double far_pt[kMaxDim];
    for (int a = 0; a < g.dim; ++a) {
        double lo_c = g.center(a, box.lo[a]);
        double hi_c = g.center(a, box.hi[a] - 1);
        far_pt[a] = std::abs(lo_c - pt[a]) > std::abs(hi_c - pt[a]) ? lo_c : hi_c;
    }
    return pnorm_dist(far_pt, pt.data(), g.dim, p);
}

inline Shape smallest_cover_boxes(const Basis& basis, const IndexBox& hull, bool& ok);

}  // namespace detail

/// Smallest-measure basis member covering both shapes; near the boundary
/// clipped members are admitted (clipping only shrinks them, so reported
/// engulfing ratios stay honest). Ball candidates are centered on cells of
/// a ∩ b, following the ball construction. Returns false when the basis
/// has no covering member.
inline bool smallest_cover(const Basis& basis, const Shape& a, const Shape& b, Shape& out) {
    const GridShell& g = basis.shell();
    const BasisSpec& spec = basis.spec();
    IndexBox hull = a.box.hull(b.box);
    bool ok = true;
    switch (spec.kind) {
        case BasisKind::intervals:
        case BasisKind::rectangles:
        case BasisKind::cubes:
        case BasisKind::centered_cubes: {
            out = detail::smallest_cover_boxes(basis, hull, ok);
            return ok;
        }
        case BasisKind::p_balls: {
            // candidate centers: cells of a that also lie in b
            std::vector<AxisReals> anchors;
            for_each_span(a, g, [&](const AxisInts& row, int x0, int x1, std::int64_t) {
                if (anchors.size() >= 128) return;
                AxisInts idx = row;
                for (int x = x0; x < x1 && anchors.size() < 128; ++x) {
                    idx[0] = x;
                    if (!shape_member(b, g, idx)) continue;
                    AxisReals pt{};
                    for (int ax = 0; ax < g.dim; ++ax) pt[ax] = g.center(ax, idx[ax]);
                    anchors.push_back(pt);
                }
            });
            if (anchors.empty()) return false;
            bool found = false;
            for (const AxisReals& c : anchors) {
                double need = std::max(detail::max_corner_dist(c, a.box, g, spec.p),
                                       detail::max_corner_dist(c, b.box, g, spec.p));
                int m = basis.next_ball_level(need);
                if (m < 0) continue;
                Shape cand = basis.make_ball(m, c, true);
                if (!found || cand.cells < out.cells) {
                    out = cand;
                    found = true;
                }
            }
            return found;
        }
        case BasisKind::cylinders:
        case BasisKind::product: {
            std::vector<Shape> pa(basis.factor_count()), pb(basis.factor_count());
            Shape sa = a, sb = b;
            // factor the two shapes along the product split
            const FactorSplit& split = basis.split();
            for (int i = 0; i < split.k(); ++i) {
                pa[i].balls.clear();
                pb[i].balls.clear();
            }
            auto split_one = [&](const Shape& s, std::vector<Shape>& parts) -> bool {
                for (int i = 0; i < split.k(); ++i) {
                    parts[i].box.dim = split.parts[i];
                    parts[i].balls.clear();
                    for (int ax = 0; ax < split.parts[i]; ++ax) {
                        parts[i].box.lo[ax] = s.box.lo[split.offsets[i] + ax];
                        parts[i].box.hi[ax] = s.box.hi[split.offsets[i] + ax];
                    }
                }
                for (const BallPart& bp : s.balls) {
                    bool placed = false;
                    for (int i = 0; i < split.k(); ++i)
                        if (bp.axis0 == split.offsets[i] && bp.ndim == split.parts[i]) {
                            BallPart local = bp;
                            local.axis0 = 0;
                            parts[i].balls.push_back(local);
                            placed = true;
                            break;
                        }
                    if (!placed) return false;
                }
                for (int i = 0; i < split.k(); ++i)
                    parts[i].cells = count_cells(parts[i], basis.factor(i).shell());
                return true;
            };
            if (!split_one(sa, pa) || !split_one(sb, pb)) return false;
            out.balls.clear();
            out.box.dim = g.dim;
            out.cells = 1;
            for (int i = 0; i < split.k(); ++i) {
                Shape part_cover;
                if (!smallest_cover(basis.factor(i), pa[i], pb[i], part_cover)) return false;
                for (int ax = 0; ax < split.parts[i]; ++ax) {
                    out.box.lo[split.offsets[i] + ax] = part_cover.box.lo[ax];
                    out.box.hi[split.offsets[i] + ax] = part_cover.box.hi[ax];
                }
                for (BallPart bp : part_cover.balls) {
                    bp.axis0 += split.offsets[i];
                    out.balls.push_back(bp);
                }
                out.cells *= part_cover.cells;
            }
            return true;
        }
    }
    return false;
}

namespace detail {

inline Shape smallest_cover_boxes(const Basis& basis, const IndexBox& hull, bool& ok) {
    const GridShell& g = basis.shell();
    const BasisSpec& spec = basis.spec();
    Shape out;
    out.box.dim = g.dim;
    ok = true;
    switch (spec.kind) {
        case BasisKind::intervals:
        case BasisKind::rectangles: {
            for (int a = 0; a < g.dim; ++a) {
                int lo = hull.lo[a], hi = hull.hi[a];
                int n = g.res[a];
                switch (spec.granularity) {
                    case Granularity::full: break;
                    case Granularity::dyadic: {
                        int k = 0;
                        while ((1 << k) < hi - lo) ++k;
                        for (;; ++k) {
                            if ((1 << k) > n) {
                                ok = false;
                                break;
                            }
                            int blo = (lo >> k) << k;
                            if (blo + (1 << k) >= hi && blo + (1 << k) <= n) {
                                lo = blo;
                                hi = blo + (1 << k);
                                break;
                            }
                        }
                        break;
                    }
                    case Granularity::stride: {
                        int s = spec.stride;
                        lo = (lo / s) * s;
                        if (hi % s != 0 && hi != n) hi = std::min(n, (hi / s + 1) * s);
                        break;
                    }
                }
                if (!ok) return out;
                out.box.lo[a] = lo;
                out.box.hi[a] = hi;
            }
            out.cells = out.box.cells();
            return out;
        }
        case BasisKind::cubes: {
            int need = 0;
            for (int a = 0; a < g.dim; ++a) need = std::max(need, hull.extent(a));
            int size = std::max(need, spec.min_cells);
            while (!basis.cube_size_valid(size)) {
                ++size;
                int nmin = g.res[0];
                for (int a = 1; a < g.dim; ++a) nmin = std::min(nmin, g.res[a]);
                if (size > nmin) {
                    ok = false;
                    return out;
                }
            }
            if (spec.granularity == Granularity::dyadic) {
                // need one aligned block per axis at a common level
                int k = 0;
                while ((1 << k) < size) ++k;
                for (;; ++k) {
                    if (!basis.cube_size_valid(1 << k)) {
                        ok = false;
                        return out;
                    }
                    bool fits = true;
                    for (int a = 0; a < g.dim; ++a) {
                        int blo = (hull.lo[a] >> k) << k;
                        if (blo + (1 << k) < hull.hi[a] || blo + (1 << k) > g.res[a]) fits = false;
                    }
                    if (fits) {
                        for (int a = 0; a < g.dim; ++a) {
                            out.box.lo[a] = (hull.lo[a] >> k) << k;
                            out.box.hi[a] = out.box.lo[a] + (1 << k);
                        }
                        out.cells = out.box.cells();
                        return out;
                    }
                }
            }
            // full/stride: choose per axis the overhang that leaves the
            // fewest cells inside the grid; clipped candidates are valid.
            for (int a = 0; a < g.dim; ++a) {
                int lo_over = std::max(0, hull.hi[a] - size);       // stick out left
                int hi_over = std::min(g.res[a], hull.lo[a] + size);  // stick out right
                int left_extent = hull.hi[a] - lo_over;
                int right_extent = hi_over - hull.lo[a];
                if (spec.granularity == Granularity::stride) {
                    int s = spec.stride;
                    int pos = (hull.lo[a] / s) * s;
                    while (pos + size < hull.hi[a]) pos += s;
                    out.box.lo[a] = std::max(0, pos);
                    out.box.hi[a] = std::min(g.res[a], pos + size);
                } else if (left_extent <= right_extent) {
                    out.box.lo[a] = lo_over;
                    out.box.hi[a] = hull.hi[a];
                } else {
                    out.box.lo[a] = hull.lo[a];
                    out.box.hi[a] = hi_over;
                }
            }
            out.cells = out.box.cells();
            return out;
        }
        case BasisKind::centered_cubes: {
            int half = 1;
            for (int a = 0; a < g.dim; ++a) {
                int o = basis.center_index(a);
                half = std::max({half, o - hull.lo[a], hull.hi[a] - o});
            }
            while (!basis.centered_size_valid(half)) {
                ++half;
                if (half > 2 * *std::max_element(g.res.begin(), g.res.begin() + g.dim)) {
                    ok = false;
                    return out;
                }
            }
            for (int a = 0; a < g.dim; ++a) {
                int o = basis.center_index(a);
                out.box.lo[a] = std::max(0, o - half);
                out.box.hi[a] = std::min(g.res[a], o + half);
            }
            out.cells = out.box.cells();
            return out;
        }
        default: ok = false; return out;
    }
}

}  // namespace detail

struct EngulfResult {
    Shape cover;
    double cell_ratio = 0.0;    // |cover| / |T| in cells
    double radius_ratio = 0.0;  // construction radius over T's (balls only)
};

/// The engulfing construction: given S and T with S ∩ T nonempty and T not
/// inside the doubled S, produce a basis member containing both the doubled
/// S and T. Balls place the center on a shared cell and use the smallest
/// lattice radius that reaches every corner; boxes use the concentric
/// analogue around a shared cell.
inline EngulfResult engulf(const Shape& s, const Shape& t, const Basis& basis) {
    if (!basis.engulfing_capable())
        throw ConfigError("engulfing is not defined for basis kind '" +
                          to_string(basis.spec().kind) + "'");
    const GridShell& g = basis.shell();
    Shape st = basis.double_of(s);
    if (!shapes_intersect(s, t, g)) throw Error("engulf: S and T do not intersect");
    if (shape_covers(st, t, g)) throw Error("engulf: T lies inside the doubled S");

    EngulfResult r;
    if (basis.spec().kind == BasisKind::p_balls) {
        const BallPart& bs = s.balls.at(0);
        const BallPart& bt = t.balls.at(0);
        double d = detail::pnorm_dist(bs.center.data(), bt.center.data(), g.dim, basis.spec().p);
        double tau = 0.0;
        if (d > 0) {
            double lo = std::max(0.0, 1.0 - bt.radius / d);
            double hi = std::min(1.0, bs.radius / d);
            tau = 0.5 * (lo + hi);
        }
        AxisReals q{};
        AxisInts qi{};
        for (int a = 0; a < g.dim; ++a) {
            q[a] = bs.center[a] + tau * (bt.center[a] - bs.center[a]);
            int ci = static_cast<int>(std::llround((q[a] - g.domain.lo[a]) / g.step[a] - 0.5));
            qi[a] = std::clamp(ci, 0, g.res[a] - 1);
            q[a] = g.center(a, qi[a]);
        }
        double need = std::max(detail::max_corner_dist(q, st.box, g, basis.spec().p),
                               detail::max_corner_dist(q, t.box, g, basis.spec().p));
        int m = basis.next_ball_level(need);
        if (m < 0) throw Error("engulf: no lattice radius reaches the union");
        r.cover = basis.make_ball(m, q, true);
        r.radius_ratio = r.cover.balls[0].radius / bt.radius;
    } else {
        // anchor cell: center of the overlap box
        IndexBox overlap = s.box.intersection(t.box);
        AxisInts q{};
        for (int a = 0; a < g.dim; ++a) q[a] = (overlap.lo[a] + overlap.hi[a] - 1) / 2;
        IndexBox hull = st.box.hull(t.box);
        bool concentric = (basis.spec().kind == BasisKind::cubes ||
                           basis.spec().kind == BasisKind::intervals) &&
                          basis.spec().granularity == Granularity::full;
        if (concentric) {
            int half = 0;
            for (int a = 0; a < g.dim; ++a)
                half = std::max({half, q[a] - hull.lo[a], hull.hi[a] - q[a] - 1});
            Shape cand;
            cand.box.dim = g.dim;
            for (int a = 0; a < g.dim; ++a) {
                cand.box.lo[a] = std::max(0, q[a] - half);
                cand.box.hi[a] = std::min(g.res[a], q[a] + half + 1);
            }
            cand.cells = cand.box.cells();
            r.cover = cand;
        } else {
            bool ok = true;
            r.cover = detail::smallest_cover_boxes(basis, hull, ok);
            if (!ok) throw Error("engulf: basis has no member covering the union");
        }
    }
    if (!shape_covers(r.cover, st, g) || !shape_covers(r.cover, t, g))
        throw Error("engulf: construction failed to cover the union");
    r.cell_ratio = static_cast<double>(r.cover.cells) / static_cast<double>(t.cells);
    return r;
}

struct EngulfReport {
    bool passed = false;
    double c_d_emp = 0.0;
    double c_e_emp = 0.0;
    double cap_d = 0.0;
    double cap_e = 0.0;
    std::int64_t shapes = 0;
    std::int64_t pairs_total = 0;
    std::int64_t pairs_checked = 0;
    std::int64_t pairs_qualifying = 0;
    bool sampled = false;
    std::uint64_t seed = 0;
    bool cover_missing = false;
    bool has_witness = false;
    Shape witness_s, witness_t, witness_cover;
    double witness_ratio = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["passed"] = passed;
        j["c_d_emp"] = c_d_emp;
        j["c_e_emp"] = c_e_emp;
        j["cap_d"] = cap_d;
        j["cap_e"] = cap_e;
        j["shapes"] = shapes;
        j["pairs_total"] = pairs_total;
        j["pairs_checked"] = pairs_checked;
        j["pairs_qualifying"] = pairs_qualifying;
        j["sampled"] = sampled;
        j["seed"] = seed;
        j["cover_missing"] = cover_missing;
        if (has_witness) {
            j["witness"] = {{"s", shape_to_json(witness_s)},
                            {"t", shape_to_json(witness_t)},
                            {"cover", shape_to_json(witness_cover)},
                            {"ratio", witness_ratio}};
        }
        return j;
    }
};

/// Measures empirical engulfing constants. All ordered pairs (S, T) are
/// examined when their count fits the budget; otherwise pairs are sampled
/// uniformly with the recorded seed. A pair qualifies when S ∩ T is
/// nonempty and T escapes the doubled S; for each qualifying pair the
/// smallest covering member is found and the worst ratio kept.
inline EngulfReport check_engulfing(const Basis& basis, std::int64_t budget = 200000000,
                                    double cap_d = 0.0, double cap_e = 0.0,
                                    std::uint64_t seed = 20240901) {
    const GridShell& g = basis.shell();
    int n = g.dim;
    EngulfReport rep;
    rep.cap_d = cap_d > 0 ? cap_d : std::pow(2.0, n);
    rep.cap_e = cap_e > 0 ? cap_e : std::pow(6.0, n);
    rep.seed = seed;
    rep.shapes = basis.size();
    std::int64_t M = basis.size();
    rep.pairs_total = M * M;
    rep.sampled = rep.pairs_total > budget || M > budget;
    // "up to budget": sampling caps at a million draws regardless
    std::int64_t sample_draws = std::min<std::int64_t>(budget, 1000000);

    Rng rng(seed);

    // doubling constant
    {
        std::int64_t draws = rep.sampled ? std::min(M, sample_draws) : M;
        Shape s;
        for (std::int64_t k = 0; k < draws; ++k) {
            std::int64_t i = rep.sampled ? rng.next_below(M) : k;
            basis.shape_at(i, s);
            Shape d = basis.double_of(s);
            rep.c_d_emp = std::max(rep.c_d_emp,
                                   static_cast<double>(d.cells) / static_cast<double>(s.cells));
        }
    }

    bool pure_box = true;
    {
        Shape probe = basis.shape_at(0);
        pure_box = probe.is_box();
    }
    const BasisSpec& spec = basis.spec();
    bool rect_full = (spec.kind == BasisKind::rectangles || spec.kind == BasisKind::intervals) &&
                     spec.granularity == Granularity::full;
    bool cube_full = spec.kind == BasisKind::cubes && spec.granularity == Granularity::full;

    auto consider_pair = [&](const Shape& s, const Shape& dbl, const Shape& t,
                             std::int64_t si, std::int64_t ti) {
        ++rep.pairs_checked;
        if (!shapes_intersect(s, t, g)) return;
        if (shape_covers(dbl, t, g)) return;
        ++rep.pairs_qualifying;
        Shape cover;
        bool found;
        if (rect_full) {
            cover.balls.clear();
            cover.box = dbl.box.hull(t.box);
            cover.cells = cover.box.cells();
            found = true;
        } else {
            found = smallest_cover(basis, dbl, t, cover);
        }
        if (!found) {
            rep.cover_missing = true;
            if (!rep.has_witness || !std::isinf(rep.witness_ratio)) {
                rep.has_witness = true;
                rep.witness_s = s;
                rep.witness_t = t;
                rep.witness_cover = Shape{};
                rep.witness_ratio = std::numeric_limits<double>::infinity();
            }
            return;
        }
        double ratio = static_cast<double>(cover.cells) / static_cast<double>(t.cells);
        if (ratio > rep.c_e_emp) {
            rep.c_e_emp = ratio;
            rep.has_witness = true;
            rep.witness_s = s;
            rep.witness_t = t;
            rep.witness_cover = cover;
            rep.witness_ratio = ratio;
        }
        (void)si;
        (void)ti;
    };

    if (!rep.sampled && pure_box && M <= 400000) {
        // materialised SoA pass: cheap qualify test, closed-form covers for
        // the two common full-granularity box bases
        std::vector<std::array<int, 2>> tb0(M), tb1(M), db0(M), db1(M);
        std::vector<std::int64_t> tcells(M);
        std::vector<IndexBox> boxes(M), dboxes(M);
        Shape s;
        for (std::int64_t i = 0; i < M; ++i) {
            basis.shape_at(i, s);
            boxes[i] = s.box;
            tcells[i] = s.cells;
            Shape d = basis.double_of(s);
            dboxes[i] = d.box;
            tb0[i] = {s.box.lo[0], s.box.hi[0]};
            tb1[i] = {n > 1 ? s.box.lo[1] : 0, n > 1 ? s.box.hi[1] : 1};
            db0[i] = {d.box.lo[0], d.box.hi[0]};
            db1[i] = {n > 1 ? d.box.lo[1] : 0, n > 1 ? d.box.hi[1] : 1};
        }
        Shape cover;
        cover.box.dim = n;
        for (std::int64_t i = 0; i < M; ++i) {
            const IndexBox& sb = boxes[i];
            const IndexBox& db = dboxes[i];
            bool simple = n <= 2 && (rect_full || cube_full) && spec.min_cells == 1;
            for (std::int64_t j = 0; j < M; ++j) {
                if (simple) {
                    // overlap and escape tests straight off the arrays
                    if (tb0[j][0] >= sb.hi[0] || tb0[j][1] <= sb.lo[0]) { ++rep.pairs_checked; continue; }
                    if (n > 1 && (tb1[j][0] >= sb.hi[1] || tb1[j][1] <= sb.lo[1])) { ++rep.pairs_checked; continue; }
                    bool inside = tb0[j][0] >= db0[i][0] && tb0[j][1] <= db0[i][1] &&
                                  (n == 1 || (tb1[j][0] >= db1[i][0] && tb1[j][1] <= db1[i][1]));
                    ++rep.pairs_checked;
                    if (inside) continue;
                    ++rep.pairs_qualifying;
                    double ratio;
                    IndexBox hull = db.hull(boxes[j]);
                    if (rect_full) {
                        cover.box = hull;
                        cover.cells = hull.cells();
                    } else {
                        int size = 0;
                        for (int a = 0; a < n; ++a) size = std::max(size, hull.extent(a));
                        std::int64_t cells = 1;
                        for (int a = 0; a < n; ++a) {
                            int left = hull.hi[a] - std::max(0, hull.hi[a] - size);
                            int right = std::min(g.res[a], hull.lo[a] + size) - hull.lo[a];
                            int ext = std::min(left, right);
                            cells *= ext;
                            if (left <= right) {
                                cover.box.lo[a] = std::max(0, hull.hi[a] - size);
                                cover.box.hi[a] = hull.hi[a];
                            } else {
                                cover.box.lo[a] = hull.lo[a];
                                cover.box.hi[a] = std::min(g.res[a], hull.lo[a] + size);
                            }
                        }
                        cover.cells = cells;
                    }
                    ratio = static_cast<double>(cover.cells) / static_cast<double>(tcells[j]);
                    if (ratio > rep.c_e_emp) {
                        rep.c_e_emp = ratio;
                        rep.has_witness = true;
                        rep.witness_s = Shape::of_box(boxes[i]);
                        rep.witness_t = Shape::of_box(boxes[j]);
                        rep.witness_cover = cover;
                        rep.witness_ratio = ratio;
                    }
                } else {
                    Shape si = Shape::of_box(boxes[i]);
                    Shape dd = Shape::of_box(dboxes[i]);
                    Shape tj = Shape::of_box(boxes[j]);
                    consider_pair(si, dd, tj, i, j);
                }
            }
        }
    } else if (!rep.sampled) {
        Shape s, t;
        for (std::int64_t i = 0; i < M; ++i) {
            basis.shape_at(i, s);
            Shape dbl = basis.double_of(s);
            for (std::int64_t j = 0; j < M; ++j) {
                basis.shape_at(j, t);
                consider_pair(s, dbl, t, i, j);
            }
        }
    } else {
        Shape s, t;
        for (std::int64_t k = 0; k < sample_draws; ++k) {
            std::int64_t i = rng.next_below(M);
            std::int64_t j = rng.next_below(M);
            basis.shape_at(i, s);
            basis.shape_at(j, t);
            Shape dbl = basis.double_of(s);
            consider_pair(s, dbl, t, i, j);
        }
    }

    rep.passed = !rep.cover_missing && rep.c_d_emp <= rep.cap_d + 1e-9 &&
                 rep.c_e_emp <= rep.cap_e + 1e-9;
    return rep;
}

/// The rectangle blow-up family: S = [0,1] x [0,H] against its transpose
/// on an [0,H]^2 window. The smallest rectangle containing the doubled S
/// and T has measure >= H * |T|, so the ratios grow without bound.
inline std::vector<double> rectangle_blowup_ratios(const std::vector<int>& hs, int res_per_unit = 8) {
    std::vector<double> ratios;
    for (int H : hs) {
        if (H < 2) throw ConfigError("witness family needs H >= 2");
        int N = res_per_unit * H;
        GridShell shell(Box{{0.0, 0.0}, {double(H), double(H)}}, {N, N});
        Basis basis = Basis::compile(BasisSpec::parse("rectangles"), shell);
        Shape s;
        s.box.dim = 2;
        s.box.lo = {0, 0};
        s.box.hi = {res_per_unit, N};
        s.cells = s.box.cells();
        Shape t;
        t.box.dim = 2;
        t.box.lo = {0, 0};
        t.box.hi = {N, res_per_unit};
        t.cells = t.box.cells();
        Shape dbl = basis.double_of(s);
        Shape cover;
        if (!smallest_cover(basis, dbl, t, cover)) throw Error("witness: no rectangle cover found");
        ratios.push_back(static_cast<double>(cover.cells) / static_cast<double>(t.cells));
    }
    return ratios;
}

}  // namespace osc
