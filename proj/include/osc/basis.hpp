#pragma once

// Declarative shape bases and their discretised enumeration on a grid:
// intervals, cubes, origin-centered cubes, rectangles, p-balls, cylinders,
// and products of lower-dimensional bases. Shapes are either index boxes
// or masked (a box bounding one or more p-ball constraints). One-cell-thick
// shapes are deliberately part of every discrete basis: they stand in for
// a differentiation basis, which makes the discrete product-decomposition
// inequalities exact.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "osc/grid.hpp"

namespace osc {

enum class BasisKind { intervals, cubes, centered_cubes, rectangles, p_balls, cylinders, product };
enum class Granularity { full, dyadic, stride };

inline std::string to_string(BasisKind k) {
    switch (k) {
        case BasisKind::intervals: return "intervals";
        case BasisKind::cubes: return "cubes";
        case BasisKind::centered_cubes: return "centered_cubes";
        case BasisKind::rectangles: return "rectangles";
        case BasisKind::p_balls: return "p_balls";
        case BasisKind::cylinders: return "cylinders";
        case BasisKind::product: return "product";
    }
    return "?";
}

inline std::string to_string(Granularity g) {
    switch (g) {
        case Granularity::full: return "full";
        case Granularity::dyadic: return "dyadic";
        case Granularity::stride: return "stride";
    }
    return "?";
}

struct BasisSpec {
    BasisKind kind = BasisKind::rectangles;
    Granularity granularity = Granularity::full;
    int stride = 1;
    int min_cells = 1;
    double p = 2.0;  // p_balls metric; use INFINITY for the sup metric
    std::vector<BasisSpec> factors;
    std::vector<int> split;

    static BasisSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    /// Accepts either a bare kind name ("rectangles") or inline JSON.
    static BasisSpec parse(const std::string& text);
};

inline BasisSpec BasisSpec::from_json(const nlohmann::json& j) {
    BasisSpec s;
    if (!j.contains("kind")) throw ConfigError("basis: missing \"kind\"");
    std::string k = j["kind"].get<std::string>();
    if (k == "intervals") s.kind = BasisKind::intervals;
    else if (k == "cubes") s.kind = BasisKind::cubes;
    else if (k == "centered_cubes") s.kind = BasisKind::centered_cubes;
    else if (k == "rectangles") s.kind = BasisKind::rectangles;
    else if (k == "p_balls") s.kind = BasisKind::p_balls;
    else if (k == "cylinders") s.kind = BasisKind::cylinders;
    else if (k == "product") s.kind = BasisKind::product;
    else throw ConfigError("basis: unknown kind '" + k + "'");
    if (j.contains("granularity")) {
        std::string g = j["granularity"].get<std::string>();
        if (g == "full") s.granularity = Granularity::full;
        else if (g == "dyadic") s.granularity = Granularity::dyadic;
        else if (g == "stride") s.granularity = Granularity::stride;
        else throw ConfigError("basis: unknown granularity '" + g + "'");
    }
    if (j.contains("stride")) s.stride = j["stride"].get<int>();
    if (j.contains("min_cells")) s.min_cells = j["min_cells"].get<int>();
    if (j.contains("p")) {
        if (j["p"].is_string()) {
            if (j["p"] != "inf") throw ConfigError("basis: p must be a number or \"inf\"");
            s.p = std::numeric_limits<double>::infinity();
        } else {
            s.p = j["p"].get<double>();
        }
    }
    if (j.contains("split")) s.split = j["split"].get<std::vector<int>>();
    if (j.contains("factors"))
        for (const auto& f : j["factors"]) s.factors.push_back(from_json(f));
    if (s.min_cells < 1) throw ConfigError("basis: min_cells must be >= 1");
    if (s.granularity == Granularity::stride && s.stride < 1)
        throw ConfigError("basis: stride must be >= 1");
    if (s.kind == BasisKind::p_balls && !(s.p >= 1.0))
        throw ConfigError("basis: p_balls needs p >= 1");
    return s;
}

inline nlohmann::json BasisSpec::to_json() const {
    nlohmann::json j;
    j["kind"] = to_string(kind);
    j["granularity"] = to_string(granularity);
    if (granularity == Granularity::stride) j["stride"] = stride;
    if (min_cells != 1) j["min_cells"] = min_cells;
    if (kind == BasisKind::p_balls) {
        if (std::isinf(p)) j["p"] = "inf";
        else j["p"] = p;
    }
    if (!split.empty()) j["split"] = split;
    if (!factors.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& f : factors) arr.push_back(f.to_json());
        j["factors"] = arr;
    }
    return j;
}

inline BasisSpec BasisSpec::parse(const std::string& text) {
    std::string t = text;
    t.erase(0, t.find_first_not_of(" \t"));
    if (!t.empty() && t[0] == '{') {
        try {
            return from_json(nlohmann::json::parse(t));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("basis json: ") + e.what());
        }
    }
    nlohmann::json j;
    j["kind"] = t;
    return from_json(j);
}

/// Decomposition of R^n into contiguous axis groups (n1,...,nk).
struct FactorSplit {
    std::vector<int> parts;
    std::vector<int> offsets;

    int k() const { return static_cast<int>(parts.size()); }
    int total() const { return offsets.empty() ? 0 : offsets.back() + parts.back(); }

    static FactorSplit of(std::vector<int> parts_in) {
        FactorSplit s;
        s.parts = std::move(parts_in);
        int off = 0;
        for (int p : s.parts) {
            if (p < 1) throw ConfigError("split: parts must be positive");
            s.offsets.push_back(off);
            off += p;
        }
        if (s.parts.empty()) throw ConfigError("split: empty");
        return s;
    }

    void validate_for(int dim) const {
        if (total() != dim)
            throw ConfigError("split: parts sum to " + std::to_string(total()) +
                              " but the grid has dimension " + std::to_string(dim));
    }
};

/// One p-ball constraint over a contiguous axis range. `center` is local to
/// the range: center[j] pairs with axis axis0 + j.
struct BallPart {
    int axis0 = 0;
    int ndim = 0;
    double p = 2.0;
    AxisReals center{};
    double radius = 0.0;
};

/// One member of a basis: an index box, optionally cut down by ball masks.
struct Shape {
    IndexBox box;
    std::int64_t cells = 0;
    std::vector<BallPart> balls;

    bool is_box() const { return balls.empty(); }

    static Shape of_box(const IndexBox& b) {
        Shape s;
        s.box = b;
        s.cells = b.cells();
        return s;
    }
};

namespace detail {

inline double pdist_term(double d, double p) {
    d = std::abs(d);
    if (p == 1.0) return d;
    if (p == 2.0) return d * d;
    return std::pow(d, p);
}

/// Distance accumulation for one ball at a cell, axis 0 contribution last
/// so it rounds identically to the span-walk path.
inline bool ball_member(const BallPart& b, const GridShell& g, const AxisInts& idx) {
    if (std::isinf(b.p)) {
        for (int j = 0; j < b.ndim; ++j)
            if (std::abs(g.center(b.axis0 + j, idx[b.axis0 + j]) - b.center[j]) >= b.radius)
                return false;
        return true;
    }
    double rp = pdist_term(b.radius, b.p);
    double d = 0.0;
    for (int j = 0; j < b.ndim; ++j) {
        int a = b.axis0 + j;
        if (a == 0) continue;
        d += pdist_term(g.center(a, idx[a]) - b.center[j], b.p);
    }
    if (b.axis0 == 0) d += pdist_term(g.center(0, idx[0]) - b.center[0], b.p);
    return d < rp;
}

}  // namespace detail

inline bool shape_member(const Shape& s, const GridShell& g, const AxisInts& idx) {
    for (int a = 0; a < g.dim; ++a)
        if (idx[a] < s.box.lo[a] || idx[a] >= s.box.hi[a]) return false;
    for (const BallPart& b : s.balls)
        if (!detail::ball_member(b, g, idx)) return false;
    return true;
}

/// Intersects [x0, x1) with the cells whose axis-0 centers lie in
/// (cx - w, cx + w); `inside` is the exact membership test used to absorb
/// floating rounding at the ends.
template <class Inside>
inline void clip_span(const GridShell& g, double cx, double w, Inside&& inside, int& x0, int& x1) {
    double h = g.step[0];
    double lo = g.domain.lo[0];
    int a = static_cast<int>(std::floor((cx - w - lo) / h - 0.5)) + 1;
    int b = static_cast<int>(std::ceil((cx + w - lo) / h - 0.5));
    a = std::max(a, x0);
    b = std::min(b, x1);
    while (a < b && !inside(a)) ++a;
    while (a > x0 && inside(a - 1)) --a;
    while (b > a && !inside(b - 1)) --b;
    while (b < x1 && inside(b)) ++b;
    x0 = a;
    x1 = b;
}

/// Visits the shape as contiguous axis-0 runs: f(row_index, x0, x1, base)
/// where cells [x0, x1) of the row starting at linear offset `base` belong
/// to the shape. row_index[0] is unspecified.
template <class F>
void for_each_span(const Shape& s, const GridShell& g, F&& f) {
    const IndexBox& b = s.box;
    AxisInts idx = b.lo;
    for (;;) {
        int x0 = b.lo[0], x1 = b.hi[0];
        bool live = true;
        for (const BallPart& ball : s.balls) {
            bool covers_x = ball.axis0 == 0;
            if (std::isinf(ball.p)) {
                for (int j = 0; j < ball.ndim; ++j) {
                    int a = ball.axis0 + j;
                    if (a == 0) continue;
                    if (std::abs(g.center(a, idx[a]) - ball.center[j]) >= ball.radius) {
                        live = false;
                        break;
                    }
                }
                if (!live) break;
                if (covers_x) {
                    double cx = ball.center[0];
                    double w = ball.radius;
                    auto inside = [&](int i) { return std::abs(g.center(0, i) - cx) < w; };
                    clip_span(g, cx, w, inside, x0, x1);
                }
            } else {
                double rp = detail::pdist_term(ball.radius, ball.p);
                double d = 0.0;
                for (int j = 0; j < ball.ndim; ++j) {
                    int a = ball.axis0 + j;
                    if (a == 0) continue;
                    d += detail::pdist_term(g.center(a, idx[a]) - ball.center[j], ball.p);
                }
                if (d >= rp) {
                    live = false;
                    break;
                }
                if (covers_x) {
                    double cx = ball.center[0];
                    double w;
                    double rem = rp - d;
                    if (ball.p == 1.0) w = rem;
                    else if (ball.p == 2.0) w = std::sqrt(rem);
                    else w = std::pow(rem, 1.0 / ball.p);
                    auto inside = [&](int i) {
                        return d + detail::pdist_term(g.center(0, i) - cx, ball.p) < rp;
                    };
                    clip_span(g, cx, w, inside, x0, x1);
                }
            }
            if (x0 >= x1) live = false;
            if (!live) break;
        }
        if (live && x0 < x1) {
            std::int64_t base = 0;
            for (int a = 1; a < g.dim; ++a) base += g.stride[a] * idx[a];
            f(idx, x0, x1, base);
        }
        int a = 1;
        for (; a < g.dim; ++a) {
            if (++idx[a] < b.hi[a]) break;
            idx[a] = b.lo[a];
        }
        if (a >= g.dim) break;
    }
}

inline std::int64_t count_cells(const Shape& s, const GridShell& g) {
    if (s.is_box()) return s.box.cells();
    std::int64_t n = 0;
    for_each_span(s, g, [&](const AxisInts&, int x0, int x1, std::int64_t) { n += x1 - x0; });
    return n;
}

/// A basis compiled against a grid: random-access enumeration in a fixed
/// deterministic order, membership tests, and the concentric enlargement
/// used by the engulfing machinery.
class Basis {
public:
    static Basis compile(const BasisSpec& spec, const GridShell& shell) {
        Basis b;
        b.spec_ = spec;
        b.shell_ = shell;
        b.build();
        if (b.size_ <= 0) throw ConfigError("basis enumerates no shape on this grid");
        return b;
    }

    const BasisSpec& spec() const { return spec_; }
    const GridShell& shell() const { return shell_; }
    std::int64_t size() const { return size_; }

    bool is_product() const { return !children_.empty(); }
    int factor_count() const { return static_cast<int>(children_.size()); }
    const Basis& factor(int i) const { return children_[i]; }
    const FactorSplit& split() const { return split_; }

    bool engulfing_capable() const {
        switch (spec_.kind) {
            case BasisKind::intervals:
            case BasisKind::cubes:
            case BasisKind::centered_cubes:
            case BasisKind::p_balls:
                return true;
            default:
                return false;
        }
    }

    Shape shape_at(std::int64_t idx) const {
        Shape s;
        shape_at(idx, s);
        return s;
    }

    void shape_at(std::int64_t idx, Shape& out) const {
        if (idx < 0 || idx >= size_) throw Error("basis: shape index out of range");
        out.balls.clear();
        out.box.dim = shell_.dim;
        decode(idx, out, 0);
    }

    /// Decodes a product shape together with its per-factor components
    /// (components live on the factor shells).
    void product_at(std::int64_t idx, Shape& whole, std::vector<Shape>& parts) const {
        if (!is_product()) throw Error("basis: not a product basis");
        parts.resize(children_.size());
        whole.balls.clear();
        whole.box.dim = shell_.dim;
        whole.cells = 1;
        std::int64_t rest = idx;
        for (int i = factor_count() - 1; i >= 0; --i) {
            std::int64_t ci = rest % children_[i].size();
            rest /= children_[i].size();
            children_[i].shape_at(ci, parts[i]);
            embed_factor(parts[i], split_.offsets[i], whole);
            whole.cells *= parts[i].cells;
        }
    }

    bool contains(const Shape& s) const {
        if (s.box.dim != shell_.dim || s.box.empty() || !shell_.in_bounds(s.box)) return false;
        switch (spec_.kind) {
            case BasisKind::intervals:
            case BasisKind::rectangles: {
                if (!s.is_box()) return false;
                for (int a = 0; a < shell_.dim; ++a)
                    if (!interval_valid(a, s.box.lo[a], s.box.hi[a])) return false;
                return true;
            }
            case BasisKind::cubes: {
                if (!s.is_box()) return false;
                int size = s.box.extent(0);
                for (int a = 1; a < shell_.dim; ++a)
                    if (s.box.extent(a) != size) return false;
                if (!cube_size_valid(size)) return false;
                for (int a = 0; a < shell_.dim; ++a)
                    if (!cube_pos_valid(s.box.lo[a], size)) return false;
                return true;
            }
            case BasisKind::centered_cubes: {
                if (!s.is_box()) return false;
                int half = s.box.hi[0] - center_[0];
                if (half < 1 || !centered_size_valid(half)) return false;
                for (int a = 0; a < shell_.dim; ++a)
                    if (s.box.lo[a] != center_[a] - half || s.box.hi[a] != center_[a] + half)
                        return false;
                return true;
            }
            case BasisKind::p_balls: {
                if (s.balls.size() != 1) return false;
                const BallPart& b = s.balls[0];
                if (b.axis0 != 0 || b.ndim != shell_.dim || !same_p(b.p, spec_.p)) return false;
                return ball_in_lattice(b);
            }
            case BasisKind::cylinders:
            case BasisKind::product: {
                // split the shape into factor components and delegate
                std::vector<Shape> parts(children_.size());
                if (!split_shape(s, parts)) return false;
                for (std::size_t i = 0; i < children_.size(); ++i)
                    if (!children_[i].contains(parts[i])) return false;
                return true;
            }
        }
        return false;
    }

    /// Concentric enlargement with ratio <= 2^n before boundary clipping:
    /// boxes double every extent around their center, balls double the
    /// radius (rounded down to the radius lattice, never below the
    /// original). Clipping to the grid only shrinks the result.
    Shape double_of(const Shape& s) const {
        switch (spec_.kind) {
            case BasisKind::intervals:
            case BasisKind::cubes:
            case BasisKind::rectangles: {
                Shape d;
                d.box.dim = shell_.dim;
                for (int a = 0; a < shell_.dim; ++a) {
                    int len = s.box.extent(a);
                    d.box.lo[a] = std::max(0, s.box.lo[a] - len / 2);
                    d.box.hi[a] = std::min(shell_.res[a], s.box.hi[a] + (len - len / 2));
                }
                d.cells = d.box.cells();
                return d;
            }
            case BasisKind::centered_cubes: {
                int half = s.box.hi[0] - center_[0];
                Shape d;
                d.box.dim = shell_.dim;
                for (int a = 0; a < shell_.dim; ++a) {
                    d.box.lo[a] = std::max(0, center_[a] - 2 * half);
                    d.box.hi[a] = std::min(shell_.res[a], center_[a] + 2 * half);
                }
                d.cells = d.box.cells();
                return d;
            }
            case BasisKind::p_balls: {
                const BallPart& b = s.balls.at(0);
                double h = shell_.step[0];
                int m = static_cast<int>(std::llround(b.radius / h - 0.5));
                Shape d = make_ball(2 * m, b.center, true);
                return d;
            }
            case BasisKind::cylinders:
            case BasisKind::product: {
                std::vector<Shape> parts(children_.size());
                if (!split_shape(s, parts))
                    throw Error("basis: shape does not decompose along this product");
                Shape whole;
                whole.box.dim = shell_.dim;
                whole.cells = 1;
                for (int i = 0; i < factor_count(); ++i) {
                    Shape dp = children_[i].double_of(parts[i]);
                    embed_factor(dp, split_.offsets[i], whole);
                    whole.cells *= dp.cells;
                }
                return whole;
            }
        }
        throw Error("basis: doubling not defined");
    }

    // --- lattice validity helpers (public: the engulfing checker uses them)
    bool interval_valid(int axis, int lo, int hi) const {
        int n = shell_.res[axis];
        if (lo < 0 || hi > n || hi - lo < spec_.min_cells) return false;
        int len = hi - lo;
        switch (spec_.granularity) {
            case Granularity::full: return true;
            case Granularity::dyadic: return (len & (len - 1)) == 0 && lo % len == 0;
            case Granularity::stride:
                return lo % spec_.stride == 0 && (hi % spec_.stride == 0 || hi == n);
        }
        return false;
    }

    bool cube_size_valid(int size) const {
        if (size < spec_.min_cells || size < 1) return false;
        for (int a = 0; a < shell_.dim; ++a)
            if (size > shell_.res[a]) return false;
        switch (spec_.granularity) {
            case Granularity::full: return true;
            case Granularity::dyadic: return (size & (size - 1)) == 0;
            case Granularity::stride: return size % spec_.stride == 0;
        }
        return false;
    }

    bool cube_pos_valid(int lo, int size) const {
        // clipped positions outside the grid are allowed for engulfing
        switch (spec_.granularity) {
            case Granularity::full: return true;
            case Granularity::dyadic: return ((lo % size) + size) % size == 0;
            case Granularity::stride: return ((lo % spec_.stride) + spec_.stride) % spec_.stride == 0;
        }
        return false;
    }

    bool centered_size_valid(int half) const {
        if (2 * half < spec_.min_cells || half < 1) return false;
        switch (spec_.granularity) {
            case Granularity::full: return true;
            case Granularity::dyadic: return (half & (half - 1)) == 0;
            case Granularity::stride: return half % spec_.stride == 0;
        }
        return false;
    }

    /// centered_cubes: index of the grid line the origin maps to.
    int center_index(int axis) const { return center_[axis]; }

    /// Smallest radius index m on this basis' lattice with radius strictly
    /// greater than r_need; honors granularity. Returns -1 if none exists
    /// below the compiled bound.
    int next_ball_level(double r_need) const {
        double h = shell_.step[0];
        auto ok = [&](int m) { return (m + 0.5) * h > r_need && 2 * m + 1 >= spec_.min_cells; };
        switch (spec_.granularity) {
            case Granularity::full: {
                int m = std::max(0, static_cast<int>(std::ceil(r_need / h - 0.5 - 1e-12)));
                while (!ok(m)) ++m;
                return m;
            }
            case Granularity::dyadic: {
                if (ok(0)) return 0;
                for (int k = 1; k < 30; ++k)
                    if (ok((1 << k) - 1)) return (1 << k) - 1;
                return -1;
            }
            case Granularity::stride: {
                for (int m = 0; m < (1 << 26); m += spec_.stride)
                    if (ok(m)) return m;
                return -1;
            }
        }
        return -1;
    }

    /// Ball from a radius index m (radius (m + 0.5) * h). If `allow_clip`,
    /// the bounding box is clipped to the grid; otherwise the ball must fit.
    Shape make_ball(int m, const AxisReals& center, bool allow_clip) const {
        double h = shell_.step[0];
        Shape s;
        s.box.dim = shell_.dim;
        BallPart b;
        b.axis0 = 0;
        b.ndim = shell_.dim;
        b.p = spec_.p;
        b.center = center;
        b.radius = (m + 0.5) * h;
        for (int a = 0; a < shell_.dim; ++a) {
            double c = center[a];
            int ci = static_cast<int>(std::llround((c - shell_.domain.lo[a]) / shell_.step[a] - 0.5));
            int lo = ci - m, hi = ci + m + 1;
            if (allow_clip) {
                lo = std::max(0, lo);
                hi = std::min(shell_.res[a], hi);
            } else if (lo < 0 || hi > shell_.res[a]) {
                throw Error("basis: ball does not fit inside the grid");
            }
            s.box.lo[a] = lo;
            s.box.hi[a] = hi;
        }
        s.balls.push_back(b);
        s.cells = count_cells(s, shell_);
        return s;
    }

private:
    static bool same_p(double a, double b) {
        if (std::isinf(a) || std::isinf(b)) return std::isinf(a) && std::isinf(b);
        return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b));
    }

    void require_square_cells() const {
        for (int a = 1; a < shell_.dim; ++a)
            if (std::abs(shell_.step[a] - shell_.step[0]) > 1e-12 * shell_.step[0])
                throw ConfigError("p-ball bases need square cells (equal step on every axis)");
    }

    void build() {
        switch (spec_.kind) {
            case BasisKind::intervals:
                if (shell_.dim != 1) throw ConfigError("intervals basis needs a 1-dimensional grid");
                build_rectangles();
                break;
            case BasisKind::rectangles:
                build_rectangles();
                break;
            case BasisKind::cubes:
                build_cubes();
                break;
            case BasisKind::centered_cubes:
                build_centered();
                break;
            case BasisKind::p_balls:
                build_balls();
                break;
            case BasisKind::cylinders: {
                if (shell_.dim < 2) throw ConfigError("cylinders need dimension >= 2");
                BasisSpec ball = spec_;
                ball.kind = BasisKind::p_balls;
                ball.p = 2.0;
                BasisSpec iv = spec_;
                iv.kind = BasisKind::intervals;
                spec_.factors = {ball, iv};
                spec_.split = {shell_.dim - 1, 1};
                build_product();
                break;
            }
            case BasisKind::product:
                build_product();
                break;
        }
    }

    void build_rectangles() {
        size_ = 1;
        for (int a = 0; a < shell_.dim; ++a) {
            auto& list = axis_iv_[a];
            int n = shell_.res[a];
            switch (spec_.granularity) {
                case Granularity::full:
                    for (int lo = 0; lo < n; ++lo)
                        for (int hi = lo + spec_.min_cells; hi <= n; ++hi) list.push_back({lo, hi});
                    break;
                case Granularity::dyadic:
                    for (int len = 1; len <= n; len *= 2) {
                        if (len < spec_.min_cells) continue;
                        for (int lo = 0; lo + len <= n; lo += len) list.push_back({lo, lo + len});
                    }
                    break;
                case Granularity::stride: {
                    std::vector<int> cuts;
                    for (int c = 0; c < n; c += spec_.stride) cuts.push_back(c);
                    cuts.push_back(n);
                    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
                        for (std::size_t j = i + 1; j < cuts.size(); ++j)
                            if (cuts[j] - cuts[i] >= spec_.min_cells) list.push_back({cuts[i], cuts[j]});
                    break;
                }
            }
            axis_count_[a] = static_cast<std::int64_t>(list.size());
            size_ *= axis_count_[a];
        }
    }

    void build_cubes() {
        int nmin = shell_.res[0];
        for (int a = 1; a < shell_.dim; ++a) nmin = std::min(nmin, shell_.res[a]);
        size_ = 0;
        for (int s = 1; s <= nmin; ++s) {
            if (!cube_size_valid(s)) continue;
            SizeEntry e;
            e.size = s;
            e.offset = size_;
            e.count = 1;
            for (int a = 0; a < shell_.dim; ++a) {
                int n = shell_.res[a];
                int c = 0;
                switch (spec_.granularity) {
                    case Granularity::full: c = n - s + 1; break;
                    case Granularity::dyadic: c = n / s; break;
                    case Granularity::stride: c = (n - s) / spec_.stride + 1; break;
                }
                e.pos_count[a] = c;
                e.count *= c;
            }
            if (e.count <= 0) continue;
            size_ += e.count;
            sizes_.push_back(e);
        }
    }

    void build_centered() {
        for (int a = 0; a < shell_.dim; ++a) {
            double t = (0.0 - shell_.domain.lo[a]) / shell_.step[a];
            int o = static_cast<int>(std::llround(t));
            if (std::abs(t - o) > 1e-9 || o < 1 || o > shell_.res[a] - 1)
                throw ConfigError(
                    "centered_cubes: the origin must lie on an interior grid line of every axis");
            center_[a] = o;
        }
        int smax = shell_.res[0];
        for (int a = 0; a < shell_.dim; ++a)
            smax = std::min({smax, center_[a], shell_.res[a] - center_[a]});
        size_ = 0;
        for (int half = 1; half <= smax; ++half) {
            if (!centered_size_valid(half)) continue;
            SizeEntry e;
            e.size = half;
            e.offset = size_;
            e.count = 1;
            size_ += 1;
            sizes_.push_back(e);
        }
    }

    void build_balls() {
        require_square_cells();
        int nmin = shell_.res[0];
        for (int a = 1; a < shell_.dim; ++a) nmin = std::min(nmin, shell_.res[a]);
        size_ = 0;
        auto add_level = [&](int m, int stride) {
            if (2 * m + 1 < spec_.min_cells) return;
            if (2 * m + 1 > nmin) return;
            BallLevel lv;
            lv.m = m;
            lv.radius = (m + 0.5) * shell_.step[0];
            lv.stride = stride;
            lv.ncenters = 1;
            for (int a = 0; a < shell_.dim; ++a) {
                int first = ((m + stride - 1) / stride) * stride;
                int last = shell_.res[a] - 1 - m;
                int cnt = first > last ? 0 : (last - first) / stride + 1;
                lv.first[a] = first;
                lv.count[a] = cnt;
                lv.ncenters *= cnt;
            }
            if (lv.ncenters <= 0) return;
            lv.offset = size_;
            lv.cells = level_cell_count(m);
            size_ += lv.ncenters;
            levels_.push_back(lv);
        };
        switch (spec_.granularity) {
            case Granularity::full:
                for (int m = 0; 2 * m + 1 <= nmin; ++m) add_level(m, 1);
                break;
            case Granularity::dyadic:
                add_level(0, 1);
                for (int k = 1; (1 << k) - 1 <= nmin / 2; ++k)
                    add_level((1 << k) - 1, std::max(1, 1 << (k - 1)));
                break;
            case Granularity::stride:
                for (int m = 0; 2 * m + 1 <= nmin; m += spec_.stride) add_level(m, spec_.stride);
                break;
        }
    }

    std::int64_t level_cell_count(int m) {
        // translation invariant: balls are only enumerated where they fit
        AxisReals center{};
        for (int a = 0; a < shell_.dim; ++a) center[a] = shell_.center(a, m);
        Shape probe = make_ball(m, center, false);
        return probe.cells;
    }

    void build_product() {
        if (spec_.factors.empty()) throw ConfigError("product basis needs factors");
        if (spec_.split.size() != spec_.factors.size())
            throw ConfigError("product basis: split and factors must have the same length");
        split_ = FactorSplit::of(spec_.split);
        split_.validate_for(shell_.dim);
        size_ = 1;
        for (int i = 0; i < split_.k(); ++i) {
            GridShell sub = shell_.factor_shell(split_.offsets[i], split_.parts[i]);
            children_.push_back(Basis::compile(spec_.factors[i], sub));
            size_ *= children_.back().size();
        }
    }

    void decode(std::int64_t idx, Shape& out, int /*axis_off*/) const {
        switch (spec_.kind) {
            case BasisKind::intervals:
            case BasisKind::rectangles: {
                for (int a = shell_.dim - 1; a >= 0; --a) {
                    auto& iv = axis_iv_[a][static_cast<std::size_t>(idx % axis_count_[a])];
                    idx /= axis_count_[a];
                    out.box.lo[a] = iv.first;
                    out.box.hi[a] = iv.second;
                }
                out.cells = out.box.cells();
                return;
            }
            case BasisKind::cubes: {
                const SizeEntry* e = &sizes_.back();
                for (const auto& cand : sizes_)
                    if (idx < cand.offset + cand.count) {
                        e = &cand;
                        break;
                    }
                std::int64_t rest = idx - e->offset;
                for (int a = shell_.dim - 1; a >= 0; --a) {
                    int pos = static_cast<int>(rest % e->pos_count[a]);
                    rest /= e->pos_count[a];
                    int lo = 0;
                    switch (spec_.granularity) {
                        case Granularity::full: lo = pos; break;
                        case Granularity::dyadic: lo = pos * e->size; break;
                        case Granularity::stride: lo = pos * spec_.stride; break;
                    }
                    out.box.lo[a] = lo;
                    out.box.hi[a] = lo + e->size;
                }
                out.cells = out.box.cells();
                return;
            }
            case BasisKind::centered_cubes: {
                int half = sizes_[static_cast<std::size_t>(idx)].size;
                for (int a = 0; a < shell_.dim; ++a) {
                    out.box.lo[a] = center_[a] - half;
                    out.box.hi[a] = center_[a] + half;
                }
                out.cells = out.box.cells();
                return;
            }
            case BasisKind::p_balls: {
                const BallLevel* lv = &levels_.back();
                for (const auto& cand : levels_)
                    if (idx < cand.offset + cand.ncenters) {
                        lv = &cand;
                        break;
                    }
                std::int64_t rest = idx - lv->offset;
                BallPart b;
                b.axis0 = 0;
                b.ndim = shell_.dim;
                b.p = spec_.p;
                b.radius = lv->radius;
                for (int a = shell_.dim - 1; a >= 0; --a) {
                    int pos = static_cast<int>(rest % lv->count[a]);
                    rest /= lv->count[a];
                    int ci = lv->first[a] + pos * lv->stride;
                    b.center[a] = shell_.center(a, ci);
                    out.box.lo[a] = ci - lv->m;
                    out.box.hi[a] = ci + lv->m + 1;
                }
                out.balls.push_back(b);
                out.cells = lv->cells;
                return;
            }
            case BasisKind::cylinders:
            case BasisKind::product: {
                out.cells = 1;
                Shape part;
                for (int i = factor_count() - 1; i >= 0; --i) {
                    std::int64_t ci = idx % children_[i].size();
                    idx /= children_[i].size();
                    children_[i].shape_at(ci, part);
                    embed_factor(part, split_.offsets[i], out);
                    out.cells *= part.cells;
                }
                return;
            }
        }
    }

    static void embed_factor(const Shape& part, int axis_off, Shape& whole) {
        for (int a = 0; a < part.box.dim; ++a) {
            whole.box.lo[axis_off + a] = part.box.lo[a];
            whole.box.hi[axis_off + a] = part.box.hi[a];
        }
        for (BallPart b : part.balls) {
            b.axis0 += axis_off;
            whole.balls.push_back(b);
        }
    }

    /// Splits a full-dimension shape into factor components; fails if a
    /// ball straddles a factor boundary.
    bool split_shape(const Shape& s, std::vector<Shape>& parts) const {
        for (int i = 0; i < split_.k(); ++i) {
            Shape& p = parts[i];
            p.balls.clear();
            p.box.dim = split_.parts[i];
            for (int a = 0; a < split_.parts[i]; ++a) {
                p.box.lo[a] = s.box.lo[split_.offsets[i] + a];
                p.box.hi[a] = s.box.hi[split_.offsets[i] + a];
            }
        }
        for (const BallPart& b : s.balls) {
            bool placed = false;
            for (int i = 0; i < split_.k(); ++i) {
                if (b.axis0 == split_.offsets[i] && b.ndim == split_.parts[i]) {
                    BallPart local = b;
                    local.axis0 = 0;
                    parts[i].balls.push_back(local);
                    placed = true;
                    break;
                }
            }
            if (!placed) return false;
        }
        for (int i = 0; i < split_.k(); ++i) {
            const GridShell& sub = children_[i].shell();
            parts[i].cells = count_cells(parts[i], sub);
        }
        return true;
    }

    bool ball_in_lattice(const BallPart& b) const {
        double h = shell_.step[0];
        double mf = b.radius / h - 0.5;
        int m = static_cast<int>(std::llround(mf));
        if (std::abs(mf - m) > 1e-9 || m < 0) return false;
        for (const auto& lv : levels_) {
            if (lv.m != m) continue;
            for (int a = 0; a < shell_.dim; ++a) {
                double t = (b.center[a] - shell_.domain.lo[a]) / shell_.step[a] - 0.5;
                int ci = static_cast<int>(std::llround(t));
                if (std::abs(t - ci) > 1e-9) return false;
                if (ci < lv.first[a] || (ci - lv.first[a]) % lv.stride != 0) return false;
                if (ci > lv.first[a] + (lv.count[a] - 1) * lv.stride) return false;
            }
            return true;
        }
        return false;
    }

    struct SizeEntry {
        int size = 0;
        std::int64_t offset = 0;
        AxisInts pos_count{};
        std::int64_t count = 0;
    };

    struct BallLevel {
        int m = 0;
        double radius = 0.0;
        int stride = 1;
        AxisInts first{}, count{};
        std::int64_t ncenters = 0, offset = 0, cells = 0;
    };

    BasisSpec spec_;
    GridShell shell_;
    FactorSplit split_;
    std::vector<Basis> children_;
    std::array<std::vector<std::pair<int, int>>, kMaxDim> axis_iv_;
    AxisInts64 axis_count_{};
    std::vector<SizeEntry> sizes_;
    AxisInts center_{};
    std::vector<BallLevel> levels_;
    std::int64_t size_ = 0;
};

/// factor/compose of box shapes along a split. Masked shapes do not factor
/// (product bases expose their components natively instead).
inline std::vector<Shape> factor_shape(const Shape& s, const FactorSplit& split) {
    if (!s.is_box()) throw Error("factor: masked shapes cannot be factored");
    std::vector<Shape> parts(split.k());
    for (int i = 0; i < split.k(); ++i) {
        parts[i].box.dim = split.parts[i];
        for (int a = 0; a < split.parts[i]; ++a) {
            parts[i].box.lo[a] = s.box.lo[split.offsets[i] + a];
            parts[i].box.hi[a] = s.box.hi[split.offsets[i] + a];
        }
        parts[i].cells = parts[i].box.cells();
    }
    return parts;
}

inline Shape compose_shape(const std::vector<Shape>& parts, const FactorSplit& split) {
    if (static_cast<int>(parts.size()) != split.k())
        throw Error("compose: part count does not match the split");
    Shape s;
    s.box.dim = split.total();
    s.cells = 1;
    for (int i = 0; i < split.k(); ++i) {
        if (!parts[i].is_box()) throw Error("compose: masked parts are not supported");
        if (parts[i].box.dim != split.parts[i]) throw Error("compose: part dimension mismatch");
        for (int a = 0; a < split.parts[i]; ++a) {
            s.box.lo[split.offsets[i] + a] = parts[i].box.lo[a];
            s.box.hi[split.offsets[i] + a] = parts[i].box.hi[a];
        }
        s.cells *= parts[i].cells;
    }
    return s;
}

inline nlohmann::json shape_to_json(const Shape& s) {
    nlohmann::json j;
    j["lo"] = std::vector<int>(s.box.lo.begin(), s.box.lo.begin() + s.box.dim);
    j["hi"] = std::vector<int>(s.box.hi.begin(), s.box.hi.begin() + s.box.dim);
    j["cells"] = s.cells;
    if (!s.balls.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (const BallPart& b : s.balls) {
            nlohmann::json bj;
            bj["axis0"] = b.axis0;
            bj["p"] = std::isinf(b.p) ? nlohmann::json("inf") : nlohmann::json(b.p);
            bj["center"] = std::vector<double>(b.center.begin(), b.center.begin() + b.ndim);
            bj["radius"] = b.radius;
            arr.push_back(bj);
        }
        j["balls"] = arr;
    }
    return j;
}

}  // namespace osc
