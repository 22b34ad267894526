#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "osc/grid.hpp"
#include "osc/grid_io.hpp"
#include "osc/rng.hpp"

using namespace osc;

namespace {

GridFunction random_grid(const GridShell& shell, std::uint64_t seed) {
    Rng rng(seed);
    GridFunction g(shell);
    for (std::int64_t k = 0; k < g.size(); ++k) g[k] = rng.uniform(-2.0, 2.0);
    return g;
}

IndexBox random_box(const GridShell& shell, Rng& rng) {
    IndexBox b;
    b.dim = shell.dim;
    for (int a = 0; a < shell.dim; ++a) {
        int lo = static_cast<int>(rng.next_below(shell.res[a]));
        int hi = lo + 1 + static_cast<int>(rng.next_below(shell.res[a] - lo));
        b.lo[a] = lo;
        b.hi[a] = hi;
    }
    return b;
}

double direct_sum(const GridFunction& g, const IndexBox& b) {
    double s = 0.0;
    AxisInts idx = b.lo;
    for (;;) {
        s += g.at(idx);
        int a = 0;
        for (; a < g.dim(); ++a) {
            if (++idx[a] < b.hi[a]) break;
            idx[a] = b.lo[a];
        }
        if (a >= g.dim()) break;
    }
    return s;
}

double direct_min(const GridFunction& g, const IndexBox& b) {
    double s = std::numeric_limits<double>::infinity();
    AxisInts idx = b.lo;
    for (;;) {
        s = std::min(s, g.at(idx));
        int a = 0;
        for (; a < g.dim(); ++a) {
            if (++idx[a] < b.hi[a]) break;
            idx[a] = b.lo[a];
        }
        if (a >= g.dim()) break;
    }
    return s;
}

}  // namespace

TEST_CASE("make_grid basics") {
    GridFunction g = make_grid(Box{{0.0}, {1.0}}, {4});
    REQUIRE(g.size() == 4);
    REQUIRE(g.cell_measure() == Catch::Approx(0.25));
    for (std::int64_t k = 0; k < 4; ++k) REQUIRE(g[k] == 0.0);

    GridFunction g2 = make_grid(Box{{0.0, 0.0}, {1.0, 2.0}}, {2, 4});
    REQUIRE(g2.size() == 8);
    REQUIRE(g2.cell_measure() == Catch::Approx(0.25));

    REQUIRE_THROWS_AS(make_grid(Box{{0.0}, {1.0}}, {0}), ConfigError);
    REQUIRE_THROWS_AS(make_grid(Box{{1.0}, {1.0}}, {4}), ConfigError);
    REQUIRE_THROWS_AS(make_grid(Box{{2.0}, {1.0}}, {4}), ConfigError);
}

TEST_CASE("box sums and averages") {
    GridFunction g = GridFunction::from_values(Box{{0.0}, {1.0}}, {3}, {1.0, 2.0, 3.0});
    PrefixTable P(g);
    IndexBox full = g.shell().full_box();
    REQUIRE(P.box_sum(full) == Catch::Approx(6.0));
    REQUIRE(P.box_average(full) == Catch::Approx(2.0));

    // single-cell sums are the cell values
    for (int i = 0; i < 3; ++i) {
        IndexBox b = full;
        b.lo[0] = i;
        b.hi[0] = i + 1;
        REQUIRE(P.box_sum(b) == g[i]);
    }

    IndexBox bad = full;
    bad.hi[0] = 5;
    REQUIRE_THROWS_AS(P.box_sum(bad), Error);
    bad = full;
    bad.lo[0] = bad.hi[0];
    REQUIRE_THROWS_AS(P.box_sum(bad), Error);
}

TEST_CASE("midpoint sampling integrates smooth functions") {
    GridShell shell(Box{{0.0}, {1.0}}, {1024});
    GridFunction lin(shell), quad(shell);
    for (int i = 0; i < 1024; ++i) {
        double x = shell.center(0, i);
        lin[i] = x;
        quad[i] = x * x;
    }
    PrefixTable Pl(lin), Pq(quad);
    REQUIRE(Pl.box_average(shell.full_box()) == Catch::Approx(0.5).margin(1e-6));
    // hand oracle: the integral of x^2 on [0,1] is 1/3
    REQUIRE(Pq.box_average(shell.full_box()) == Catch::Approx(1.0 / 3.0).margin(1e-3));
}

TEST_CASE("box minima") {
    GridFunction g = GridFunction::from_values(Box{{0.0}, {1.0}}, {3}, {3.0, 1.0, 2.0});
    MinTable M(g);
    REQUIRE(M.box_min(g.shell().full_box()) == 1.0);

    GridShell shell(Box{{0.0}, {1.0}}, {64});
    GridFunction v(shell);
    for (int i = 0; i < 64; ++i) v[i] = std::abs(shell.center(0, i) - 0.5);
    MinTable Mv(v);
    IndexBox b = shell.full_box();
    b.lo[0] = 16;  // [0.25, 0.75]
    b.hi[0] = 48;
    double direct = direct_min(v, b);
    REQUIRE(Mv.box_min(b) == direct);
    REQUIRE(direct == Catch::Approx(0.5 / 64.0));  // half-cell offset from the kink

    GridFunction c(shell);
    for (int i = 0; i < 64; ++i) c[i] = 2.5;
    MinTable Mc(c);
    for (int lo = 0; lo < 64; lo += 7) {
        IndexBox bb = shell.full_box();
        bb.lo[0] = lo;
        bb.hi[0] = std::min(64, lo + 1 + (lo % 5));
        REQUIRE(Mc.box_min(bb) == 2.5);
    }
}

TEST_CASE("range aggregates agree with direct scans on random boxes") {
    Rng rng(42);
    for (int dim = 1; dim <= 3; ++dim) {
        std::vector<int> res(dim, dim == 3 ? 12 : 24);
        Box box;
        for (int a = 0; a < dim; ++a) {
            box.lo.push_back(0.0);
            box.hi.push_back(1.0 + a);
        }
        GridFunction g = random_grid(GridShell(box, res), 7 + dim);
        PrefixTable P(g);
        MinTable M(g);
        for (int t = 0; t < 1000 / dim; ++t) {
            IndexBox b = random_box(g.shell(), rng);
            double ds = direct_sum(g, b);
            REQUIRE(P.box_sum(b) == Catch::Approx(ds).epsilon(1e-9));
            REQUIRE(M.box_min(b) == direct_min(g, b));  // exact
        }
    }
}

TEST_CASE("constant averages are exact; sums are linear") {
    GridShell shell(Box{{0.0, 0.0}, {1.0, 1.0}}, {16, 16});
    GridFunction c(shell);
    for (std::int64_t k = 0; k < c.size(); ++k) c[k] = 3.25;
    PrefixTable Pc(c);
    Rng rng(5);
    for (int t = 0; t < 200; ++t) {
        IndexBox b = random_box(shell, rng);
        REQUIRE(Pc.box_average(b) == 3.25);
    }

    GridFunction f = random_grid(shell, 11), g = random_grid(shell, 13);
    GridFunction h(shell);
    for (std::int64_t k = 0; k < h.size(); ++k) h[k] = f[k] + g[k];
    PrefixTable Pf(f), Pg(g), Ph(h);
    for (int t = 0; t < 200; ++t) {
        IndexBox b = random_box(shell, rng);
        double lhs = Ph.box_sum(b);
        double rhs = Pf.box_sum(b) + Pg.box_sum(b);
        REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-12).margin(1e-12));
    }
}

TEST_CASE("refinement shrinks the averaging error") {
    // aligned sub-box [1/4, 3/4] of [0,1], f(x) = x^2
    double analytic = (std::pow(0.75, 3) - std::pow(0.25, 3)) / 3.0 / 0.5;
    double prev_err = 0.0;
    for (int step = 0; step < 3; ++step) {
        int n = 64 << step;
        GridShell shell(Box{{0.0}, {1.0}}, {n});
        GridFunction g(shell);
        for (int i = 0; i < n; ++i) g[i] = shell.center(0, i) * shell.center(0, i);
        PrefixTable P(g);
        IndexBox b = shell.full_box();
        b.lo[0] = n / 4;
        b.hi[0] = 3 * n / 4;
        double err = std::abs(P.box_average(b) - analytic);
        if (step > 0) REQUIRE(err <= 0.75 * prev_err);  // at least halves, with slack
        prev_err = err;
    }
}

TEST_CASE("masked aggregates") {
    GridShell shell(Box{{0.0, 0.0}, {1.0, 1.0}}, {32, 32});
    GridFunction g = random_grid(shell, 3);
    PrefixTable P(g);
    MinTable M(g);
    auto everything = [](const AxisReals&) { return true; };
    REQUIRE(masked_sum(g, everything) == Catch::Approx(P.box_sum(shell.full_box())).epsilon(1e-12));
    REQUIRE(masked_min(g, everything) == M.box_min(shell.full_box()));

    GridFunction ones(shell);
    for (std::int64_t k = 0; k < ones.size(); ++k) ones[k] = 1.0;
    auto disc = [](const AxisReals& p) {
        double dx = p[0] - 0.5, dy = p[1] - 0.5;
        return dx * dx + dy * dy < 0.25;
    };
    REQUIRE(masked_average(ones, disc) == 1.0);

    auto none = [](const AxisReals&) { return false; };
    REQUIRE_THROWS_AS(masked_sum(g, none), Error);
}

TEST_CASE("disc area from the mask matches pi r^2 within a percent") {
    GridShell shell(Box{{0.0, 0.0}, {1.0, 1.0}}, {512, 512});
    GridFunction ones(shell);
    for (std::int64_t k = 0; k < ones.size(); ++k) ones[k] = 1.0;
    std::int64_t count = 0;
    masked_sum(ones, [](const AxisReals& p) {
        double dx = p[0] - 0.5, dy = p[1] - 0.5;
        return dx * dx + dy * dy < 0.25;
    }, &count);
    double area = double(count) * ones.cell_measure();
    REQUIRE(area == Catch::Approx(3.14159265358979 * 0.25).epsilon(0.01));
}

TEST_CASE("non-finite samples are rejected by default, clipped on request") {
    std::vector<double> vals = {1.0, std::numeric_limits<double>::infinity(), 3.0};
    REQUIRE_THROWS_AS(GridFunction::from_values(Box{{0.0}, {1.0}}, {3}, vals), Error);
    GridFunction g = GridFunction::from_values(Box{{0.0}, {1.0}}, {3}, vals,
                                               SamplePolicy::clipping(100.0));
    REQUIRE(g[1] == 100.0);
    std::vector<double> nan_vals = {1.0, std::nan(""), 3.0};
    REQUIRE_THROWS_AS(GridFunction::from_values(Box{{0.0}, {1.0}}, {3}, nan_vals,
                                                SamplePolicy::clipping(100.0)),
                      Error);
}

TEST_CASE("grid dump/load round-trips bit-exactly") {
    GridShell shell(Box{{-1.0, 0.0}, {1.0, 2.0}}, {7, 5});
    GridFunction g = random_grid(shell, 99);
    g[3] = 1.0 / 3.0;
    g[4] = 1e-17;

    std::ostringstream js;
    dump_json(g, js);
    std::istringstream jin(js.str());
    GridFunction gj = load_json(jin);
    REQUIRE(gj.size() == g.size());
    for (std::int64_t k = 0; k < g.size(); ++k) REQUIRE(gj[k] == g[k]);
    for (int a = 0; a < 2; ++a) {
        REQUIRE(gj.domain().lo[a] == g.domain().lo[a]);
        REQUIRE(gj.domain().hi[a] == g.domain().hi[a]);
    }

    std::ostringstream cs;
    dump_csv(g, cs);
    std::istringstream cin(cs.str());
    GridFunction gc = load_csv(cin);
    for (std::int64_t k = 0; k < g.size(); ++k) REQUIRE(gc[k] == g[k]);

    std::istringstream bad("not a header");
    REQUIRE_THROWS_AS(load_csv(bad), ConfigError);
}

TEST_CASE("min table sparse and brute paths agree") {
    GridShell shell(Box{{0.0, 0.0}, {1.0, 1.0}}, {24, 24});
    GridFunction g = random_grid(shell, 17);
    MinTable sparse(g);
    MinTable brute(g, 0);  // zero budget forces the scan path
    REQUIRE(sparse.sparse());
    REQUIRE(!brute.sparse());
    Rng rng(23);
    for (int t = 0; t < 300; ++t) {
        IndexBox b = random_box(shell, rng);
        REQUIRE(sparse.box_min(b) == brute.box_min(b));
    }
}
