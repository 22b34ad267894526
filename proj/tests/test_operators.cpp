#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "osc/expr.hpp"
#include "osc/operators.hpp"
#include "osc/verify.hpp"

using namespace osc;

namespace {
GridShell unit_square(int n) { return GridShell(Box{{0.0, 0.0}, {1.0, 1.0}}, {n, n}); }
GridShell unit_line(int n) { return GridShell(Box{{0.0}, {1.0}}, {n}); }

Basis interval_product(const GridShell& shell, Granularity g = Granularity::full) {
    return Basis::compile(intervals_product_spec(std::vector<int>(shell.dim, 1), g), shell);
}
}  // namespace

TEST_CASE("maximal function of a constant is the constant's magnitude") {
    GridShell shell = unit_square(16);
    GridFunction f(shell);
    for (std::int64_t k = 0; k < f.size(); ++k) f[k] = -2.5;
    Basis rects = Basis::compile(BasisSpec::parse("rectangles"), shell);
    GridFunction mf = maximal(f, rects);
    for (std::int64_t k = 0; k < mf.size(); ++k) REQUIRE(mf[k] == 2.5);
    GridFunction ms = maximal(f, rects, MaximalMode::signed_avg);
    for (std::int64_t k = 0; k < ms.size(); ++k) REQUIRE(ms[k] == -2.5);
}

TEST_CASE("maximal function of a half-interval indicator matches the closed form") {
    int n = 1024;
    GridShell shell = unit_line(n);
    GridFunction f(shell);
    for (int i = 0; i < n; ++i) f[i] = shell.center(0, i) <= 0.5 ? 1.0 : 0.0;
    Basis iv = Basis::compile(BasisSpec::parse("intervals"), shell);
    GridFunction mf = maximal(f, iv);
    double h = 1.0 / n;
    for (int i = 0; i < n; ++i) {
        double x = shell.center(0, i);
        double lo = std::min(1.0, 1.0 / (2.0 * (x + 2 * h))) - 1e-9;
        double hi = std::min(1.0, 1.0 / (2.0 * std::max(x - 2 * h, h / 4))) + 1e-9;
        REQUIRE(mf[i] >= lo);
        REQUIRE(mf[i] <= hi);
    }
}

TEST_CASE("maximal function of -log|z| keeps growing with resolution") {
    // no plateau: the supremum is infinite on the plane
    double prev = 0.0;
    for (int n : {64, 128, 256}) {
        GridShell shell(Box{{-1.0, -1.0}, {1.0, 1.0}}, {n, n});
        GridFunction f = sample(catalog_expr("neg_log_norm", 2), shell);
        Basis cubes = Basis::compile(
            BasisSpec::parse(R"({"kind":"cubes","granularity":"dyadic"})"), shell);
        GridFunction mf = maximal(f, cubes);
        PrefixTable P(mf);
        double avg = P.box_average(shell.full_box());
        if (prev > 0) REQUIRE(avg > prev * 1.001);
        prev = avg;
    }
}

TEST_CASE("maximal function invariants") {
    GridShell shell = unit_square(32);
    GridFunction f = random_smooth(shell, 5);
    Basis full = Basis::compile(BasisSpec::parse("rectangles"), shell);
    Basis dyadic =
        Basis::compile(BasisSpec::parse(R"({"kind":"rectangles","granularity":"dyadic"})"), shell);

    GridFunction mful = maximal(f, full);
    GridFunction mdya = maximal(f, dyadic);
    GridFunction f3(shell);
    for (std::int64_t k = 0; k < f.size(); ++k) f3[k] = -3.0 * f[k];
    GridFunction mf3 = maximal(f3, full);
    for (std::int64_t k = 0; k < f.size(); ++k) {
        REQUIRE(mdya[k] <= mful[k] + 1e-12);          // fewer shapes, smaller sup
        REQUIRE(mful[k] >= std::abs(f[k]) - 1e-12);   // one-cell shapes are enumerated
        REQUIRE(mf3[k] == Catch::Approx(3.0 * mful[k]).epsilon(1e-12).margin(1e-12));
    }
}

TEST_CASE("maximal reports uncovered cells") {
    // balls of radius >= 2.5h must sit >= 2 cells from the boundary, so the
    // corner cells (distance 2*sqrt(2)h from the nearest center) are missed
    GridShell shell = unit_square(8);
    GridFunction f = random_smooth(shell, 2);
    BasisSpec spec = BasisSpec::parse(R"({"kind":"p_balls","p":2,"min_cells":4})");
    Basis b = Basis::compile(spec, shell);
    REQUIRE_THROWS_WITH(maximal(f, b), Catch::Matchers::ContainsSubstring("does not cover"));
}

TEST_CASE("bmo norm examples") {
    GridShell shell = unit_square(16);
    GridFunction c(shell);
    for (std::int64_t k = 0; k < c.size(); ++k) c[k] = 7.0;
    Basis rects = Basis::compile(BasisSpec::parse("rectangles"), shell);
    REQUIRE(bmo_norm(c, rects, 1.0).value == 0.0);
    REQUIRE(bmo_norm(c, rects, 2.0).value == 0.0);

    int n = 1024;
    GridShell line = unit_line(n);
    GridFunction fx(line);
    for (int i = 0; i < n; ++i) fx[i] = line.center(0, i);
    Basis iv = Basis::compile(BasisSpec::parse("intervals"), line);
    // interval [a,b] has mean-absolute deviation (b-a)/4; the sup is the full window
    OscReport r = bmo_norm(fx, iv, 1.0);
    REQUIRE(r.value == Catch::Approx(0.25).margin(1e-3));
    REQUIRE(r.argmax.box.extent(0) == n);
}

TEST_CASE("blo norm examples") {
    int n = 1024;
    GridShell line = unit_line(n);
    GridFunction fx(line);
    for (int i = 0; i < n; ++i) fx[i] = line.center(0, i);
    Basis iv = Basis::compile(BasisSpec::parse("intervals"), line);
    OscReport r = blo_norm(fx, iv);
    REQUIRE(r.value == Catch::Approx(0.5).margin(1e-3));

    GridShell shell = unit_square(12);
    GridFunction c(shell);
    Basis rects = Basis::compile(BasisSpec::parse("rectangles"), shell);
    REQUIRE(blo_norm(c, rects).value == 0.0);
}

TEST_CASE("oscillation norms are translation invariant and homogeneous") {
    GridShell shell = unit_square(20);
    Basis rects = Basis::compile(BasisSpec::parse("rectangles"), shell);
    Basis prod = interval_product(shell);
    GridFunction f = random_smooth(shell, 9);
    GridFunction shifted(shell), scaled(shell);
    for (std::int64_t k = 0; k < f.size(); ++k) {
        shifted[k] = f[k] + 0.7;
        scaled[k] = -2.0 * f[k];
    }
    auto close = [](double a, double b) {
        REQUIRE(a == Catch::Approx(b).epsilon(1e-12).margin(1e-12));
    };
    close(bmo_norm(shifted, rects, 1.0).value, bmo_norm(f, rects, 1.0).value);
    close(blo_norm(shifted, rects).value, blo_norm(f, rects).value);
    close(rec_bmo_norm(shifted, prod).value, rec_bmo_norm(f, prod).value);
    close(rec_blo_norm(shifted, prod).value, rec_blo_norm(f, prod).value);
    close(bmo_norm(scaled, rects, 1.0).value, 2.0 * bmo_norm(f, rects, 1.0).value);
    close(rec_bmo_norm(scaled, prod).value, 2.0 * rec_bmo_norm(f, prod).value);
}

TEST_CASE("Jensen ordering of the p-oscillations") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        GridShell shell = unit_square(12);
        GridFunction f = random_smooth(shell, 100 + seed);
        Basis rects = Basis::compile(BasisSpec::parse("rectangles"), shell);
        double p1 = bmo_norm(f, rects, 1.0).value;
        for (double p : {1.5, 2.0, 3.0})
            REQUIRE(p1 <= bmo_norm(f, rects, p).value + 1e-9);
    }
}

TEST_CASE("lower oscillation controls mean oscillation with constant 2") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        GridShell shell = unit_square(16);
        GridFunction f = random_smooth(shell, 200 + seed);
        Basis rects = Basis::compile(BasisSpec::parse("rectangles"), shell);
        REQUIRE(bmo_norm(f, rects, 1.0).value <= 2.0 * blo_norm(f, rects).value + 1e-9);
    }
}

TEST_CASE("lower norms vanish on slicewise-constant functions") {
    GridShell shell = unit_square(24);
    GridFunction f = sample("exp(x)", shell);  // constant in y
    FactorSplit split = FactorSplit::of({1, 1});
    BasisSpec iv = BasisSpec::parse("intervals");
    REQUIRE(lower_bmo(f, split, 1, iv, 1.0).value <= 1e-12);
    REQUIRE(lower_blo(f, split, 1, iv).value <= 1e-12);
    REQUIRE(lower_blo(f, split, 0, iv).value > 0.1);
}

TEST_CASE("lower norms are bounded by the product norm") {
    FactorSplit split = FactorSplit::of({1, 1});
    BasisSpec iv = BasisSpec::parse("intervals");
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        GridShell shell = unit_square(16);
        GridFunction f = random_smooth(shell, 300 + seed);
        Basis prod = interval_product(shell);
        double full1 = bmo_norm(f, prod, 1.0).value;
        double full2 = bmo_norm(f, prod, 2.0).value;
        for (int i = 0; i < 2; ++i) {
            REQUIRE(lower_bmo(f, split, i, iv, 1.0).value <= 2.0 * full1 + 1e-9);
            REQUIRE(lower_bmo(f, split, i, iv, 2.0).value <= full2 + 1e-9);  // p = 2: constant 1
        }
    }
}

TEST_CASE("rectangular mean oscillation of x - y vanishes") {
    GridShell shell = unit_square(32);
    GridFunction f = sample("x-y", shell);
    Basis prod = interval_product(shell);
    REQUIRE(rec_bmo_norm(f, prod).value <= 1e-12);
}

TEST_CASE("rectangular mean oscillation of |x - y| on the unit window") {
    GridShell shell(Box{{0.0, 0.0}, {1.0, 1.0}}, {256, 256});
    GridFunction f = sample("abs(x-y)", shell);
    double v = full_window_stat(f, "rec_bmo");
    REQUIRE(v == Catch::Approx(3.14159265358979 / 18.0).epsilon(0.01));
}

TEST_CASE("slicewise rectangular lower oscillation of single-variable maxima vanishes") {
    GridShell shell = unit_square(24);
    Basis prod = interval_product(shell);
    REQUIRE(rec_blo_norm(sample("exp(y)", shell), prod).value <= 1e-12);
    REQUIRE(rec_blo_norm(sample("max(x,y)", shell), prod).value <= 1e-12);

    // three factors, a function of one variable and a max of two
    GridShell cube(Box{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}}, {8, 8, 8});
    Basis prod3 = Basis::compile(intervals_product_spec({1, 1, 1}), cube);
    REQUIRE(rec_blo_norm(sample("exp(z)", cube), prod3).value <= 1e-12);
    REQUIRE(rec_blo_norm(sample("max(x,z)", cube), prod3).value <= 1e-12);
}

TEST_CASE("naive rectangular lower oscillation: coordinates vanish, their max does not") {
    GridShell shell = unit_square(256);
    Basis prod = interval_product(shell, Granularity::dyadic);
    REQUIRE(rec_blo_naive_norm(sample("x", shell), prod).value <= 1e-12);
    REQUIRE(rec_blo_naive_norm(sample("y", shell), prod).value <= 1e-12);

    GridFunction h = sample("max(x,y)", shell);
    double window = full_window_stat(h, "rec_blo_naive");
    REQUIRE(window == Catch::Approx(1.0 / 3.0).epsilon(0.01));
    GridFunction c(shell);
    REQUIRE(rec_blo_naive_norm(c, prod).value == 0.0);
}

TEST_CASE("offset-window lower bound for -log|x - y|") {
    GridShell shell(Box{{0.0, 1.0}, {1.0, 2.0}}, {256, 256});
    GridFunction f = sample("-log(abs(x-y))", shell);
    double v = full_window_stat(f, "rec_blo");
    double bound = 2.0 * std::log(2.0) - 1.0;
    REQUIRE(v >= bound * 0.99);
}

TEST_CASE("p = 2 variance path agrees with the direct pass") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        GridShell shell = unit_square(12);
        GridFunction f = random_smooth(shell, 400 + seed);
        Basis rects = Basis::compile(BasisSpec::parse("rectangles"), shell);
        OscReport r = bmo_norm(f, rects, 2.0);
        // direct per-shape pass over every shape
        double direct = 0.0;
        Shape s;
        for (std::int64_t i = 0; i < rects.size(); ++i) {
            rects.shape_at(i, s);
            direct = std::max(direct, direct_check::bmo_stat(f, s, 2.0));
        }
        REQUIRE(r.value == Catch::Approx(direct).epsilon(1e-9).margin(1e-12));
    }
}

TEST_CASE("norm reports recompute at their argmax and serialise") {
    GridShell shell = unit_square(16);
    GridFunction f = random_smooth(shell, 77);
    Basis rects = Basis::compile(BasisSpec::parse("rectangles"), shell);
    Basis prod = interval_product(shell);

    OscReport r = bmo_norm(f, rects, 1.0);
    REQUIRE(r.value >= 0.0);
    REQUIRE(r.value ==
            Catch::Approx(direct_check::bmo_stat(f, r.argmax, 1.0)).epsilon(1e-9));
    nlohmann::json j = r.to_json(true);
    REQUIRE(j["kind"] == "bmo_p");
    REQUIRE(!j.contains("runtime_ms"));
    REQUIRE(j.contains("argmax"));

    OscReport rb = rec_blo_norm(f, prod);
    REQUIRE(rb.value ==
            Catch::Approx(direct_check::rec_blo_stat(f, rb.argmax, rb.argmax_factors,
                                                     prod.split()))
                .epsilon(1e-9));
    REQUIRE(rb.to_json()["argmax_factors"].size() == 2);
}

TEST_CASE("full enumeration above the per-pass cap is rejected") {
    GridShell shell = unit_square(128);
    GridFunction f = random_smooth(shell, 1);
    Basis full = Basis::compile(BasisSpec::parse("rectangles"), shell);
    REQUIRE_THROWS_AS(bmo_norm(f, full, 1.0), ConfigError);
    REQUIRE_THROWS_AS(maximal(f, full), ConfigError);
    REQUIRE(bmo_norm(f, full, 2.0).value >= 0.0);  // variance path is exempt
    Basis dy =
        Basis::compile(BasisSpec::parse(R"({"kind":"rectangles","granularity":"dyadic"})"), shell);
    REQUIRE(bmo_norm(f, dy, 1.0).value >= 0.0);
}

TEST_CASE("rectangular norms over cylinders use the factor structure") {
    GridShell shell(Box{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}}, {12, 12, 12});
    GridFunction f = random_smooth(shell, 31);
    Basis cyl = Basis::compile(
        BasisSpec::parse(R"({"kind":"cylinders","granularity":"dyadic"})"), shell);
    OscReport r = rec_blo_norm(f, cyl);
    REQUIRE(r.value >= 0.0);
    REQUIRE(std::isfinite(r.value));
    // the cylinder statistic is bounded by the plain lower oscillation
    REQUIRE(r.value <= blo_norm(f, cyl).value + 1e-9);
}
