#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <thread>

#include "osc/expr.hpp"
#include "osc/rng.hpp"

using namespace osc;

namespace {
double eval1(const std::string& src, double x) {
    double pt[1] = {x};
    EvalResult r = Expr::parse(src).eval(pt, 1);
    REQUIRE(r.ok);
    return r.value;
}
double eval2(const std::string& src, double x, double y) {
    double pt[2] = {x, y};
    EvalResult r = Expr::parse(src).eval(pt, 2);
    REQUIRE(r.ok);
    return r.value;
}
}  // namespace

TEST_CASE("parser evaluates the basics") {
    REQUIRE(eval1("2^3", 0) == 8.0);
    REQUIRE(eval2("-log(abs(x-y))", 0.0, 1.0) == 0.0);
    REQUIRE(eval2("min(x,y)", 0.2, 0.7) == 0.2);
    REQUIRE(eval2("max(x,y)", 0.2, 0.7) == 0.7);
    REQUIRE(eval1("1+2*3", 0) == 7.0);
    REQUIRE(eval1("(1+2)*3", 0) == 9.0);
    REQUIRE(eval1("pi", 0) == Catch::Approx(3.14159265358979));
    REQUIRE(eval1("e", 0) == Catch::Approx(2.71828182845905));
    REQUIRE(eval1("6/4", 0) == 1.5);
}

TEST_CASE("power is right-associative and unary minus binds tighter on its left") {
    REQUIRE(eval1("2^3^2", 0) == 512.0);       // 2^(3^2)
    REQUIRE(eval1("-x^2", 3.0) == 9.0);        // (-x)^2
    REQUIRE(eval1("-(x^2)", 3.0) == -9.0);
    REQUIRE(eval1("2^-3", 0) == 0.125);
    REQUIRE(eval1("--x", 5.0) == 5.0);
}

TEST_CASE("parse errors carry byte offsets") {
    auto offset_of = [](const std::string& src) {
        try {
            Expr::parse(src);
        } catch (const ExprError& e) {
            return static_cast<long>(e.offset);
        }
        return -1L;
    };
    REQUIRE(offset_of("2+") == 2);
    REQUIRE(offset_of("foo(3)") == 0);
    REQUIRE(offset_of("min(1)") == 0);
    REQUIRE(offset_of("1 2") == 2);
    REQUIRE(offset_of("w+1") == 0);
    REQUIRE(offset_of("(1+2") == 4);
    REQUIRE(offset_of("ok") >= 0);
}

TEST_CASE("evaluation signals non-finite results instead of returning NaN") {
    Expr lg = Expr::parse("log(x)");
    double neg = -1.0, zero = 0.0, pos = 2.0;
    REQUIRE(!lg.eval(&neg, 1).ok);
    REQUIRE(!lg.eval(&zero, 1).ok);
    REQUIRE(lg.eval(&pos, 1).ok);

    Expr dv = Expr::parse("1/x");
    REQUIRE(!dv.eval(&zero, 1).ok);
    Expr sq = Expr::parse("sqrt(x)");
    REQUIRE(!sq.eval(&neg, 1).ok);
    Expr hp = Expr::parse("exp(x)");
    double big = 1e6;
    REQUIRE(!hp.eval(&big, 1).ok);
    // the sign of the IEEE value survives for the clip policy
    Expr nl = Expr::parse("-log(abs(x))");
    EvalResult r = nl.eval(&zero, 1);
    REQUIRE(!r.ok);
    REQUIRE(r.value > 0);
}

TEST_CASE("catalog builtins match their closed forms") {
    Rng rng(2024);
    for (int t = 0; t < 100; ++t) {
        double x = rng.uniform(-2.0, 2.0);
        double y = rng.uniform(-2.0, 2.0);
        if (std::abs(x - y) < 1e-6 || std::abs(x) < 1e-6) continue;
        double pt[2] = {x, y};
        auto val = [&](const char* name) {
            EvalResult r = catalog_expr(name, 2).eval(pt, 2);
            REQUIRE(r.ok);
            return r.value;
        };
        REQUIRE(val("neg_log_abs_diff") == Catch::Approx(-std::log(std::abs(x - y))).margin(1e-12));
        REQUIRE(val("abs_diff") == Catch::Approx(std::abs(x - y)).margin(1e-12));
        REQUIRE(val("max_xy") == Catch::Approx(std::max(x, y)).margin(1e-12));
        REQUIRE(val("diff") == Catch::Approx(x - y).margin(1e-12));
        REQUIRE(val("neg_log_norm") ==
                Catch::Approx(-std::log(std::hypot(x, y))).margin(1e-12));
        REQUIRE(val("log_norm") == Catch::Approx(std::log(std::hypot(x, y))).margin(1e-12));
        REQUIRE(val("indicator_halfspace") == (x > 0 ? 1.0 : 0.0));
    }
    REQUIRE_THROWS_AS(catalog_expr("nope", 2), ConfigError);
}

TEST_CASE("pretty-printing round-trips to a structurally identical tree") {
    const char* corpus[] = {
        "1", "x", "x1", "x2", "pi", "e", "-x", "--x", "x+y", "x-y", "x*y", "x/y",
        "x^y", "x^y^2", "(x^y)^2", "-x^2", "-(x^2)", "x*(y+1)", "x*y+1", "1/(x+y)",
        "abs(x)", "log(abs(x))", "exp(-x)", "sqrt(x^2+y^2)", "min(x,y)", "max(x,-y)",
        "-log(abs(x-y))", "max(x,y)-min(x,y)", "2*pi*x", "x^2-y^2", "(x-y)*(x+y)",
        "1.5e-3*x", "0.25", "x/(y/2)", "(x/y)/2", "x-(y-1)", "x-y-1", "min(abs(x),exp(y))",
        "sqrt(abs(x*y))", "log(x)/log(2)", "x^0.5", "2^x", "-2^x", "x*-1", "x--y",
        "abs(x-y)^1.5", "max(0,min(1,x))", "exp(log(x))", "(x+y)^(x-y)", "1/x/y",
    };
    for (const char* src : corpus) {
        Expr first = Expr::parse(src);
        Expr second = Expr::parse(first.pretty());
        INFO(src << "  ->  " << first.pretty());
        REQUIRE(first.same_structure(second));
    }
}

TEST_CASE("sampling onto grids") {
    GridShell shell(Box{{0.0, 0.0}, {1.0, 1.0}}, {2, 2});
    GridFunction zeros = sample("0", shell);
    for (std::int64_t k = 0; k < 4; ++k) REQUIRE(zeros[k] == 0.0);

    GridFunction d = sample("x-y", shell);
    REQUIRE(d[0] == 0.0);   // (0.25, 0.25)
    REQUIRE(d[1] == 0.5);   // (0.75, 0.25)
    REQUIRE(d[2] == -0.5);  // (0.25, 0.75)
    REQUIRE(d[3] == 0.0);

    GridShell big(Box{{0.0, 0.0}, {1.0, 1.0}}, {512, 512});
    GridFunction ad = sample("abs(x-y)", big);
    PrefixTable P(ad);
    // hand oracle: the double integral of |x - y| over the unit square is 1/3
    REQUIRE(P.box_average(big.full_box()) == Catch::Approx(1.0 / 3.0).margin(1e-3));

    REQUIRE_THROWS_AS(sample("z", shell), ConfigError);  // arity beyond grid dim
}

TEST_CASE("non-finite samples name the offending cell") {
    GridShell line(Box{{-1.5}, {1.5}}, {3});  // step 1: middle center is exactly 0
    try {
        sample("1/x", line);
        FAIL("expected a sampling error");
    } catch (const Error& e) {
        REQUIRE(std::string(e.what()).find("(1)") != std::string::npos);
    }
    GridFunction clipped = sample("1/x", line, SamplePolicy::clipping(50.0));
    REQUIRE(clipped[1] == 50.0);  // 1/0 carries the IEEE sign into the clip

    GridShell sq(Box{{0.0, 0.0}, {1.0, 1.0}}, {8, 8});
    REQUIRE_THROWS_AS(sample("-log(abs(x-y))", sq), Error);  // diagonal cells
    GridFunction c = sample("-log(abs(x-y))", sq, SamplePolicy::clipping(40.0));
    REQUIRE(c[0] == 40.0);
}

TEST_CASE("evaluation is pure across threads") {
    Expr e = Expr::parse("exp(-x)*max(x,y)+sqrt(abs(y))");
    double pt[2] = {0.37, -1.25};
    double expected = e.eval(pt, 2).value;
    std::vector<double> results(4);
    std::vector<std::thread> pool;
    for (int t = 0; t < 4; ++t)
        pool.emplace_back([&, t] {
            double local = 0;
            for (int i = 0; i < 1000; ++i) local = e.eval(pt, 2).value;
            results[t] = local;
        });
    for (auto& th : pool) th.join();
    for (double r : results) REQUIRE(r == expected);
}
