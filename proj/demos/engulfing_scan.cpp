// Prints empirical doubling/engulfing constants for a few bases, including
// the rectangle family where the constant blows up with the aspect ratio.

#include <cstdio>

#include "osc/engulf.hpp"

int main() {
    using namespace osc;
    struct Row {
        const char* name;
        const char* spec;
        int res;
    };
    for (const Row& row : {Row{"intervals", "intervals", 64},
                           Row{"cubes", "cubes", 16},
                           Row{"balls", R"({"kind":"p_balls","p":2})", 12}}) {
        GridShell shell = row.spec[0] == 'i'
                              ? GridShell(Box{{0.0}, {1.0}}, {row.res})
                              : GridShell(Box{{0.0, 0.0}, {1.0, 1.0}}, {row.res, row.res});
        Basis basis = Basis::compile(BasisSpec::parse(row.spec), shell);
        EngulfReport rep = check_engulfing(basis, 2000000);
        std::printf("%-10s c_d %.3f (cap %.0f)  c_e %.3f (cap %.0f)  pairs %lld  %s\n", row.name,
                    rep.c_d_emp, rep.cap_d, rep.c_e_emp, rep.cap_e,
                    static_cast<long long>(rep.pairs_qualifying),
                    rep.passed ? "engulfing" : "NOT engulfing");
    }
    std::printf("rectangles, transpose family:\n");
    auto ratios = rectangle_blowup_ratios({2, 4, 8, 16});
    for (std::size_t i = 0; i < ratios.size(); ++i)
        std::printf("  H = %2d  smallest cover ratio %.1f\n", 2 << i, ratios[i]);
    return 0;
}
