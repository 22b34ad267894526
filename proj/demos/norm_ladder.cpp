// Computes the rectangular norms of |x - y| across a resolution ladder and
// prints the series, showing how the window statistic tracks pi*L/18.

#include <cstdio>

#include "osc/expr.hpp"
#include "osc/verify.hpp"

int main() {
    std::printf("%8s %14s %14s\n", "res", "window", "pi*L/18");
    for (int n : {64, 128, 256, 512}) {
        osc::GridShell shell(osc::Box{{0.0, 0.0}, {1.0, 1.0}}, {n, n});
        osc::GridFunction f = osc::sample("abs(x-y)", shell);
        double v = osc::full_window_stat(f, "rec_bmo");
        std::printf("%8d %14.8f %14.8f\n", n, v, 3.14159265358979323846 / 18.0);
    }
    return 0;
}
