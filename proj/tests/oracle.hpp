#pragma once

// Independent brute-force reference implementations: no prefix tables, no
// min tables, no shared aggregation code. Shapes are enumerated with plain
// nested loops and every statistic is a direct scan, so these are slow and
// only used at small resolutions to cross-check the fast paths.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "osc/grid.hpp"

namespace oracle {

struct Rect {
    int x0, x1, y0, y1;  // half-open cell ranges
    std::int64_t cells() const { return std::int64_t(x1 - x0) * (y1 - y0); }
};

inline std::vector<Rect> all_rects(int nx, int ny) {
    std::vector<Rect> out;
    for (int x0 = 0; x0 < nx; ++x0)
        for (int x1 = x0 + 1; x1 <= nx; ++x1)
            for (int y0 = 0; y0 < ny; ++y0)
                for (int y1 = y0 + 1; y1 <= ny; ++y1) out.push_back({x0, x1, y0, y1});
    return out;
}

inline std::vector<Rect> all_intervals(int nx) {
    std::vector<Rect> out;
    for (int x0 = 0; x0 < nx; ++x0)
        for (int x1 = x0 + 1; x1 <= nx; ++x1) out.push_back({x0, x1, 0, 1});
    return out;
}

inline double value_at(const osc::GridFunction& f, int x, int y) {
    return f[std::int64_t(y) * f.res(0) + x];
}

inline double rect_mean(const osc::GridFunction& f, const Rect& r, bool absolute = false) {
    double s = 0.0;
    for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) {
            double v = value_at(f, x, y);
            s += absolute ? std::abs(v) : v;
        }
    return s / double(r.cells());
}

inline double rect_min(const osc::GridFunction& f, const Rect& r) {
    double m = std::numeric_limits<double>::infinity();
    for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) m = std::min(m, value_at(f, x, y));
    return m;
}

/// 1D flavors (grid dim 1): y ranges are ignored.
inline double line_mean(const osc::GridFunction& f, int x0, int x1, bool absolute = false) {
    double s = 0.0;
    for (int x = x0; x < x1; ++x) s += absolute ? std::abs(f[x]) : f[x];
    return s / double(x1 - x0);
}

// --- maximal function ------------------------------------------------------

inline std::vector<double> maximal_2d(const osc::GridFunction& f) {
    int nx = f.res(0), ny = f.res(1);
    std::vector<double> out(f.size(), -std::numeric_limits<double>::infinity());
    for (const Rect& r : all_rects(nx, ny)) {
        double avg = rect_mean(f, r, true);
        for (int y = r.y0; y < r.y1; ++y)
            for (int x = r.x0; x < r.x1; ++x) {
                double& o = out[std::int64_t(y) * nx + x];
                o = std::max(o, avg);
            }
    }
    return out;
}

inline std::vector<double> maximal_1d(const osc::GridFunction& f) {
    int nx = f.res(0);
    std::vector<double> out(nx, -std::numeric_limits<double>::infinity());
    for (int x0 = 0; x0 < nx; ++x0)
        for (int x1 = x0 + 1; x1 <= nx; ++x1) {
            double avg = line_mean(f, x0, x1, true);
            for (int x = x0; x < x1; ++x) out[x] = std::max(out[x], avg);
        }
    return out;
}

// --- norms over the full rectangle family ----------------------------------

inline double bmo_2d(const osc::GridFunction& f, double p) {
    double best = 0.0;
    for (const Rect& r : all_rects(f.res(0), f.res(1))) {
        double mu = rect_mean(f, r);
        double acc = 0.0;
        for (int y = r.y0; y < r.y1; ++y)
            for (int x = r.x0; x < r.x1; ++x) acc += std::pow(std::abs(value_at(f, x, y) - mu), p);
        best = std::max(best, std::pow(acc / double(r.cells()), 1.0 / p));
    }
    return best;
}

inline double blo_2d(const osc::GridFunction& f) {
    double best = 0.0;
    for (const Rect& r : all_rects(f.res(0), f.res(1)))
        best = std::max(best, rect_mean(f, r) - rect_min(f, r));
    return best;
}

inline double bmo_1d(const osc::GridFunction& f, double p) {
    double best = 0.0;
    int nx = f.res(0);
    for (int x0 = 0; x0 < nx; ++x0)
        for (int x1 = x0 + 1; x1 <= nx; ++x1) {
            double mu = line_mean(f, x0, x1);
            double acc = 0.0;
            for (int x = x0; x < x1; ++x) acc += std::pow(std::abs(f[x] - mu), p);
            best = std::max(best, std::pow(acc / double(x1 - x0), 1.0 / p));
        }
    return best;
}

inline double blo_1d(const osc::GridFunction& f) {
    double best = 0.0;
    int nx = f.res(0);
    for (int x0 = 0; x0 < nx; ++x0)
        for (int x1 = x0 + 1; x1 <= nx; ++x1) {
            double mu = line_mean(f, x0, x1);
            double mn = std::numeric_limits<double>::infinity();
            for (int x = x0; x < x1; ++x) mn = std::min(mn, f[x]);
            best = std::max(best, mu - mn);
        }
    return best;
}

// --- rectangular norms (k = 2, interval x interval) ------------------------

inline double rec_bmo_stat(const osc::GridFunction& f, const Rect& r) {
    double m = rect_mean(f, r);
    double acc = 0.0;
    for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) {
            double colmean = 0.0;
            for (int yy = r.y0; yy < r.y1; ++yy) colmean += value_at(f, x, yy);
            colmean /= double(r.y1 - r.y0);
            double rowmean = 0.0;
            for (int xx = r.x0; xx < r.x1; ++xx) rowmean += value_at(f, xx, y);
            rowmean /= double(r.x1 - r.x0);
            acc += std::abs(value_at(f, x, y) - colmean - rowmean + m);
        }
    return acc / double(r.cells());
}

inline double rec_blo_stat(const osc::GridFunction& f, const Rect& r) {
    double acc = 0.0;
    for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) {
            double colmin = std::numeric_limits<double>::infinity();
            for (int yy = r.y0; yy < r.y1; ++yy) colmin = std::min(colmin, value_at(f, x, yy));
            double rowmin = std::numeric_limits<double>::infinity();
            for (int xx = r.x0; xx < r.x1; ++xx) rowmin = std::min(rowmin, value_at(f, xx, y));
            acc += value_at(f, x, y) - std::max(colmin, rowmin);
        }
    return acc / double(r.cells());
}

inline double rec_blo_naive_stat(const osc::GridFunction& f, const Rect& r) {
    double gmin = rect_min(f, r);
    double acc = 0.0;
    for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) {
            double colmin = std::numeric_limits<double>::infinity();
            for (int yy = r.y0; yy < r.y1; ++yy) colmin = std::min(colmin, value_at(f, x, yy));
            double rowmin = std::numeric_limits<double>::infinity();
            for (int xx = r.x0; xx < r.x1; ++xx) rowmin = std::min(rowmin, value_at(f, xx, y));
            acc += std::abs(value_at(f, x, y) - colmin - rowmin + gmin);
        }
    return acc / double(r.cells());
}

inline double rec_bmo_2d(const osc::GridFunction& f) {
    double best = 0.0;
    for (const Rect& r : all_rects(f.res(0), f.res(1))) best = std::max(best, rec_bmo_stat(f, r));
    return best;
}

inline double rec_blo_2d(const osc::GridFunction& f) {
    double best = 0.0;
    for (const Rect& r : all_rects(f.res(0), f.res(1))) best = std::max(best, rec_blo_stat(f, r));
    return best;
}

inline double rec_blo_naive_2d(const osc::GridFunction& f) {
    double best = 0.0;
    for (const Rect& r : all_rects(f.res(0), f.res(1)))
        best = std::max(best, rec_blo_naive_stat(f, r));
    return best;
}

/// lower norm: supremum over slices of the interval norm of the slice
inline double lower_blo_2d(const osc::GridFunction& f, int factor) {
    int nx = f.res(0), ny = f.res(1);
    double best = 0.0;
    if (factor == 0) {
        for (int y = 0; y < ny; ++y)
            for (int x0 = 0; x0 < nx; ++x0)
                for (int x1 = x0 + 1; x1 <= nx; ++x1) {
                    double mu = 0.0, mn = std::numeric_limits<double>::infinity();
                    for (int x = x0; x < x1; ++x) {
                        mu += value_at(f, x, y);
                        mn = std::min(mn, value_at(f, x, y));
                    }
                    best = std::max(best, mu / double(x1 - x0) - mn);
                }
    } else {
        for (int x = 0; x < nx; ++x)
            for (int y0 = 0; y0 < ny; ++y0)
                for (int y1 = y0 + 1; y1 <= ny; ++y1) {
                    double mu = 0.0, mn = std::numeric_limits<double>::infinity();
                    for (int y = y0; y < y1; ++y) {
                        mu += value_at(f, x, y);
                        mn = std::min(mn, value_at(f, x, y));
                    }
                    best = std::max(best, mu / double(y1 - y0) - mn);
                }
    }
    return best;
}

}  // namespace oracle
