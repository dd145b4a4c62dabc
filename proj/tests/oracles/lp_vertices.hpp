#pragma once

// Two-variable LP solved by enumerating the intersections of every pair of
// constraint boundaries (x >= 0 and y >= 0 included) and keeping the best
// feasible one. Only valid for bounded optima.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace oracle {

struct Constraint {
    double a, b, rhs;
    bool ge = false; // a x + b y >= rhs when set, <= otherwise
};

struct Lp2 {
    double cx, cy;
    bool maximize = true;
    std::vector<Constraint> rows;
};

inline bool feasible(const Lp2& lp, double x, double y)
{
    constexpr double eps = 1e-9;
    if (x < -eps || y < -eps) return false;
    for (const auto& r : lp.rows) {
        const double lhs = r.a * x + r.b * y;
        if (r.ge ? lhs < r.rhs - eps : lhs > r.rhs + eps) return false;
    }
    return true;
}

inline std::optional<double> solve(const Lp2& lp)
{
    std::vector<Constraint> lines = lp.rows;
    lines.push_back({1, 0, 0, true});
    lines.push_back({0, 1, 0, true});
    std::optional<double> best;
    for (std::size_t p = 0; p < lines.size(); ++p) {
        for (std::size_t q = p + 1; q < lines.size(); ++q) {
            const auto& l1 = lines[p];
            const auto& l2 = lines[q];
            const double det = l1.a * l2.b - l2.a * l1.b;
            if (std::fabs(det) < 1e-12) continue;
            const double x = (l1.rhs * l2.b - l2.rhs * l1.b) / det;
            const double y = (l1.a * l2.rhs - l2.a * l1.rhs) / det;
            if (!feasible(lp, x, y)) continue;
            const double z = lp.cx * x + lp.cy * y;
            if (!best || (lp.maximize ? z > *best : z < *best)) best = z;
        }
    }
    return best;
}

} // namespace oracle
