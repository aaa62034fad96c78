#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace testgen {

// Central differences of f at x.
inline std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                              std::span<const double> x0, double h = 1e-6) {
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = f(x);
        x[i] = x0 - h;
        const double fm = f(x);
        x[i] = x0;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// max |a - b| relative to max |b| (absolute when b is tiny).
inline double relative_error(std::span<const double> a, std::span<const double> b) {
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        ref = std::max(ref, std::abs(b[i]));
    }
    return diff / std::max(ref, 1.0e-3);
}

}  // namespace testgen
