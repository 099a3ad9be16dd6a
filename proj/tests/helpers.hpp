#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace testutil {

// Composite Simpson rule with n (even) subintervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n % 2 != 0) ++n;
    const double h = (b - a) / n;
    double total = f(a) + f(b);
    for (int i = 1; i < n; ++i) total += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return total * h / 3.0;
}

// Kolmogorov-Smirnov statistic of a sample against the unit exponential.
inline double ks_statistic_exp1(std::vector<double> sample) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double cdf = 1.0 - std::exp(-sample[i]);
        d = std::max(d, std::abs(cdf - (i + 1) / n));
        d = std::max(d, std::abs(cdf - i / n));
    }
    return d;
}

// Critical value of the two-sided KS test at significance 0.01 (asymptotic).
inline double ks_critical_001(std::size_t n) {
    return 1.62762 / std::sqrt(static_cast<double>(n));
}

} // namespace testutil
