#pragma once

#include "impact/error.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace impact::numerics {

[[nodiscard]] inline std::vector<double> linspace(double a, double b, std::size_t n) {
    detail::require(n >= 2, "linspace needs at least two points");
    std::vector<double> out(n);
    const double h = (b - a) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a + h * static_cast<double>(i);
    }
    out.back() = b;
    return out;
}

// Odd point count so that composite Simpson applies; rounds up.
[[nodiscard]] inline std::size_t simpson_points(std::size_t requested) {
    if (requested < 3) return 3;
    return requested % 2 == 1 ? requested : requested + 1;
}

// Composite Simpson over uniformly spaced samples (odd count). Falls back to
// Simpson + one trapezoid panel when the count is even.
[[nodiscard]] inline double simpson(std::span<const double> f, double h) {
    const std::size_t n = f.size();
    if (n < 2) return 0.0;
    if (n == 2) return 0.5 * h * (f[0] + f[1]);
    const std::size_t m = (n % 2 == 1) ? n : n - 1;
    double odd = 0.0;
    double even = 0.0;
    for (std::size_t i = 1; i + 1 < m; ++i) {
        (i % 2 == 1 ? odd : even) += f[i];
    }
    double s = h / 3.0 * (f[0] + 4.0 * odd + 2.0 * even + f[m - 1]);
    if (m != n) {
        s += 0.5 * h * (f[n - 2] + f[n - 1]);
    }
    return s;
}

template <class F>
[[nodiscard]] double simpson(F&& f, double a, double b, std::size_t intervals) {
    if (intervals % 2 == 1) ++intervals;
    if (intervals == 0) intervals = 2;
    const double h = (b - a) / static_cast<double>(intervals);
    double acc = f(a) + f(b);
    for (std::size_t i = 1; i < intervals; ++i) {
        acc += (i % 2 == 1 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
    }
    return acc * h / 3.0;
}

// cosh(x) / cosh(y) without overflow, y >= 0, |x| <= y assumed but not required.
[[nodiscard]] inline double cosh_ratio(double x, double y) {
    const double ax = std::abs(x);
    return std::exp(ax - y) * (1.0 + std::exp(-2.0 * ax)) / (1.0 + std::exp(-2.0 * y));
}

// sinh(x) / cosh(y) without overflow.
[[nodiscard]] inline double sinh_cosh_ratio(double x, double y) {
    const double ax = std::abs(x);
    const double v = std::exp(ax - y) * (1.0 - std::exp(-2.0 * ax)) / (1.0 + std::exp(-2.0 * y));
    return x < 0.0 ? -v : v;
}

} // namespace impact::numerics
