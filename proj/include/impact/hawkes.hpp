#pragma once

// Univariate Hawkes process with exponential kernel
//   nu_t = nu + int_0^t A e^{-B(t-s)} dN_s
// simulation by thinning, O(n) log-likelihood with gradient, maximum
// likelihood fit, and the branching-ratio to resilience map.

#include "impact/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace impact {

inline constexpr double kStationarityMargin = 1e-6;

struct HawkesParameters {
    double nu{0.0}; // base intensity, 1/s
    double A{0.0};  // jump in intensity per event, 1/s
    double B{0.0};  // kernel decay, 1/s

    [[nodiscard]] double branching_ratio() const { return A / B; }

    void validate() const {
        detail::require(std::isfinite(nu) && nu > 0.0, "nu must be positive");
        detail::require(std::isfinite(A) && A >= 0.0, "A must be nonnegative");
        detail::require(std::isfinite(B) && B > 0.0, "B must be positive");
        detail::require(A / B < 1.0, "stationarity requires A/B < 1");
    }

    // Long-run event rate nu / (1 - A/B).
    [[nodiscard]] double stationary_rate() const { return nu / (1.0 - branching_ratio()); }
};

struct EventTimes {
    std::vector<double> times; // strictly increasing, seconds
    double horizon{0.0};       // observation end, >= last event

    EventTimes() = default;
    EventTimes(std::vector<double> t, double h) : times(std::move(t)), horizon(h) {}
    explicit EventTimes(std::vector<double> t) : times(std::move(t)) {
        horizon = times.empty() ? 0.0 : times.back();
    }

    [[nodiscard]] std::size_t size() const noexcept { return times.size(); }

    void validate() const {
        detail::require(!times.empty(), "event stream is empty");
        detail::require(times.front() >= 0.0, "event times must be nonnegative");
        for (std::size_t i = 1; i < times.size(); ++i) {
            detail::require(times[i] > times[i - 1], "event times must be strictly increasing");
        }
        detail::require(horizon >= times.back(), "horizon must not precede the last event");
    }
};

struct LikelihoodValue {
    double value{0.0};
    std::array<double, 3> gradient{}; // d/d(nu, A, B)
};

namespace detail {

template <bool WithGradient>
LikelihoodValue hawkes_loglik(const HawkesParameters& p, const EventTimes& ev) {
    const double nu = p.nu, a = p.A, b = p.B;
    const double horizon = std::max(ev.horizon, ev.times.back());
    LikelihoodValue out;
    double r = 0.0;  // R(i)
    double dr = 0.0; // dR(i)/dB
    double sum_log = 0.0, g_nu = 0.0, g_a = 0.0, g_b = 0.0;
    for (std::size_t i = 0; i < ev.times.size(); ++i) {
        if (i > 0) {
            const double dt = ev.times[i] - ev.times[i - 1];
            const double e = std::exp(-b * dt);
            if constexpr (WithGradient) dr = e * (dr - dt * (1.0 + r));
            r = e * (1.0 + r);
        }
        const double intensity = nu + a * r;
        if (!(intensity > 0.0)) throw Error("Hawkes intensity is not positive at an event");
        sum_log += std::log(intensity);
        if constexpr (WithGradient) {
            g_nu += 1.0 / intensity;
            g_a += r / intensity;
            g_b += a * dr / intensity;
        }
    }
    double comp = 0.0;    // sum (e^{-B(H-t_i)} - 1)
    double d_comp = 0.0;  // sum -(H-t_i) e^{-B(H-t_i)}
    for (double t : ev.times) {
        const double e = std::exp(-b * (horizon - t));
        comp += e - 1.0;
        if constexpr (WithGradient) d_comp -= (horizon - t) * e;
    }
    out.value = sum_log - nu * horizon + a / b * comp;
    if constexpr (WithGradient) {
        out.gradient[0] = g_nu - horizon;
        out.gradient[1] = g_a + comp / b;
        out.gradient[2] = g_b - a / (b * b) * comp + a / b * d_comp;
    }
    return out;
}

} // namespace detail

// Log-likelihood over [0, H], H = max(horizon, last event). No history before the first event.
[[nodiscard]] inline double log_likelihood(const HawkesParameters& params, const EventTimes& events) {
    detail::require(!events.times.empty(), "event stream is empty");
    return detail::hawkes_loglik<false>(params, events).value;
}

[[nodiscard]] inline LikelihoodValue log_likelihood_with_gradient(const HawkesParameters& params,
                                                                  const EventTimes& events) {
    detail::require(!events.times.empty(), "event stream is empty");
    return detail::hawkes_loglik<true>(params, events);
}

struct HawkesFitOptions {
    std::size_t min_events{100};
    std::size_t max_iterations{500};
    double gradient_tolerance{1e-6}; // on the log-parameter gradient, relative to 1 + |l|/n
    bool parallel{true};
};

struct HawkesFit {
    HawkesParameters params{};
    double log_likelihood{0.0};
    double gradient_norm{0.0};
    std::size_t iterations{0};
    std::size_t starts{0};
    bool converged{false};
    bool bound_active{false};
};

namespace detail {

struct StartResult {
    std::array<double, 3> theta{};
    double value{-std::numeric_limits<double>::infinity()};
    double gradient_norm{std::numeric_limits<double>::infinity()};
    std::size_t iterations{0};
    bool converged{false};
};

inline HawkesParameters from_log(const std::array<double, 3>& th) {
    return {std::exp(th[0]), std::exp(th[1]), std::exp(th[2])};
}

// Objective in (log nu, log A, log B) with a weak log barrier on A/B; -inf outside the feasible region.
inline double penalized(const EventTimes& ev, const std::array<double, 3>& th, std::array<double, 3>* grad,
                        double barrier) {
    const auto p = from_log(th);
    const double slack = 1.0 - kStationarityMargin - p.A / p.B;
    if (!(slack > 0.0) || !std::isfinite(p.nu) || !std::isfinite(p.A) || !std::isfinite(p.B)) {
        return -std::numeric_limits<double>::infinity();
    }
    const auto l = hawkes_loglik<true>(p, ev);
    if (!std::isfinite(l.value)) return -std::numeric_limits<double>::infinity();
    if (grad) {
        // d(A/B)/dlogA = A/B, d(A/B)/dlogB = -A/B.
        const double rb = p.A / p.B;
        (*grad)[0] = l.gradient[0] * p.nu;
        (*grad)[1] = l.gradient[1] * p.A - barrier * rb / slack;
        (*grad)[2] = l.gradient[2] * p.B + barrier * rb / slack;
    }
    return l.value + barrier * std::log(slack);
}

inline double inf_norm(const std::array<double, 3>& g) {
    return std::max({std::abs(g[0]), std::abs(g[1]), std::abs(g[2])});
}

// BFGS ascent with backtracking line search.
inline StartResult bfgs_ascent(const EventTimes& ev, std::array<double, 3> th, const HawkesFitOptions& opt) {
    const double n = static_cast<double>(ev.size());
    const double barrier = 1e-9 * n;
    StartResult res;
    std::array<double, 3> g{};
    double f = penalized(ev, th, &g, barrier);
    if (!std::isfinite(f)) return res;
    std::array<std::array<double, 3>, 3> h{}; // inverse Hessian of -f
    const auto reset = [&] {
        const double scale = 1.0 / n;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) h[i][j] = i == j ? scale : 0.0;
    };
    reset();
    std::size_t it = 0;
    for (; it < opt.max_iterations; ++it) {
        const double tol = opt.gradient_tolerance * (1.0 + std::abs(f) / n) * std::sqrt(n);
        if (inf_norm(g) < tol) {
            res.converged = true;
            break;
        }
        std::array<double, 3> dir{};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) dir[i] += h[i][j] * g[j];
        double slope = dir[0] * g[0] + dir[1] * g[1] + dir[2] * g[2];
        if (!(slope > 0.0)) {
            reset();
            for (int i = 0; i < 3; ++i) dir[i] = h[i][i] * g[i];
            slope = dir[0] * g[0] + dir[1] * g[1] + dir[2] * g[2];
        }
        const double dmax = inf_norm(dir);
        double step = dmax > 2.0 ? 2.0 / dmax : 1.0;
        std::array<double, 3> th_new{}, g_new{};
        double f_new = -std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int k = 0; k < 60; ++k) {
            for (int i = 0; i < 3; ++i) th_new[i] = th[i] + step * dir[i];
            f_new = penalized(ev, th_new, &g_new, barrier);
            if (std::isfinite(f_new) && f_new >= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // No ascent possible along the quasi-Newton direction: at numerical optimum.
            res.converged = inf_norm(g) < 1e3 * opt.gradient_tolerance * (1.0 + std::abs(f) / n) * std::sqrt(n);
            break;
        }
        std::array<double, 3> s{}, y{};
        for (int i = 0; i < 3; ++i) {
            s[i] = th_new[i] - th[i];
            y[i] = g[i] - g_new[i]; // gradient of -f
        }
        const double sy = s[0] * y[0] + s[1] * y[1] + s[2] * y[2];
        if (sy > 1e-12 * std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]) *
                     std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])) {
            std::array<double, 3> hy{};
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) hy[i] += h[i][j] * y[j];
            const double yhy = y[0] * hy[0] + y[1] * hy[1] + y[2] * hy[2];
            const double rho = 1.0 / sy;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    h[i][j] += (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
        const bool stalled = std::abs(f_new - f) <= 1e-15 * std::abs(f);
        th = th_new;
        g = g_new;
        f = f_new;
        if (stalled) {
            res.converged = inf_norm(g) < 1e3 * opt.gradient_tolerance * (1.0 + std::abs(f) / n) * std::sqrt(n);
            ++it;
            break;
        }
    }
    res.theta = th;
    res.value = f;
    res.gradient_norm = inf_norm(g);
    res.iterations = it;
    return res;
}

inline std::vector<std::array<double, 3>> heuristic_starts(const EventTimes& ev) {
    const double n = static_cast<double>(ev.size());
    const double horizon = std::max(ev.horizon, ev.times.back()) - 0.0;
    const double rate = n / horizon;
    std::vector<double> gaps;
    gaps.reserve(ev.size());
    for (std::size_t i = 1; i < ev.size(); ++i) gaps.push_back(ev.times[i] - ev.times[i - 1]);
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
    const double median_gap = std::max(gaps[gaps.size() / 2], 1e-12);
    // Clustered streams have median gaps well below the mean gap; the ratio
    // suggests a kernel decay of order 1/median gap.
    const double b_guess = std::max(1.0 / median_gap, 2.0 * rate);
    const std::array<double, 5> branching{0.1, 0.3, 0.5, 0.7, 0.9};
    const std::array<double, 5> b_scale{1.0, 0.3, 3.0, 0.1, 10.0};
    std::vector<std::array<double, 3>> out;
    for (std::size_t i = 0; i < branching.size(); ++i) {
        const double b = b_guess * b_scale[i];
        out.push_back({std::log(rate * (1.0 - branching[i])), std::log(branching[i] * b), std::log(b)});
    }
    return out;
}

} // namespace detail

// Maximum-likelihood fit subject to nu > 0, A >= 0, B > 0, A/B < 1 - 1e-6.
[[nodiscard]] inline HawkesFit fit_mle(const EventTimes& events, std::optional<HawkesParameters> init = std::nullopt,
                                       const HawkesFitOptions& options = {}) {
    events.validate();
    if (events.size() < options.min_events) {
        throw DataError("Hawkes fit needs at least " + std::to_string(options.min_events) + " events, got " +
                        std::to_string(events.size()));
    }
    const double first_gap = events.times[1] - events.times[0];
    bool all_equal = true;
    for (std::size_t i = 2; i < events.size() && all_equal; ++i) {
        all_equal = std::abs(events.times[i] - events.times[i - 1] - first_gap) <= 1e-12 * first_gap;
    }
    if (all_equal) throw DataError("degenerate event stream: all inter-arrival times are identical");

    auto starts = detail::heuristic_starts(events);
    if (init) {
        init->validate();
        starts.insert(starts.begin(), {std::log(init->nu), std::log(std::max(init->A, 1e-12 * init->B)),
                                       std::log(init->B)});
    }
    std::vector<detail::StartResult> results(starts.size());
    if (options.parallel) {
        std::vector<std::future<detail::StartResult>> jobs;
        for (const auto& s : starts) {
            jobs.push_back(std::async(std::launch::async, [&events, s, &options] {
                return detail::bfgs_ascent(events, s, options);
            }));
        }
        for (std::size_t i = 0; i < jobs.size(); ++i) results[i] = jobs[i].get();
    } else {
        for (std::size_t i = 0; i < starts.size(); ++i) results[i] = detail::bfgs_ascent(events, starts[i], options);
    }
    // Deterministic reduction: best value, ties broken by start order.
    std::size_t best = 0;
    for (std::size_t i = 1; i < results.size(); ++i) {
        if (results[i].value > results[best].value) best = i;
    }
    const auto& r = results[best];
    if (!std::isfinite(r.value)) throw ConvergenceError("Hawkes fit failed: no feasible start");
    if (!r.converged) {
        throw ConvergenceError("Hawkes fit did not converge after " + std::to_string(r.iterations) +
                               " iterations (gradient norm " + std::to_string(r.gradient_norm) + ")");
    }
    HawkesFit fit;
    fit.params = detail::from_log(r.theta);
    fit.log_likelihood = log_likelihood(fit.params, events);
    fit.gradient_norm = r.gradient_norm;
    fit.iterations = r.iterations;
    fit.starts = starts.size();
    fit.converged = true;
    fit.bound_active = fit.params.branching_ratio() > 1.0 - 1e-4;
    return fit;
}

// Ogata thinning on [0, horizon].
[[nodiscard]] inline EventTimes simulate(const HawkesParameters& params, double horizon, std::uint64_t seed) {
    params.validate();
    detail::require(horizon > 0.0, "horizon must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    EventTimes out;
    out.horizon = horizon;
    double t = 0.0;
    double excitation = 0.0; // intensity above nu at time t
    for (;;) {
        const double bound = params.nu + excitation;
        const double wait = -std::log1p(-unif(rng)) / bound;
        t += wait;
        if (t > horizon) break;
        excitation *= std::exp(-params.B * wait);
        if (unif(rng) * bound <= params.nu + excitation) {
            if (!out.times.empty() && t <= out.times.back()) continue;
            out.times.push_back(t);
            excitation += params.A;
        }
    }
    return out;
}

// rho = (1 - A/B) / (T/2).
[[nodiscard]] inline double resilience_from_branching(double branching_ratio, double horizon) {
    detail::require(horizon > 0.0, "horizon must be positive");
    if (!(branching_ratio < 1.0)) throw DomainError("stationarity violated: A/B >= 1");
    detail::require(branching_ratio >= 0.0, "branching ratio must be nonnegative");
    return (1.0 - branching_ratio) / (0.5 * horizon);
}

[[nodiscard]] inline double resilience_from_branching(const HawkesParameters& params, double horizon) {
    return resilience_from_branching(params.branching_ratio(), horizon);
}

// Expected first-generation children of an order at t_i by time T: (A/B)(1 - e^{-B(T - t_i)}).
[[nodiscard]] inline double child_order_expectation(const HawkesParameters& params, double t_i, double horizon) {
    detail::require(t_i >= 0.0 && t_i <= horizon, "t_i must lie in [0, T]");
    return params.branching_ratio() * -std::expm1(-params.B * (horizon - t_i));
}

// Children of a TWAP over [0, T] of x shares: x (A/B) (1 - (1 - e^{-BT}) / (BT)).
[[nodiscard]] inline double twap_child_orders(const HawkesParameters& params, double x, double horizon) {
    const double bt = params.B * horizon;
    return x * params.branching_ratio() * (1.0 + std::expm1(-bt) / bt);
}

} // namespace impact
