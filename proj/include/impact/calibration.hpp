#pragma once

// Impact-factor estimators: eta from the depth profile, lambda from a
// logistic model of mid-price moves on order imbalance, and assembly of a
// complete parameter record.

#include "impact/error.hpp"
#include "impact/strategy.hpp"
#include "impact/units.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace impact {

struct LevelStats {
    int level{0};
    double mu_plus{0.0};   // limit arrivals, orders/s
    double mu_minus{0.0};  // cancellation rate, 1/s
    double mean_size{0.0}; // shares
    double offset{0.0};    // ticks from mid

    // Expected resting shares V mu+ / mu- of the M/M/inf queue.
    [[nodiscard]] double expected_depth() const {
        detail::require(mu_minus > 0.0, "mu_minus must be positive to compute depth");
        return mean_size * mu_plus / mu_minus;
    }
};

// Cumulative depth Q_i = sum_{j <= i} q_j.
[[nodiscard]] inline std::vector<double> cumulative_depth(std::span<const LevelStats> levels) {
    std::vector<double> q(levels.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        acc += levels[i].expected_depth();
        q[i] = acc;
    }
    return q;
}

struct EtaFit {
    double eta{0.0};       // ticks per share
    double intercept{0.0}; // ticks, estimated half-spread p0
    double r2{0.0};
    std::size_t n_levels{0};
    std::vector<int> excluded; // levels dropped for zero cancellation or zero liquidity
};

// OLS of offset on cumulative depth with free intercept.
[[nodiscard]] inline EtaFit estimate_eta(std::span<const double> depth, std::span<const double> offset) {
    detail::require(depth.size() == offset.size(), "depth and offset must have equal length");
    if (depth.size() < 3) throw DataError("eta regression needs at least 3 levels with positive liquidity");
    const double n = static_cast<double>(depth.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < depth.size(); ++i) {
        mx += depth[i];
        my += offset[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const double dx = depth[i] - mx, dy = offset[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 1e-24 * std::max(1.0, mx * mx) * n)) {
        throw DataError("eta regression is rank deficient: all cumulative depths are equal");
    }
    EtaFit fit;
    fit.eta = sxy / sxx;
    fit.intercept = my - fit.eta * mx;
    fit.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    fit.n_levels = depth.size();
    return fit;
}

// Uses levels with mu- > 0 and positive expected depth; cumulative depth runs over those levels only.
[[nodiscard]] inline EtaFit estimate_eta(std::span<const LevelStats> levels) {
    std::vector<double> depth, offset;
    std::vector<int> excluded;
    double acc = 0.0;
    for (const auto& l : levels) {
        if (!(l.mu_minus > 0.0) || !(l.mu_plus > 0.0) || !(l.mean_size > 0.0)) {
            excluded.push_back(l.level);
            continue;
        }
        acc += l.expected_depth();
        depth.push_back(acc);
        offset.push_back(l.offset);
    }
    auto fit = estimate_eta(depth, offset);
    fit.excluded = std::move(excluded);
    return fit;
}

struct ImbalanceSample {
    std::size_t window{0};
    double delta{0.0}; // sell minus buy market orders
    bool down{false};  // mid moved down in the window
};

[[nodiscard]] inline double logistic(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

struct LogisticFit {
    double b0{0.0};
    double b1{0.0};
    double se_b0{std::numeric_limits<double>::quiet_NaN()};
    double se_b1{std::numeric_limits<double>::quiet_NaN()};
    double log_likelihood{std::numeric_limits<double>::quiet_NaN()};
    std::size_t n_samples{0};
    std::size_t iterations{0};

    static LogisticFit from_coefficients(double b0, double b1) {
        LogisticFit f;
        f.b0 = b0;
        f.b1 = b1;
        return f;
    }

    // P(down | delta).
    [[nodiscard]] double probability_down(double delta) const { return logistic(b0 + b1 * delta); }

    // Equilibrium imbalance where P(down) = 1/2.
    [[nodiscard]] double delta_bar() const {
        if (b1 == 0.0) throw DomainError("equilibrium imbalance undefined for B1 = 0");
        return -b0 / b1;
    }
};

inline constexpr double kLogisticRidge = 1e-8;
inline constexpr double kLogisticTolerance = 1e-10;
inline constexpr std::size_t kLogisticMaxIterations = 100;

[[nodiscard]] inline double logistic_log_likelihood(double b0, double b1, std::span<const ImbalanceSample> s) {
    double l = 0.0;
    for (const auto& x : s) {
        const double z = b0 + b1 * x.delta;
        // log sigma(z) = -log1p(e^{-z}); written to avoid overflow on either side.
        const double lp = z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
        const double lq = z >= 0.0 ? -z - std::log1p(std::exp(-z)) : -std::log1p(std::exp(z));
        l += x.down ? lp : lq;
    }
    return l;
}

// Maximum likelihood by iteratively reweighted least squares.
[[nodiscard]] inline LogisticFit fit_logistic(std::span<const ImbalanceSample> samples) {
    std::size_t downs = 0;
    double min_down = std::numeric_limits<double>::infinity(), max_down = -min_down;
    double min_up = min_down, max_up = -min_down;
    for (const auto& s : samples) {
        if (s.down) {
            ++downs;
            min_down = std::min(min_down, s.delta);
            max_down = std::max(max_down, s.delta);
        } else {
            min_up = std::min(min_up, s.delta);
            max_up = std::max(max_up, s.delta);
        }
    }
    if (downs == 0 || downs == samples.size()) {
        throw DataError("logistic fit needs both down and up moves");
    }
    if (max_up < min_down || max_down < min_up) {
        throw DataError("outcomes are perfectly separated by the imbalance; logistic MLE does not exist");
    }

    double b0 = 0.0, b1 = 0.0;
    double ll = logistic_log_likelihood(b0, b1, samples);
    std::size_t it = 0;
    double h00 = 0.0, h01 = 0.0, h11 = 0.0;
    for (; it < kLogisticMaxIterations; ++it) {
        double g0 = 0.0, g1 = 0.0;
        h00 = h01 = h11 = 0.0;
        for (const auto& s : samples) {
            const double p = logistic(b0 + b1 * s.delta);
            const double w = p * (1.0 - p);
            const double r = (s.down ? 1.0 : 0.0) - p;
            g0 += r;
            g1 += r * s.delta;
            h00 += w;
            h01 += w * s.delta;
            h11 += w * s.delta * s.delta;
        }
        const double a00 = h00 + kLogisticRidge, a11 = h11 + kLogisticRidge;
        const double det = a00 * a11 - h01 * h01;
        if (!(det > 0.0)) throw DataError("logistic fit is degenerate: singular information matrix");
        const double d0 = (a11 * g0 - h01 * g1) / det;
        const double d1 = (a00 * g1 - h01 * g0) / det;
        double step = 1.0;
        double nb0 = b0 + d0, nb1 = b1 + d1;
        double nll = logistic_log_likelihood(nb0, nb1, samples);
        while (nll < ll && step > 1e-10) {
            step *= 0.5;
            nb0 = b0 + step * d0;
            nb1 = b1 + step * d1;
            nll = logistic_log_likelihood(nb0, nb1, samples);
        }
        const double change = std::abs(nll - ll) / std::max(1.0, std::abs(ll));
        b0 = nb0;
        b1 = nb1;
        ll = nll;
        if (change < kLogisticTolerance) {
            ++it;
            break;
        }
    }
    // Information matrix at the solution.
    h00 = h01 = h11 = 0.0;
    for (const auto& s : samples) {
        const double p = logistic(b0 + b1 * s.delta);
        const double w = p * (1.0 - p);
        h00 += w;
        h01 += w * s.delta;
        h11 += w * s.delta * s.delta;
    }
    const double det = h00 * h11 - h01 * h01;
    LogisticFit fit;
    fit.b0 = b0;
    fit.b1 = b1;
    fit.se_b0 = det > 0.0 ? std::sqrt(h11 / det) : std::numeric_limits<double>::infinity();
    fit.se_b1 = det > 0.0 ? std::sqrt(h00 / det) : std::numeric_limits<double>::infinity();
    fit.log_likelihood = ll;
    fit.n_samples = samples.size();
    fit.iterations = it;
    if (!(std::abs(b1) > fit.se_b1)) {
        throw DataError("B1 is zero within one standard error (" + std::to_string(b1) + " +/- " +
                        std::to_string(fit.se_b1) + "); equilibrium imbalance undefined");
    }
    return fit;
}

enum class LambdaVariant {
    exact_increment, // f(delta_bar + 1) - 1/2
    tangent,         // f'(delta_bar) = B1/4
};

struct PermanentImpact {
    double Lambda{0.0}; // ticks per average market order
    double lambda{0.0}; // ticks per share
};

// Lambda = 2 (1/mu) dp Z, lambda = Lambda / L.
[[nodiscard]] inline PermanentImpact permanent_impact(const LogisticFit& fit, double z_bar, double l_bar,
                                                      double mu = 1.0,
                                                      LambdaVariant variant = LambdaVariant::exact_increment) {
    detail::require(z_bar > 0.0, "z_bar must be positive");
    detail::require(l_bar > 0.0, "l_bar must be positive");
    detail::require(mu > 0.0, "mu must be positive");
    double dp = 0.0;
    if (fit.b1 != 0.0) {
        // At delta_bar the logit is zero, so f(delta_bar + 1) = sigma(B1).
        dp = variant == LambdaVariant::exact_increment ? logistic(fit.b1) - 0.5 : 0.25 * fit.b1;
    }
    PermanentImpact out;
    out.Lambda = 2.0 / mu * dp * z_bar;
    out.lambda = out.Lambda / l_bar;
    return out;
}

enum class GammaRule {
    permanent_over_mu, // gamma = lambda / mu
    zero,              // instantaneous-only benchmark
};

// eta and lambda in bps/share, rho in 1/s.
[[nodiscard]] inline ImpactParameters assemble_parameters(double eta_bps, double lambda_bps, double rho,
                                                          GammaRule rule = GammaRule::permanent_over_mu,
                                                          double mu = 1.0) {
    detail::require(eta_bps > 0.0, "eta must be positive");
    detail::require(lambda_bps >= 0.0, "lambda must be nonnegative");
    detail::require(rho > 0.0, "rho must be positive");
    detail::require(mu > 0.0, "mu must be positive");
    ImpactParameters p;
    p.eta = eta_bps;
    p.lambda = lambda_bps;
    p.gamma = rule == GammaRule::permanent_over_mu ? lambda_bps / mu : 0.0;
    p.rho = rho;
    p.unit = PriceUnit::basis_point;
    p.validate();
    return p;
}

} // namespace impact
