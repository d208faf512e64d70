#pragma once

// Optimal liquidation under instantaneous, permanent and transient impact:
// closed-form schedule, its two benchmark limits, the transient impact state
// Y_t, execution cost functionals and first-order optimality checks.

#include "impact/error.hpp"
#include "impact/numerics.hpp"
#include "impact/units.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace impact {

inline constexpr std::size_t kDefaultGridPoints = 2049;

struct ImpactParameters {
    double eta{0.0};    // instantaneous, price-units per share
    double gamma{0.0};  // transient, price-units per share
    double lambda{0.0}; // permanent, price-units per share
    double rho{0.0};    // resilience, 1/s
    PriceUnit unit{PriceUnit::basis_point};

    void validate() const {
        detail::require(std::isfinite(eta) && eta > 0.0, "eta must be positive");
        detail::require(std::isfinite(rho) && rho > 0.0, "rho must be positive");
        detail::require(std::isfinite(gamma) && gamma >= 0.0, "gamma must be nonnegative");
        detail::require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be nonnegative");
    }

    // sqrt(rho * (rho + gamma/eta)); >= rho with equality iff gamma == 0.
    [[nodiscard]] double k() const { return std::sqrt(rho * (rho + gamma / eta)); }
    [[nodiscard]] double impact_ratio() const { return gamma / eta; }
};

struct LiquidationProblem {
    double x0{0.0};
    double horizon{0.0};
    ImpactParameters params{};

    void validate() const {
        detail::require(std::isfinite(x0) && x0 > 0.0, "x0 must be positive");
        detail::require(std::isfinite(horizon) && horizon > 0.0, "horizon must be positive");
        params.validate();
    }
};

enum class StrategyKind { all, ins, tmp, custom };

[[nodiscard]] constexpr std::string_view to_string(StrategyKind kind) noexcept {
    switch (kind) {
    case StrategyKind::all: return "ALL";
    case StrategyKind::ins: return "INS";
    case StrategyKind::tmp: return "TMP";
    case StrategyKind::custom: return "custom";
    }
    return "?";
}

namespace detail {

inline void require_time(double t, double horizon) {
    require(t >= 0.0 && t <= horizon, "t must lie in [0, T]");
}

// Precomputed constants of the closed-form optimal schedule. Everything is
// divided through by cosh(kT/2) so that large kT does not overflow, and the
// combination k^2 eta - gamma rho is replaced by the identical rho^2 eta.
class OptimalForm {
public:
    explicit OptimalForm(const LiquidationProblem& p) : x0_(p.x0), horizon_(p.horizon) {
        const auto& q = p.params;
        k_ = q.k();
        half_ = 0.5 * k_ * horizon_;
        const double th = std::tanh(half_);
        const double d = q.rho * q.rho * q.eta;
        rate_const_ = k_ * x0_ * d * (q.rho + k_ * th);
        rate_cosh_ = k_ * x0_ * q.gamma * q.rho * q.rho;
        const double den = k_ * q.rho * horizon_ * d
                           + th * (2.0 * q.gamma * q.rho * q.rho + k_ * k_ * q.rho * q.rho * q.eta * horizon_);
        if (!(den > 0.0) || !std::isfinite(den)) {
            throw DomainError("degenerate impact parameters: optimal-rate denominator is not positive");
        }
        inv_den_ = 1.0 / den;
        ratio_ = q.gamma / q.eta;
        path_a_ = th * ratio_;
        path_b_ = k_ * q.rho + k_ * k_ * th;
        path_den_ = 2.0 * path_a_ + path_b_ * horizon_;
    }

    [[nodiscard]] double rate(double t) const {
        const double c = numerics::cosh_ratio(k_ * (t - 0.5 * horizon_), half_);
        return (rate_const_ + rate_cosh_ * c) * inv_den_;
    }

    [[nodiscard]] double path(double t) const {
        const double s = numerics::sinh_cosh_ratio(k_ * (t - 0.5 * horizon_), half_);
        return x0_ - x0_ * (path_a_ + path_b_ * t + ratio_ * s) / path_den_;
    }

private:
    double x0_;
    double horizon_;
    double k_{};
    double half_{};
    double rate_const_{};
    double rate_cosh_{};
    double inv_den_{};
    double ratio_{};
    double path_a_{};
    double path_b_{};
    double path_den_{};
};

} // namespace detail

[[nodiscard]] inline double twap_rate(double x0, double horizon) {
    detail::require(horizon > 0.0, "horizon must be positive");
    return x0 / horizon;
}

[[nodiscard]] inline double twap_path(double x0, double horizon, double t) {
    detail::require(horizon > 0.0, "horizon must be positive");
    detail::require_time(t, horizon);
    return x0 * (1.0 - t / horizon);
}

// Optimal trading rate xi*_t. gamma == 0 reduces to TWAP.
[[nodiscard]] inline double optimal_rate(const LiquidationProblem& problem, double t) {
    problem.validate();
    detail::require_time(t, problem.horizon);
    if (problem.params.gamma == 0.0) {
        return twap_rate(problem.x0, problem.horizon);
    }
    const double v = detail::OptimalForm(problem).rate(t);
    if (!std::isfinite(v)) {
        throw DomainError("optimal rate is not finite for these parameters");
    }
    return v;
}

[[nodiscard]] inline double optimal_path(const LiquidationProblem& problem, double t) {
    problem.validate();
    detail::require_time(t, problem.horizon);
    if (problem.params.gamma == 0.0) {
        return twap_path(problem.x0, problem.horizon, t);
    }
    if (t == problem.horizon) return 0.0;
    if (t == 0.0) return problem.x0;
    return detail::OptimalForm(problem).path(t);
}

[[nodiscard]] inline double ow_block_size(double x0, double rho, double horizon) {
    detail::require(rho > 0.0, "rho must be positive");
    detail::require(horizon > 0.0, "horizon must be positive");
    return x0 / (rho * horizon + 2.0);
}

// Pure-transient limit: block x0/(rho T + 2) at both ends, constant rate in between.
// Heaviside convention H_a(t) = 1 for t >= a, so the value at t is post-trade.
[[nodiscard]] inline double ow_limit_path(double x0, double rho, double horizon, double t) {
    const double block = ow_block_size(x0, rho, horizon);
    detail::require_time(t, horizon);
    const double h0 = t >= 0.0 ? 1.0 : 0.0;
    const double ht = t >= horizon ? 1.0 : 0.0;
    return x0 - block * (h0 + rho * t + ht);
}

// A liquidation program on [0, T]: continuous rate plus optional block trades
// at t = 0 and t = T. The grid is the uniform Simpson grid used for every
// tabulation and cost integral of this schedule.
class TradingSchedule {
public:
    using RateFn = std::function<double(double)>;
    using PathFn = std::function<double(double)>;

    TradingSchedule(StrategyKind kind, double x0, double horizon, RateFn rate, PathFn path,
                    double initial_block, double terminal_block, std::size_t grid_points)
        : kind_(kind), x0_(x0), horizon_(horizon), rate_(std::move(rate)), path_(std::move(path)),
          initial_block_(initial_block), terminal_block_(terminal_block),
          grid_(numerics::linspace(0.0, horizon, numerics::simpson_points(grid_points))) {
        detail::require(x0 > 0.0, "x0 must be positive");
        detail::require(horizon > 0.0, "horizon must be positive");
        if (!path_) {
            build_cumulative();
        }
    }

    [[nodiscard]] StrategyKind kind() const noexcept { return kind_; }
    [[nodiscard]] double x0() const noexcept { return x0_; }
    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    [[nodiscard]] double initial_block() const noexcept { return initial_block_; }
    [[nodiscard]] double terminal_block() const noexcept { return terminal_block_; }
    [[nodiscard]] std::span<const double> grid() const noexcept { return grid_; }
    [[nodiscard]] double step() const noexcept { return grid_[1] - grid_[0]; }

    [[nodiscard]] double rate(double t) const { return rate_(t); }

    // Holdings X_t (right-continuous: includes the block at t if any).
    [[nodiscard]] double holdings(double t) const {
        detail::require_time(t, horizon_);
        if (path_) return path_(t);
        const double h = step();
        auto i = static_cast<std::size_t>(std::floor(t / h));
        i = std::min(i, grid_.size() - 1);
        if (i > 0 && grid_[i] > t) --i;
        double traded = cumulative_[i];
        if (t > grid_[i]) {
            traded += numerics::simpson(rate_, grid_[i], t, 2);
        }
        double x = x0_ - initial_block_ - traded;
        if (t >= horizon_) x -= terminal_block_;
        return x;
    }

    [[nodiscard]] std::vector<double> sampled_rate() const {
        std::vector<double> out(grid_.size());
        std::transform(grid_.begin(), grid_.end(), out.begin(), rate_);
        return out;
    }

    // initial block + integral of the rate + terminal block. The integral is
    // adaptive so that boundary layers narrower than the grid step still resolve.
    [[nodiscard]] double delivered() const {
        using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
        const double traded = Quad::integrate(rate_, 0.0, horizon_, 20, 1e-14);
        return initial_block_ + traded + terminal_block_;
    }

private:
    void build_cumulative() {
        cumulative_.assign(grid_.size(), 0.0);
        for (std::size_t i = 1; i < grid_.size(); ++i) {
            cumulative_[i] = cumulative_[i - 1] + numerics::simpson(rate_, grid_[i - 1], grid_[i], 2);
        }
    }

    StrategyKind kind_;
    double x0_;
    double horizon_;
    RateFn rate_;
    PathFn path_;
    double initial_block_;
    double terminal_block_;
    std::vector<double> grid_;
    std::vector<double> cumulative_;
};

[[nodiscard]] inline TradingSchedule twap_schedule(double x0, double horizon,
                                                   std::size_t grid_points = kDefaultGridPoints) {
    const double r = twap_rate(x0, horizon);
    return TradingSchedule(
        StrategyKind::ins, x0, horizon, [r](double) { return r; },
        [x0, horizon](double t) { return twap_path(x0, horizon, t); }, 0.0, 0.0, grid_points);
}

[[nodiscard]] inline TradingSchedule optimal_schedule(const LiquidationProblem& problem,
                                                      std::size_t grid_points = kDefaultGridPoints) {
    problem.validate();
    if (problem.params.gamma == 0.0) {
        auto s = twap_schedule(problem.x0, problem.horizon, grid_points);
        return TradingSchedule(
            StrategyKind::all, problem.x0, problem.horizon, [r = s.rate(0.0)](double) { return r; },
            [x0 = problem.x0, h = problem.horizon](double t) { return twap_path(x0, h, t); }, 0.0, 0.0,
            grid_points);
    }
    detail::OptimalForm form(problem);
    const double horizon = problem.horizon;
    const double x0 = problem.x0;
    return TradingSchedule(
        StrategyKind::all, x0, horizon, [form](double t) { return form.rate(t); },
        [form, x0, horizon](double t) {
            if (t <= 0.0) return x0;
            if (t >= horizon) return 0.0;
            return form.path(t);
        },
        0.0, 0.0, grid_points);
}

[[nodiscard]] inline TradingSchedule ow_schedule(double x0, double rho, double horizon,
                                                 std::size_t grid_points = kDefaultGridPoints) {
    const double block = ow_block_size(x0, rho, horizon);
    const double r = rho * block;
    return TradingSchedule(
        StrategyKind::tmp, x0, horizon, [r](double) { return r; },
        [x0, rho, horizon](double t) { return ow_limit_path(x0, rho, horizon, t); }, block, block,
        grid_points);
}

// Arbitrary rate function; holdings are integrated numerically.
[[nodiscard]] inline TradingSchedule custom_schedule(double x0, double horizon, TradingSchedule::RateFn rate,
                                                     std::size_t grid_points = kDefaultGridPoints,
                                                     double initial_block = 0.0, double terminal_block = 0.0) {
    return TradingSchedule(StrategyKind::custom, x0, horizon, std::move(rate), nullptr, initial_block,
                           terminal_block, grid_points);
}

// Y sampled on a grid. Values are left limits: Y(0) = 0 and Y(T) excludes a
// terminal block; an initial block enters immediately after t = 0.
struct ImpactPath {
    std::vector<double> times;
    std::vector<double> values;
    bool coarse_grid{false}; // step * rho > 0.1
};

// Solves dY = (gamma xi - rho Y) dt exactly between grid points; the forcing
// integral on each step uses three-point Simpson with the exponential weight.
[[nodiscard]] inline ImpactPath temporary_impact_path(const TradingSchedule& schedule, double gamma, double rho,
                                                      std::span<const double> grid) {
    detail::require(gamma >= 0.0, "gamma must be nonnegative");
    detail::require(rho > 0.0, "rho must be positive");
    detail::require(grid.size() >= 2, "grid needs at least two points");
    ImpactPath out;
    out.times.assign(grid.begin(), grid.end());
    out.values.assign(grid.size(), 0.0);
    double y = gamma * schedule.initial_block();
    double prev_rate = schedule.rate(grid[0]);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double h = grid[i] - grid[i - 1];
        detail::require(h > 0.0, "grid must be strictly increasing");
        if (h * rho > 0.1) out.coarse_grid = true;
        const double decay = std::exp(-rho * h);
        const double mid_rate = schedule.rate(grid[i - 1] + 0.5 * h);
        const double next_rate = schedule.rate(grid[i]);
        const double forcing =
            h / 6.0 * (prev_rate * decay + 4.0 * mid_rate * std::exp(-0.5 * rho * h) + next_rate);
        y = decay * y + gamma * forcing;
        out.values[i] = y;
        prev_rate = next_rate;
    }
    return out;
}

[[nodiscard]] inline ImpactPath temporary_impact_path(const TradingSchedule& schedule, double gamma, double rho) {
    return temporary_impact_path(schedule, gamma, rho, schedule.grid());
}

struct CostBreakdown {
    double instantaneous{0.0}; // E_T = eta * int xi^2
    double transient{0.0};     // F_T = int xi Y dt + block terms
    double permanent{0.0};     // G_T = lambda * x0, informational, excluded from total
    double total{0.0};         // E_T + F_T
    double pct_of_notional{0.0};
    PriceUnit unit{PriceUnit::basis_point}; // unit of the price-unit * share figures above
    bool negative_rate{false};
    bool coarse_grid{false};
};

inline constexpr double kLiquidationTolerance = 1e-9;

[[nodiscard]] inline double liquidation_residual(const TradingSchedule& schedule) {
    return schedule.x0() - schedule.delivered();
}

// Expected execution cost of a schedule. Blocks pay Delta * (Y_before + gamma Delta / 2)
// and no instantaneous cost.
[[nodiscard]] inline CostBreakdown execution_cost(const TradingSchedule& schedule, const ImpactParameters& params,
                                                  const UnitConverter& units,
                                                  double tolerance = kLiquidationTolerance) {
    params.validate();
    const double residual = liquidation_residual(schedule);
    if (std::abs(residual) > tolerance * schedule.x0()) {
        throw DomainError("schedule violates the liquidation constraint (residual " + std::to_string(residual) +
                          " shares)");
    }
    const auto grid = schedule.grid();
    const double h = schedule.step();
    const auto rate = schedule.sampled_rate();
    const auto y = temporary_impact_path(schedule, params.gamma, params.rho, grid);

    std::vector<double> sq(rate.size());
    std::vector<double> xy(rate.size());
    bool negative = false;
    for (std::size_t i = 0; i < rate.size(); ++i) {
        sq[i] = rate[i] * rate[i];
        const double yi = i == 0 ? params.gamma * schedule.initial_block() : y.values[i];
        xy[i] = rate[i] * yi;
        negative = negative || rate[i] < 0.0;
    }

    CostBreakdown c;
    c.unit = params.unit;
    c.instantaneous = params.eta * numerics::simpson(sq, h);
    const double b0 = schedule.initial_block();
    const double bt = schedule.terminal_block();
    c.transient = numerics::simpson(xy, h) + b0 * (0.5 * params.gamma * b0) +
                  bt * (y.values.back() + 0.5 * params.gamma * bt);
    c.permanent = params.lambda * schedule.x0();
    c.total = c.instantaneous + c.transient;
    const double notional = schedule.x0() * units.reference_price();
    c.pct_of_notional = 100.0 * units.to_dollars(c.total, params.unit) / notional;
    c.negative_rate = negative;
    c.coarse_grid = y.coarse_grid;
    return c;
}

[[nodiscard]] inline CostBreakdown execution_cost(const TradingSchedule& schedule, const ImpactParameters& params,
                                                  double reference_price, double tick_size = 0.01) {
    return execution_cost(schedule, params, UnitConverter(tick_size, reference_price));
}

namespace detail {

// (gamma / 2 eta) * int_0^T xi_s e^{-rho |t-s|} ds + xi_t, blocks included as point masses.
inline double stationarity_lhs(const TradingSchedule& s, const ImpactParameters& p, double t,
                               std::size_t intervals) {
    const double horizon = s.horizon();
    const auto sub = [&](double len) {
        auto n = static_cast<std::size_t>(std::ceil(static_cast<double>(intervals) * len / horizon));
        return std::max<std::size_t>(n + (n % 2), 2);
    };
    double integral = 0.0;
    if (t > 0.0) {
        integral += numerics::simpson([&](double u) { return s.rate(u) * std::exp(-p.rho * (t - u)); }, 0.0, t,
                                      sub(t));
    }
    if (t < horizon) {
        integral += numerics::simpson([&](double u) { return s.rate(u) * std::exp(-p.rho * (u - t)); }, t,
                                      horizon, sub(horizon - t));
    }
    integral += s.initial_block() * std::exp(-p.rho * t) + s.terminal_block() * std::exp(-p.rho * (horizon - t));
    return p.gamma / (2.0 * p.eta) * integral + s.rate(t);
}

} // namespace detail

inline constexpr std::size_t kStationarityCheckPoints = 257;
inline constexpr std::size_t kStationarityIntervals = 4096;

// Left side of the Wiener-Hopf stationarity equation on a uniform check grid.
[[nodiscard]] inline std::vector<double> stationarity_profile(const TradingSchedule& schedule,
                                                              const ImpactParameters& params,
                                                              std::size_t check_points = kStationarityCheckPoints,
                                                              std::size_t intervals = kStationarityIntervals) {
    params.validate();
    const auto ts = numerics::linspace(0.0, schedule.horizon(), std::max<std::size_t>(check_points, 2));
    std::vector<double> out(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        out[i] = detail::stationarity_lhs(schedule, params, ts[i], intervals);
    }
    return out;
}

// (max - min) / mean of the stationarity left side; zero for the optimal schedule.
[[nodiscard]] inline double stationarity_residual(const TradingSchedule& schedule, const ImpactParameters& params,
                                                  std::size_t check_points = kStationarityCheckPoints,
                                                  std::size_t intervals = kStationarityIntervals) {
    detail::require(params.gamma > 0.0, "stationarity residual requires gamma > 0");
    const auto v = stationarity_profile(schedule, params, check_points, intervals);
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    return (*hi - *lo) / std::abs(mean);
}

// The constant C of the stationarity equation (mean of its left side).
[[nodiscard]] inline double stationarity_constant(const TradingSchedule& schedule, const ImpactParameters& params) {
    const auto v = stationarity_profile(schedule, params);
    double mean = 0.0;
    for (double x : v) mean += x;
    return mean / static_cast<double>(v.size());
}

struct OdeCheck {
    double ode_residual{0.0};      // max |z'' - k^2 z + rho^2 C| / scale over interior points
    double boundary_start{0.0};    // |z'(0) + rho (C - z(0))| / scale
    double boundary_end{0.0};      // |z'(T) - rho (C - z(T))| / scale
    double mass_error{0.0};        // |blocks + int z - x0| / x0
    bool passed{false};

    explicit operator bool() const noexcept { return passed; }
};

inline constexpr double kOdeTolerance = 1e-5;
inline constexpr double kMassTolerance = 1e-8;

// Checks that the rate solves z'' - rho (gamma/eta + rho) z = -rho^2 C with
// z'(0) = -rho (C - z(0)), z'(T) = rho (C - z(T)) and int z = x0, using finite
// differences of the rate function.
[[nodiscard]] inline OdeCheck ode_characterization_check(const TradingSchedule& schedule,
                                                         const ImpactParameters& params, double constant,
                                                         std::size_t interior_points = 65) {
    params.validate();
    const double horizon = schedule.horizon();
    const double k2 = params.rho * (params.gamma / params.eta + params.rho);
    const double k = std::sqrt(k2);
    const double fd = std::min(horizon / 4096.0, 1e-3 / std::max(k, 1.0 / horizon));

    double zmax = 0.0;
    for (double t : schedule.grid()) zmax = std::max(zmax, std::abs(schedule.rate(t)));
    const double ode_scale = k2 * zmax + params.rho * params.rho * std::abs(constant);
    const double bc_scale = params.rho * std::abs(constant) + k * zmax + zmax / horizon;

    OdeCheck out;
    const auto ts = numerics::linspace(0.0, horizon, interior_points + 2);
    for (std::size_t i = 1; i + 1 < ts.size(); ++i) {
        const double t = ts[i];
        const double z = schedule.rate(t);
        const double d2 = (schedule.rate(t + fd) - 2.0 * z + schedule.rate(t - fd)) / (fd * fd);
        const double r = d2 - k2 * z + params.rho * params.rho * constant;
        out.ode_residual = std::max(out.ode_residual, std::abs(r) / ode_scale);
    }
    const double z0 = schedule.rate(0.0);
    const double zt = schedule.rate(horizon);
    const double d0 = (-3.0 * z0 + 4.0 * schedule.rate(fd) - schedule.rate(2.0 * fd)) / (2.0 * fd);
    const double dt = (3.0 * zt - 4.0 * schedule.rate(horizon - fd) + schedule.rate(horizon - 2.0 * fd)) / (2.0 * fd);
    out.boundary_start = std::abs(d0 + params.rho * (constant - z0)) / bc_scale;
    out.boundary_end = std::abs(dt - params.rho * (constant - zt)) / bc_scale;
    out.mass_error = std::abs(liquidation_residual(schedule)) / schedule.x0();
    out.passed = out.ode_residual < kOdeTolerance && out.boundary_start < kOdeTolerance &&
                 out.boundary_end < kOdeTolerance && out.mass_error < kMassTolerance;
    return out;
}

// One row of a tabulated schedule.
struct ScheduleRow {
    double time;
    double rate;
    double holdings;
    double transient_impact;
};

[[nodiscard]] inline std::vector<ScheduleRow> tabulate(const TradingSchedule& schedule, double gamma, double rho) {
    const auto y = temporary_impact_path(schedule, gamma, rho);
    std::vector<ScheduleRow> rows;
    rows.reserve(y.times.size());
    for (std::size_t i = 0; i < y.times.size(); ++i) {
        const double t = y.times[i];
        rows.push_back({t, schedule.rate(t), schedule.holdings(t), y.values[i]});
    }
    return rows;
}

} // namespace impact
