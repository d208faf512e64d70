#pragma once

#include "impact/error.hpp"

#include <cmath>
#include <numbers>
#include <string_view>

namespace impact {

// Seconds in the 10:00-15:30 trading window used as one "day" throughout.
inline constexpr double kTradingDaySeconds = 19800.0;

enum class PriceUnit { dollar, basis_point, tick };

[[nodiscard]] constexpr std::string_view to_string(PriceUnit unit) noexcept {
    switch (unit) {
    case PriceUnit::dollar: return "dollar";
    case PriceUnit::basis_point: return "bps";
    case PriceUnit::tick: return "tick";
    }
    return "?";
}

// Single place where tick / basis-point / dollar conversions happen.
// Values are price offsets (per share), so conversion is linear.
class UnitConverter {
public:
    UnitConverter(double tick_size, double reference_price)
        : tick_size_(tick_size), reference_price_(reference_price) {
        detail::require(tick_size > 0.0, "tick_size must be positive");
        detail::require(reference_price > 0.0, "reference price must be positive");
    }

    [[nodiscard]] double tick_size() const noexcept { return tick_size_; }
    [[nodiscard]] double reference_price() const noexcept { return reference_price_; }

    [[nodiscard]] double to_dollars(double value, PriceUnit from) const noexcept {
        switch (from) {
        case PriceUnit::dollar: return value;
        case PriceUnit::basis_point: return value * reference_price_ / 1e4;
        case PriceUnit::tick: return value * tick_size_;
        }
        return value;
    }

    [[nodiscard]] double from_dollars(double dollars, PriceUnit to) const noexcept {
        switch (to) {
        case PriceUnit::dollar: return dollars;
        case PriceUnit::basis_point: return dollars * 1e4 / reference_price_;
        case PriceUnit::tick: return dollars / tick_size_;
        }
        return dollars;
    }

    [[nodiscard]] double convert(double value, PriceUnit from, PriceUnit to) const noexcept {
        return from == to ? value : from_dollars(to_dollars(value, from), to);
    }

private:
    double tick_size_;
    double reference_price_;
};

// ticks/share -> bps/share at the given tick size and price.
[[nodiscard]] inline double to_basis_points(double ticks, double tick_size, double price) {
    detail::require(tick_size > 0.0 && price > 0.0, "tick_size and price must be positive");
    return ticks * tick_size * 1e4 / price;
}

[[nodiscard]] inline double from_basis_points(double bps, double tick_size, double price) {
    detail::require(tick_size > 0.0 && price > 0.0, "tick_size and price must be positive");
    return bps * price / (tick_size * 1e4);
}

[[nodiscard]] inline double half_life(double rho) {
    detail::require(rho > 0.0, "rho must be positive");
    return std::numbers::ln2 / rho;
}

[[nodiscard]] inline double half_life_days(double rho) { return half_life(rho) / kTradingDaySeconds; }

// 100 * ln2 / half-life-in-days, i.e. rho expressed in percent per trading day.
[[nodiscard]] inline double recovery_pct_per_day(double rho) { return 100.0 * std::numbers::ln2 / half_life_days(rho); }

} // namespace impact
