#pragma once

// Synthetic order-book streams from the queueing model: Poisson limit
// submissions per level with exponential order lifetimes, Hawkes market
// orders per side, and mid-price moves at monitor epochs whose direction is
// logistic in the running order imbalance. Output is the lob line format.

#include "impact/calibration.hpp"
#include "impact/error.hpp"
#include "impact/hawkes.hpp"
#include "impact/lob.hpp"
#include "impact/strategy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <unordered_map>
#include <vector>

namespace impact {

struct LevelSpec {
    double mu_plus{0.0};   // submissions, orders/s
    double mu_minus{0.0};  // per-order cancellation rate, 1/s
    double mean_size{0.0}; // shares

    [[nodiscard]] double expected_depth() const { return mu_minus > 0.0 ? mean_size * mu_plus / mu_minus : 0.0; }
};

enum class MonitorMode { poisson, grid };

struct MarketSpec {
    HawkesParameters sell{0.2, 8.6, 10.8}; // nu = 0 switches a side off
    HawkesParameters buy{0.2, 8.6, 10.8};
    std::vector<LevelSpec> levels;          // level 1 first, same ladder on both sides
    double monitor_rate{1.0};               // mu, 1/s; 0 disables mid changes
    MonitorMode monitor{MonitorMode::poisson};
    double monitor_phase{0.5};              // grid epochs at start + (k + phase) * window
    double b0{0.0697};
    double b1{0.7624};
    ImbalanceMemory memory{ImbalanceMemory::cumulative};
    double imbalance_window{1.0};
    std::optional<double> held_imbalance;   // fixes delta in f(delta)
    double market_order_mean_size{115.0};
    double tick_size{0.01};
    std::int64_t initial_bid{4862};         // ticks; ask starts one tick above
    SessionWindow session{};
    std::uint64_t seed{1};

    void validate() const {
        for (const auto* h : {&sell, &buy}) {
            if (h->nu != 0.0) h->validate();
        }
        detail::require(monitor_rate >= 0.0, "monitor rate must be nonnegative");
        detail::require(monitor_phase > 0.0 && monitor_phase <= 1.0, "monitor phase must lie in (0, 1]");
        detail::require(imbalance_window > 0.0, "imbalance window must be positive");
        detail::require(market_order_mean_size >= 1.0, "market order mean size must be at least one share");
        detail::require(tick_size > 0.0, "tick size must be positive");
        detail::require(session.start >= 0.0 && session.end > session.start, "invalid session window");
        for (const auto& l : levels) {
            detail::require(l.mu_plus >= 0.0 && l.mu_minus >= 0.0, "level rates must be nonnegative");
            detail::require(l.mu_plus == 0.0 || (l.mean_size >= 1.0 && l.mu_minus > 0.0),
                            "active levels need mean size >= 1 and a positive cancellation rate");
        }
    }
};

// Ladder with O_i = p0 + eta Q_i: level i sits i ticks from the best, and
// the per-level depth q_i = 1/eta shares, so cumulative depth grows one tick per 1/eta shares.
[[nodiscard]] inline std::vector<LevelSpec> linear_ladder(double eta_ticks_per_share, int levels,
                                                          double mean_size = 100.0, double mu_minus = 0.1) {
    detail::require(eta_ticks_per_share > 0.0 && levels > 0, "invalid ladder");
    std::vector<LevelSpec> out;
    const double q = 1.0 / eta_ticks_per_share;
    for (int i = 0; i < levels; ++i) out.push_back({q * mu_minus / mean_size, mu_minus, mean_size});
    return out;
}

struct SimulationResult {
    std::vector<BookEvent> events;
    std::vector<int> true_levels;       // per event, same convention as lob tags
    std::vector<double> epoch_times;    // monitor epochs
    std::vector<double> mid_after;      // mid after each epoch, ticks
    std::size_t sell_market_orders{0};  // executed, including injected
    std::size_t buy_market_orders{0};
    std::size_t injected_orders{0};

    void write(std::ostream& out) const {
        for (const auto& e : events) out << format_event(e) << '\n';
    }
};

namespace detail {

class Simulator {
public:
    Simulator(const MarketSpec& spec, const TradingSchedule* schedule, double inject_mean_size)
        : spec_(spec), schedule_(schedule), inject_size_(inject_mean_size) {
        spec_.validate();
        const auto stream = [&](std::uint64_t id) {
            std::seed_seq seq{static_cast<std::uint32_t>(spec_.seed), static_cast<std::uint32_t>(spec_.seed >> 32),
                              static_cast<std::uint32_t>(id)};
            return std::mt19937_64(seq);
        };
        for (int s = 0; s < 2; ++s) {
            for (std::size_t i = 0; i < spec_.levels.size(); ++i) {
                submit_rng_[s].push_back(stream(1000 + 100 * s + i));
            }
            hawkes_rng_[s] = stream(10 + s);
            market_size_rng_[s] = stream(20 + s);
        }
        cancel_rng_ = stream(30);
        monitor_rng_ = stream(40);
        direction_rng_ = stream(41);
        inject_rng_ = stream(50);
        bid_ref_ = spec_.initial_bid;
        ask_ref_ = spec_.initial_bid + 1;
    }

    SimulationResult run() {
        const double end = spec_.session.end;
        prefill();
        for (int s = 0; s < 2; ++s) {
            for (std::size_t i = 0; i < spec_.levels.size(); ++i) schedule_submit(s, i, 0.0);
            hawkes_next_[s] = draw_hawkes(s, 0.0);
        }
        monitor_next_ = first_epoch();
        inject_next_ = draw_injection(inject_start());

        for (;;) {
            // Candidate times in fixed process order; ties resolved by that order.
            double t = end;
            int which = -1;
            const auto consider = [&](double c, int id) {
                if (c < t) {
                    t = c;
                    which = id;
                }
            };
            consider(monitor_next_, 0);
            consider(inject_next_, 1);
            consider(hawkes_next_[0], 2);
            consider(hawkes_next_[1], 3);
            if (!cancels_.empty()) consider(cancels_.top().time, 4);
            for (int s = 0; s < 2; ++s) {
                for (std::size_t i = 0; i < submit_next_[s].size(); ++i) {
                    consider(submit_next_[s][i], 10 + s * 1000 + static_cast<int>(i));
                }
            }
            if (which < 0) break;
            now_ = t;
            if (which == 0) {
                on_epoch();
            } else if (which == 1) {
                on_injection();
            } else if (which == 2 || which == 3) {
                on_hawkes(which - 2);
            } else if (which == 4) {
                on_cancel();
            } else {
                const int s = (which - 10) / 1000;
                on_submit(s, static_cast<std::size_t>((which - 10) % 1000));
            }
        }
        return std::move(out_);
    }

private:
    struct Order {
        int side;
        std::int64_t price;
        std::int64_t size;
        std::size_t level; // anchor level, 0-based
    };
    struct Death {
        double time;
        std::uint64_t id;
        bool operator>(const Death& o) const { return time > o.time || (time == o.time && id > o.id); }
    };

    static double emit_time(double t) { return std::round(t * 1e6) / 1e6; }

    std::int64_t anchor_price(int side, std::size_t level) const {
        const auto off = static_cast<std::int64_t>(level);
        return side == 0 ? bid_ref_ - off : ask_ref_ + off;
    }

    std::optional<std::int64_t> best(int side) const {
        const auto& b = book_[side];
        if (b.empty()) return std::nullopt;
        return side == 0 ? b.rbegin()->first : b.begin()->first;
    }

    int level_relative(int side, std::int64_t price, std::optional<std::int64_t> ref) const {
        if (!ref) return 1;
        const auto d = side == 0 ? *ref - price : price - *ref;
        return d <= 0 ? 1 : static_cast<int>(d + 1);
    }

    void emit(EventKind kind, std::uint64_t id, std::int64_t size, std::int64_t price, int side, int level) {
        out_.events.push_back({emit_time(now_), kind, id, size, price, side == 0 ? Side::bid : Side::ask});
        out_.true_levels.push_back(level);
    }

    std::int64_t draw_size(std::mt19937_64& rng, double mean) {
        std::geometric_distribution<std::int64_t> g(1.0 / mean);
        return 1 + g(rng);
    }

    void add_order(int side, std::size_t level, std::int64_t size) {
        const auto price = anchor_price(side, level);
        const int tag = level_relative(side, price, best(side));
        const auto id = next_id_++;
        orders_[id] = {side, price, size, level};
        book_[side][price].push_back(id);
        emit(EventKind::submit, id, size, price, side, tag);
        std::exponential_distribution<double> life(spec_.levels[level].mu_minus);
        cancels_.push({now_ + life(cancel_rng_), id});
    }

    void prefill() {
        // Start each queue at a Poisson draw from its stationary order count.
        now_ = 0.0;
        for (std::size_t i = 0; i < spec_.levels.size(); ++i) {
            const auto& l = spec_.levels[i];
            if (l.mu_plus <= 0.0) continue;
            for (int s = 0; s < 2; ++s) {
                std::poisson_distribution<int> n(l.mu_plus / l.mu_minus);
                const int count = n(submit_rng_[s][i]);
                for (int k = 0; k < count; ++k) add_order(s, i, draw_size(submit_rng_[s][i], l.mean_size));
            }
        }
    }

    void schedule_submit(int s, std::size_t i, double from) {
        if (submit_next_[s].size() <= i) submit_next_[s].resize(spec_.levels.size(), kNever);
        const double rate = spec_.levels[i].mu_plus;
        if (rate <= 0.0) {
            submit_next_[s][i] = kNever;
            return;
        }
        std::exponential_distribution<double> w(rate);
        submit_next_[s][i] = from + w(submit_rng_[s][i]);
    }

    void on_submit(int s, std::size_t i) {
        add_order(s, i, draw_size(submit_rng_[s][i], spec_.levels[i].mean_size));
        schedule_submit(s, i, now_);
    }

    void on_cancel() {
        const auto d = cancels_.top();
        cancels_.pop();
        auto it = orders_.find(d.id);
        if (it == orders_.end()) return; // already executed
        const auto& o = it->second;
        const int tag = level_relative(o.side, o.price, best(o.side));
        emit(EventKind::cancel, d.id, o.size, o.price, o.side, tag);
        auto& q = book_[o.side][o.price];
        q.erase(std::find(q.begin(), q.end(), d.id));
        if (q.empty()) book_[o.side].erase(o.price);
        orders_.erase(it);
    }

    // Hawkes thinning from time `from` with the current excitation.
    double draw_hawkes(int s, double from) {
        const auto& h = s == 0 ? spec_.sell : spec_.buy;
        if (h.nu <= 0.0) return kNever;
        double t = from;
        for (;;) {
            const double bound = h.nu + excitation(s, t);
            std::exponential_distribution<double> w(bound);
            t += w(hawkes_rng_[s]);
            if (t >= spec_.session.end) return kNever;
            std::uniform_real_distribution<double> u(0.0, 1.0);
            if (u(hawkes_rng_[s]) * bound <= h.nu + excitation(s, t)) return t;
        }
    }

    double excitation(int s, double t) const {
        const auto& h = s == 0 ? spec_.sell : spec_.buy;
        return excite_[s] * std::exp(-h.B * (t - excite_time_[s]));
    }

    void bump_excitation(int s) {
        const auto& h = s == 0 ? spec_.sell : spec_.buy;
        excite_[s] = excitation(s, now_) + h.A;
        excite_time_[s] = now_;
    }

    // Market order by side s: s = 0 sells into the bid, s = 1 buys from the ask.
    void execute_market_order(int s, std::int64_t size) {
        const int book_side = s == 0 ? 0 : 1;
        auto& ladder = book_[book_side];
        const auto ref = best(book_side);
        bool executed = false;
        while (size > 0 && !ladder.empty()) {
            auto level_it = book_side == 0 ? std::prev(ladder.end()) : ladder.begin();
            auto& q = level_it->second;
            const auto id = q.front();
            auto& o = orders_.at(id);
            const auto fill = std::min(size, o.size);
            emit(EventKind::execute_visible, id, fill, o.price, book_side, level_relative(book_side, o.price, ref));
            executed = true;
            size -= fill;
            o.size -= fill;
            if (o.size == 0) {
                orders_.erase(id);
                q.pop_front();
                if (q.empty()) ladder.erase(level_it);
            }
        }
        if (executed) {
            flow_times_.push_back(now_);
            flow_cum_.push_back((flow_cum_.empty() ? 0 : flow_cum_.back()) + (s == 0 ? 1 : -1));
            (s == 0 ? out_.sell_market_orders : out_.buy_market_orders)++;
        }
    }

    void on_hawkes(int s) {
        execute_market_order(s, draw_size(market_size_rng_[s], spec_.market_order_mean_size));
        bump_excitation(s);
        hawkes_next_[s] = draw_hawkes(s, now_);
    }

    double inject_start() const { return spec_.session.start; }

    double draw_injection(double from) {
        if (!schedule_) return kNever;
        const double t0 = inject_start();
        const double t1 = std::min(spec_.session.end, t0 + schedule_->horizon());
        if (inject_bound_ <= 0.0) {
            double m = 0.0;
            for (double r : schedule_->sampled_rate()) m = std::max(m, r);
            inject_bound_ = 1.05 * m / inject_size_;
            if (inject_bound_ <= 0.0) return kNever;
        }
        double t = from;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::exponential_distribution<double> w(inject_bound_);
        for (;;) {
            t += w(inject_rng_);
            if (t >= t1) return kNever;
            const double rate = std::max(0.0, schedule_->rate(t - t0)) / inject_size_;
            if (u(inject_rng_) * inject_bound_ <= rate) return t;
        }
    }

    void on_injection() {
        execute_market_order(0, draw_size(inject_rng_, inject_size_));
        ++out_.injected_orders;
        bump_excitation(0);
        hawkes_next_[0] = draw_hawkes(0, now_);
        inject_next_ = draw_injection(now_);
    }

    double first_epoch() {
        if (spec_.monitor_rate <= 0.0) return kNever;
        if (spec_.monitor == MonitorMode::grid) {
            const double step = 1.0 / spec_.monitor_rate;
            const double k0 = std::ceil((0.0 - spec_.session.start) / step - spec_.monitor_phase);
            epoch_index_ = static_cast<long>(k0);
            return grid_epoch(epoch_index_);
        }
        std::exponential_distribution<double> w(spec_.monitor_rate);
        return w(monitor_rng_);
    }

    double grid_epoch(long k) const {
        const double step = 1.0 / spec_.monitor_rate;
        return spec_.session.start + (static_cast<double>(k) + spec_.monitor_phase) * step;
    }

    // Net sells in [a, b).
    long flow_between(double a, double b) const {
        const auto cum_before = [&](double t) -> long {
            const auto it = std::lower_bound(flow_times_.begin(), flow_times_.end(), t);
            if (it == flow_times_.begin()) return 0;
            return flow_cum_[static_cast<std::size_t>(it - flow_times_.begin()) - 1];
        };
        return cum_before(b) - cum_before(a);
    }

    double current_imbalance() const {
        if (spec_.held_imbalance) return *spec_.held_imbalance;
        const double t = now_;
        const double start = spec_.session.start;
        if (spec_.memory == ImbalanceMemory::cumulative) {
            // Flow up to and including the epoch instant, from session start.
            return static_cast<double>(flow_between(std::min(start, t), std::nextafter(t, kNever)));
        }
        const double w = spec_.imbalance_window;
        double window_start;
        if (spec_.monitor == MonitorMode::grid) {
            window_start = t - spec_.monitor_phase * w;
        } else {
            window_start = start + std::floor((t - start) / w) * w;
        }
        return static_cast<double>(flow_between(window_start, std::nextafter(t, kNever)));
    }

    void shift(int side, int direction) {
        // Re-price every resting order on `side` by `direction` ticks, best level first.
        auto& ladder = book_[side];
        std::map<std::int64_t, std::deque<std::uint64_t>> shifted;
        std::vector<std::int64_t> prices;
        for (const auto& [p, q] : ladder) prices.push_back(p);
        if (side == 0) std::reverse(prices.begin(), prices.end());
        for (auto p : prices) {
            for (auto id : ladder[p]) {
                auto& o = orders_.at(id);
                o.price = p + direction;
                // Re-prices keep relative levels; they carry no level tag.
                emit(EventKind::modify, id, o.size, o.price, side, 0);
            }
            shifted[p + direction] = std::move(ladder[p]);
        }
        ladder = std::move(shifted);
        (side == 0 ? bid_ref_ : ask_ref_) += direction;
    }

    void on_epoch() {
        const double delta = current_imbalance();
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const bool down = u(direction_rng_) < logistic(spec_.b0 + spec_.b1 * delta);
        const bool wide = ask_ref_ - bid_ref_ == 2;
        if (down) {
            wide ? shift(1, -1) : shift(0, -1);
        } else {
            wide ? shift(0, +1) : shift(1, +1);
        }
        out_.epoch_times.push_back(now_);
        out_.mid_after.push_back(0.5 * static_cast<double>(bid_ref_ + ask_ref_));
        if (spec_.monitor == MonitorMode::grid) {
            monitor_next_ = grid_epoch(++epoch_index_);
        } else {
            std::exponential_distribution<double> w(spec_.monitor_rate);
            monitor_next_ = now_ + w(monitor_rng_);
        }
    }

    static constexpr double kNever = std::numeric_limits<double>::infinity();

    MarketSpec spec_;
    const TradingSchedule* schedule_;
    double inject_size_;
    double inject_bound_{0.0};

    std::array<std::vector<std::mt19937_64>, 2> submit_rng_;
    std::array<std::mt19937_64, 2> hawkes_rng_;
    std::array<std::mt19937_64, 2> market_size_rng_;
    std::mt19937_64 cancel_rng_;
    std::mt19937_64 monitor_rng_;
    std::mt19937_64 direction_rng_;
    std::mt19937_64 inject_rng_;

    std::array<std::vector<double>, 2> submit_next_;
    std::array<double, 2> hawkes_next_{kNever, kNever};
    std::array<double, 2> excite_{0.0, 0.0};
    std::array<double, 2> excite_time_{0.0, 0.0};
    double monitor_next_{kNever};
    double inject_next_{kNever};
    long epoch_index_{0};

    std::int64_t bid_ref_;
    std::int64_t ask_ref_;
    std::array<std::map<std::int64_t, std::deque<std::uint64_t>>, 2> book_;
    std::unordered_map<std::uint64_t, Order> orders_;
    std::priority_queue<Death, std::vector<Death>, std::greater<>> cancels_;
    std::uint64_t next_id_{1};
    double now_{0.0};

    std::vector<double> flow_times_;
    std::vector<long> flow_cum_;
    SimulationResult out_;
};

} // namespace detail

[[nodiscard]] inline SimulationResult generate(const MarketSpec& spec) {
    return detail::Simulator(spec, nullptr, 1.0).run();
}

// Adds trader market sells at rate xi_t / mean_order_size over [session start, start + T].
// The injected orders excite the sell Hawkes process and enter the imbalance.
[[nodiscard]] inline SimulationResult inject_strategy(const MarketSpec& spec, const TradingSchedule& schedule,
                                                      double mean_order_size) {
    detail::require(mean_order_size >= 1.0, "mean order size must be at least one share");
    for (double r : schedule.sampled_rate()) detail::require(r >= 0.0, "injected schedule rate must be nonnegative");
    detail::require(schedule.initial_block() == 0.0 && schedule.terminal_block() == 0.0,
                    "block trades cannot be injected as a rate");
    return detail::Simulator(spec, &schedule, mean_order_size).run();
}

} // namespace impact
