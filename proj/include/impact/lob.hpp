#pragma once

// Order-book message streams: parsing, replay with level tagging, and the
// derived inputs for calibration (per-level queue statistics, market-order
// times, imbalance samples, mean mid move and mean market-order size).
//
// Line format: timestamp,kind,order_id,size,price_ticks,side
//   kind  S submit, M modify (new size and price), C cancel (size removed),
//         EV visible execution, EH hidden execution, H halt
//   side  B bid, A ask (side of the resting order)

#include "impact/calibration.hpp"
#include "impact/error.hpp"
#include "impact/hawkes.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace impact {

enum class EventKind { submit, modify, cancel, execute_visible, execute_hidden, halt };
enum class Side { bid, ask };

[[nodiscard]] constexpr std::string_view to_code(EventKind k) noexcept {
    switch (k) {
    case EventKind::submit: return "S";
    case EventKind::modify: return "M";
    case EventKind::cancel: return "C";
    case EventKind::execute_visible: return "EV";
    case EventKind::execute_hidden: return "EH";
    case EventKind::halt: return "H";
    }
    return "?";
}

[[nodiscard]] constexpr char to_code(Side s) noexcept { return s == Side::bid ? 'B' : 'A'; }

struct BookEvent {
    double timestamp{0.0}; // seconds since session open
    EventKind kind{EventKind::submit};
    std::uint64_t order_id{0};
    std::int64_t size{0};  // shares
    std::int64_t price{0}; // ticks
    Side side{Side::bid};

    // Halts and hidden executions are kept in the stream but do not enter any statistic.
    [[nodiscard]] bool excluded() const noexcept {
        return kind == EventKind::halt || kind == EventKind::execute_hidden;
    }

    friend bool operator==(const BookEvent&, const BookEvent&) = default;
};

[[nodiscard]] inline std::string format_event(const BookEvent& e) {
    return fmt::format("{:.6f},{},{},{},{},{}", e.timestamp, to_code(e.kind), e.order_id, e.size, e.price,
                       to_code(e.side));
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
            field.remove_suffix(1);
        out.push_back(field);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
T parse_number(std::string_view s, std::size_t line, const char* what) {
    T v{};
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != end) {
        throw ParseError(line, fmt::format("invalid {} '{}'", what, s));
    }
    return v;
}

inline EventKind parse_kind(std::string_view s, std::size_t line) {
    if (s == "S") return EventKind::submit;
    if (s == "M") return EventKind::modify;
    if (s == "C") return EventKind::cancel;
    if (s == "EV") return EventKind::execute_visible;
    if (s == "EH") return EventKind::execute_hidden;
    if (s == "H") return EventKind::halt;
    throw ParseError(line, fmt::format("unknown event kind '{}'", s));
}

} // namespace detail

// Incremental parser so that a stream can be fed in chunks of lines.
class StreamParser {
public:
    // Parses one line; returns nothing for blank and comment lines.
    std::optional<BookEvent> feed(std::string_view line) {
        ++line_;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
        if (line.empty() || line.front() == '#') return std::nullopt;
        const auto f = detail::split_fields(line);
        BookEvent e;
        if (f.size() < 2) throw ParseError(line_, "expected at least timestamp and kind");
        e.timestamp = detail::parse_number<double>(f[0], line_, "timestamp");
        if (!std::isfinite(e.timestamp)) throw ParseError(line_, "timestamp is not finite");
        e.kind = detail::parse_kind(f[1], line_);
        if (e.kind == EventKind::halt) {
            if (f.size() != 2 && f.size() != 6) throw ParseError(line_, "halt takes 2 or 6 fields");
        } else if (f.size() != 6) {
            throw ParseError(line_, fmt::format("expected 6 fields, got {}", f.size()));
        }
        if (f.size() == 6) {
            e.order_id = detail::parse_number<std::uint64_t>(f[2], line_, "order id");
            e.size = detail::parse_number<std::int64_t>(f[3], line_, "size");
            e.price = detail::parse_number<std::int64_t>(f[4], line_, "price");
            if (f[5] == "B") {
                e.side = Side::bid;
            } else if (f[5] == "A") {
                e.side = Side::ask;
            } else {
                throw ParseError(line_, fmt::format("unknown side '{}'", f[5]));
            }
            if (e.kind != EventKind::halt && e.size <= 0) throw ParseError(line_, "size must be positive");
        }
        if (last_ && e.timestamp < *last_) {
            throw ParseError(line_, fmt::format("timestamp {} precedes previous {}", e.timestamp, *last_));
        }
        last_ = e.timestamp;
        return e;
    }

    [[nodiscard]] std::size_t lines() const noexcept { return line_; }

private:
    std::size_t line_{0};
    std::optional<double> last_;
};

[[nodiscard]] inline std::vector<BookEvent> parse_stream(std::istream& in) {
    StreamParser parser;
    std::vector<BookEvent> out;
    std::string line;
    while (std::getline(in, line)) {
        if (auto e = parser.feed(line)) out.push_back(*e);
    }
    return out;
}

[[nodiscard]] inline std::vector<BookEvent> parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open message file " + path);
    return parse_stream(in);
}

struct SessionWindow {
    double start{1800.0}; // 10:00 for a 09:30 open
    double end{21600.0};  // 15:30

    [[nodiscard]] bool contains(double t) const noexcept { return t >= start && t < end; }
    [[nodiscard]] double length() const noexcept { return end - start; }
};

struct ReplayOptions {
    SessionWindow session{};
    int max_levels{10};
};

// Visible executions with the same timestamp and aggressor side form one market order.
struct MarketOrder {
    double timestamp{0.0};
    bool sell{false}; // true when it executed against the bid
    std::int64_t size{0};
    int deepest_level{1};
    int levels_touched{1};
    bool in_session{false};
    std::size_t event_index{0}; // first execution in the replayed stream
};

struct MidChange {
    double timestamp{0.0};
    double before{0.0}; // ticks
    double after{0.0};
    std::size_t event_index{0};
};

struct TaggedEvent {
    BookEvent event;
    int level{0}; // distance in ticks from the same-side best, 1 = at best; 0 when not applicable
};

struct LevelCounts {
    std::int64_t submits{0};
    std::int64_t cancels{0};
    std::int64_t executions{0}; // one per market order per level touched
    double submitted_shares{0.0};
    double resting_order_seconds{0.0};
};

struct ReplayResult {
    ReplayOptions options{};
    std::vector<TaggedEvent> events;
    std::vector<MarketOrder> market_orders;
    std::vector<MidChange> mid_changes;
    std::array<std::vector<LevelCounts>, 2> levels; // [bid, ask], index level - 1, in-session only
    std::size_t orphans{0};
    std::size_t overfills{0}; // executions or cancels larger than the resting size
};

namespace detail {

struct RestingOrder {
    Side side;
    std::int64_t price;
    std::int64_t size;
};

struct Ladder {
    struct Agg {
        std::int64_t shares{0};
        std::int64_t orders{0};
    };
    std::map<std::int64_t, Agg> prices;

    void add(std::int64_t price, std::int64_t shares, std::int64_t orders) {
        auto& a = prices[price];
        a.shares += shares;
        a.orders += orders;
        if (a.orders <= 0 && a.shares <= 0) prices.erase(price);
    }
};

class Book {
public:
    [[nodiscard]] std::optional<std::int64_t> best(Side s) const {
        const auto& l = ladder(s).prices;
        if (l.empty()) return std::nullopt;
        return s == Side::bid ? l.rbegin()->first : l.begin()->first;
    }

    [[nodiscard]] std::optional<double> mid() const {
        const auto b = best(Side::bid), a = best(Side::ask);
        if (!b || !a) return std::nullopt;
        return 0.5 * static_cast<double>(*b + *a);
    }

    // Level of a price relative to the side's best; prices better than the best are level 1.
    [[nodiscard]] int level_of(Side s, std::int64_t price, std::optional<std::int64_t> ref) const {
        if (!ref) return 1;
        const auto d = s == Side::ask ? price - *ref : *ref - price;
        return d <= 0 ? 1 : static_cast<int>(std::min<std::int64_t>(d + 1, 1 << 20));
    }

    [[nodiscard]] std::int64_t orders_at(Side s, std::int64_t price) const {
        const auto& l = ladder(s).prices;
        const auto it = l.find(price);
        return it == l.end() ? 0 : it->second.orders;
    }

    Ladder& ladder(Side s) { return s == Side::bid ? bids_ : asks_; }
    [[nodiscard]] const Ladder& ladder(Side s) const { return s == Side::bid ? bids_ : asks_; }

    std::unordered_map<std::uint64_t, RestingOrder> orders;

private:
    Ladder bids_;
    Ladder asks_;
};

} // namespace detail

// Replays a stream from an empty book, tagging levels and collecting in-session statistics.
[[nodiscard]] inline ReplayResult replay(const std::vector<BookEvent>& events, const ReplayOptions& options = {}) {
    detail::require(options.session.end > options.session.start, "session window must have positive length");
    detail::require(options.max_levels >= 1, "max_levels must be at least 1");
    ReplayResult out;
    out.options = options;
    const auto nlev = static_cast<std::size_t>(options.max_levels);
    out.levels[0].assign(nlev, {});
    out.levels[1].assign(nlev, {});
    out.events.reserve(events.size());

    detail::Book book;
    std::optional<double> mid;
    double clock = events.empty() ? 0.0 : events.front().timestamp;
    // Open market-order group per aggressor side: index into market_orders and the reference best.
    std::array<std::optional<std::size_t>, 2> open_group;
    std::array<std::optional<std::int64_t>, 2> group_best;

    const auto side_index = [](Side s) { return s == Side::bid ? 0 : 1; };
    const auto accumulate_resting = [&](double until) {
        const double lo = std::max(clock, options.session.start);
        const double hi = std::min(until, options.session.end);
        if (hi > lo) {
            const double dt = hi - lo;
            for (Side s : {Side::bid, Side::ask}) {
                const auto b = book.best(s);
                if (!b) continue;
                auto& counts = out.levels[side_index(s)];
                for (std::size_t i = 0; i < nlev; ++i) {
                    const auto off = static_cast<std::int64_t>(i);
                    const auto price = s == Side::ask ? *b + off : *b - off;
                    counts[i].resting_order_seconds += dt * static_cast<double>(book.orders_at(s, price));
                }
            }
        }
        clock = std::max(clock, until);
    };
    const auto level_slot = [&](Side s, int level) -> LevelCounts* {
        if (level < 1 || level > options.max_levels) return nullptr;
        return &out.levels[side_index(s)][static_cast<std::size_t>(level - 1)];
    };

    for (std::size_t idx = 0; idx < events.size(); ++idx) {
        const auto& e = events[idx];
        accumulate_resting(e.timestamp);
        const bool in_session = options.session.contains(e.timestamp);
        TaggedEvent tagged{e, 0};

        switch (e.kind) {
        case EventKind::halt:
        case EventKind::execute_hidden: break;
        case EventKind::submit: {
            if (book.orders.contains(e.order_id)) {
                ++out.orphans; // duplicate id
                break;
            }
            tagged.level = book.level_of(e.side, e.price, book.best(e.side));
            book.orders[e.order_id] = {e.side, e.price, e.size};
            book.ladder(e.side).add(e.price, e.size, 1);
            if (in_session) {
                if (auto* c = level_slot(e.side, tagged.level)) {
                    ++c->submits;
                    c->submitted_shares += static_cast<double>(e.size);
                }
            }
            break;
        }
        case EventKind::cancel: {
            auto it = book.orders.find(e.order_id);
            if (it == book.orders.end()) {
                ++out.orphans;
                break;
            }
            auto& o = it->second;
            tagged.level = book.level_of(o.side, o.price, book.best(o.side));
            if (in_session) {
                if (auto* c = level_slot(o.side, tagged.level)) ++c->cancels;
            }
            if (e.size > o.size) ++out.overfills;
            const auto removed = std::min(e.size, o.size);
            if (removed >= o.size) {
                book.ladder(o.side).add(o.price, -o.size, -1);
                book.orders.erase(it);
            } else {
                book.ladder(o.side).add(o.price, -removed, 0);
                o.size -= removed;
            }
            break;
        }
        case EventKind::modify: {
            auto it = book.orders.find(e.order_id);
            if (it == book.orders.end()) {
                ++out.orphans;
                break;
            }
            auto& o = it->second;
            const auto best = book.best(o.side);
            const int old_level = book.level_of(o.side, o.price, best);
            book.ladder(o.side).add(o.price, -o.size, -1);
            const auto delta = e.size - o.size;
            o.price = e.price;
            o.size = e.size;
            book.ladder(o.side).add(o.price, o.size, 1);
            const auto new_best = book.best(o.side);
            const int new_level = book.level_of(o.side, o.price, best ? best : new_best);
            tagged.level = new_level;
            if (in_session && delta != 0) {
                if (delta > 0) {
                    if (auto* c = level_slot(o.side, new_level)) {
                        ++c->submits;
                        c->submitted_shares += static_cast<double>(delta);
                    }
                } else if (auto* c = level_slot(o.side, old_level)) {
                    ++c->cancels;
                }
            }
            break;
        }
        case EventKind::execute_visible: {
            auto it = book.orders.find(e.order_id);
            if (it == book.orders.end()) {
                ++out.orphans;
                break;
            }
            auto& o = it->second;
            const int si = side_index(o.side);
            if (!open_group[si] || out.market_orders[*open_group[si]].timestamp != e.timestamp) {
                MarketOrder m;
                m.timestamp = e.timestamp;
                m.sell = o.side == Side::bid;
                m.in_session = in_session;
                m.deepest_level = 0;
                m.levels_touched = 0;
                m.event_index = idx;
                out.market_orders.push_back(m);
                open_group[si] = out.market_orders.size() - 1;
                group_best[si] = book.best(o.side);
            }
            auto& m = out.market_orders[*open_group[si]];
            tagged.level = book.level_of(o.side, o.price, group_best[si]);
            if (tagged.level > m.deepest_level) {
                // Executions arrive best level first, so each level touched is counted once.
                if (in_session) {
                    if (auto* c = level_slot(o.side, tagged.level)) ++c->executions;
                }
                m.deepest_level = tagged.level;
                ++m.levels_touched;
            }
            if (e.size > o.size) ++out.overfills;
            const auto filled = std::min(e.size, o.size);
            m.size += filled;
            if (filled >= o.size) {
                book.ladder(o.side).add(o.price, -o.size, -1);
                book.orders.erase(it);
            } else {
                book.ladder(o.side).add(o.price, -filled, 0);
                o.size -= filled;
            }
            break;
        }
        }

        const auto new_mid = book.mid();
        if (new_mid && mid && *new_mid != *mid) {
            out.mid_changes.push_back({e.timestamp, *mid, *new_mid, idx});
        }
        if (new_mid) mid = new_mid;
        out.events.push_back(tagged);
    }
    return out;
}

// Per-level queue statistics on one side: mu+ = submits / session seconds,
// mu- = cancels per resting-order-second, mean size of submitted orders.
struct LevelTable {
    Side side{Side::ask};
    std::vector<LevelStats> stats; // levels usable for the depth regression
    std::vector<LevelCounts> counts; // all levels 1..max_levels
    std::vector<int> excluded;       // no cancellations or no submissions
};

[[nodiscard]] inline LevelTable level_statistics(const ReplayResult& r, Side side = Side::ask) {
    const double seconds = r.options.session.length();
    detail::require(seconds > 0.0, "session length must be positive");
    LevelTable t;
    t.side = side;
    t.counts = r.levels[side == Side::bid ? 0 : 1];
    for (std::size_t i = 0; i < t.counts.size(); ++i) {
        const auto& c = t.counts[i];
        const int level = static_cast<int>(i + 1);
        if (c.cancels == 0 || c.submits == 0 || !(c.resting_order_seconds > 0.0)) {
            t.excluded.push_back(level);
            continue;
        }
        LevelStats s;
        s.level = level;
        s.mu_plus = static_cast<double>(c.submits) / seconds;
        s.mu_minus = static_cast<double>(c.cancels) / c.resting_order_seconds;
        s.mean_size = c.submitted_shares / static_cast<double>(c.submits);
        s.offset = static_cast<double>(level);
        t.stats.push_back(s);
    }
    return t;
}

enum class ImbalanceMemory { cumulative, per_window };

struct ImbalanceOptions {
    double window{1.0};
    ImbalanceMemory memory{ImbalanceMemory::cumulative};
};

// One sample per in-session window whose last mid differs from the previous
// window's last mid. delta = sells - buys up to the window's last mid change,
// counted from session start (cumulative) or from the window start.
[[nodiscard]] inline std::vector<ImbalanceSample> imbalance_series(const ReplayResult& r,
                                                                   const ImbalanceOptions& opt = {}) {
    detail::require(opt.window > 0.0, "window must be positive");
    const auto& s = r.options.session;
    const auto nwin = static_cast<std::size_t>(std::ceil(s.length() / opt.window - 1e-9));
    std::vector<ImbalanceSample> out;
    std::optional<double> prev_mid;
    // Mid at session start: last mid change before the session.
    for (const auto& c : r.mid_changes) {
        if (c.timestamp >= s.start) {
            if (!prev_mid) prev_mid = c.before;
            break;
        }
        prev_mid = c.after;
    }
    std::size_t ci = 0, fi = 0;
    long running = 0;      // cumulative from session start
    long window_flow = 0;  // from window start
    while (ci < r.mid_changes.size() && r.mid_changes[ci].timestamp < s.start) ++ci;
    const auto& flow = r.market_orders;
    const auto sign = [](const MarketOrder& m) { return m.sell ? 1L : -1L; };
    while (fi < flow.size() && flow[fi].timestamp < s.start) ++fi;

    for (std::size_t w = 0; w < nwin; ++w) {
        const double lo = s.start + static_cast<double>(w) * opt.window;
        const double hi = w + 1 == nwin ? s.end : lo + opt.window;
        window_flow = 0;
        std::optional<std::size_t> last_change;
        long delta_at_change = 0;
        // Walk mid changes in this window, advancing the flow up to each change's event index.
        while (ci < r.mid_changes.size() && r.mid_changes[ci].timestamp < hi) {
            const auto idx = r.mid_changes[ci].event_index;
            while (fi < flow.size() && flow[fi].event_index <= idx) {
                running += sign(flow[fi]);
                window_flow += sign(flow[fi]);
                ++fi;
            }
            last_change = ci;
            delta_at_change = opt.memory == ImbalanceMemory::cumulative ? running : window_flow;
            ++ci;
        }
        while (fi < flow.size() && flow[fi].timestamp < hi) {
            running += sign(flow[fi]);
            window_flow += sign(flow[fi]);
            ++fi;
        }
        if (last_change) {
            const double end_mid = r.mid_changes[*last_change].after;
            if (prev_mid && end_mid != *prev_mid) {
                ImbalanceSample smp;
                smp.window = w;
                smp.delta = static_cast<double>(delta_at_change);
                smp.down = end_mid < *prev_mid;
                out.push_back(smp);
            }
            prev_mid = end_mid;
        }
    }
    return out;
}

struct FlowScalars {
    double z_bar{0.0}; // mean |mid change|, ticks
    double l_bar{0.0}; // mean market-order size, shares
    std::size_t mid_changes{0};
    std::size_t market_orders{0};
};

[[nodiscard]] inline FlowScalars flow_scalars(const ReplayResult& r) {
    FlowScalars f;
    double z = 0.0;
    for (const auto& c : r.mid_changes) {
        if (!r.options.session.contains(c.timestamp)) continue;
        z += std::abs(c.after - c.before);
        ++f.mid_changes;
    }
    double l = 0.0;
    for (const auto& m : r.market_orders) {
        if (!m.in_session) continue;
        l += static_cast<double>(m.size);
        ++f.market_orders;
    }
    if (f.mid_changes == 0 || f.market_orders == 0) {
        throw DataError("flow scalars need at least one in-session execution and one mid-price change");
    }
    f.z_bar = z / static_cast<double>(f.mid_changes);
    f.l_bar = l / static_cast<double>(f.market_orders);
    return f;
}

// In-session market-order times on one side, shifted to start at zero; horizon is the session length.
[[nodiscard]] inline EventTimes market_order_times(const ReplayResult& r, bool sell) {
    EventTimes ev;
    ev.horizon = r.options.session.length();
    for (const auto& m : r.market_orders) {
        if (m.in_session && m.sell == sell) {
            const double t = m.timestamp - r.options.session.start;
            if (ev.times.empty() || t > ev.times.back()) ev.times.push_back(t);
        }
    }
    return ev;
}

} // namespace impact
