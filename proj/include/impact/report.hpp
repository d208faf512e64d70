#pragma once

// Batch commands behind the CLI: calibration runs over a config of stocks,
// strategy tables, ALL/INS/TMP cost comparison, summary statistics and
// synthetic stream generation. All outputs are comma-separated text with a
// one-line header, written in config order so reruns are byte-identical.

#include "impact/calibration.hpp"
#include "impact/error.hpp"
#include "impact/hawkes.hpp"
#include "impact/lob.hpp"
#include "impact/simulator.hpp"
#include "impact/strategy.hpp"
#include "impact/units.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace impact::report {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

struct ConfigSection {
    std::string kind; // empty for the global block
    std::string name;
    std::size_t line{0};
    std::vector<std::pair<std::string, std::string>> entries;
    std::vector<std::size_t> entry_lines;

    [[nodiscard]] std::optional<std::string> get(const std::string& key) const {
        std::optional<std::string> out;
        for (const auto& [k, v] : entries) {
            if (k == key) out = v; // last one wins
        }
        return out;
    }

    [[nodiscard]] std::vector<std::string> all(const std::string& key) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : entries) {
            if (k == key) out.push_back(v);
        }
        return out;
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

inline double to_number(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError(fmt::format("{}: '{}' is not a number", what, s));
    }
}

inline std::vector<double> to_numbers(const std::string& s, std::size_t count, const std::string& what) {
    std::istringstream in(s);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(to_number(tok, what));
    if (out.size() != count) throw DataError(fmt::format("{}: expected {} numbers, got '{}'", what, count, s));
    return out;
}

inline const std::set<std::string>& allowed_keys(const std::string& kind) {
    static const std::set<std::string> global{
        "session_start", "session_end", "horizon",     "levels",         "depth_side",
        "imbalance_memory", "imbalance_window", "monitor_rate", "lambda_variant", "records",
        "x0_adv_fraction", "tick_size",   "price",       "grid_points"};
    static const std::set<std::string> stock{"file",       "tick_size",     "price",      "x0",
                                             "adv",        "horizon",       "session_start", "session_end",
                                             "eta_bps",    "lambda_bps",    "gamma_bps",  "rho",
                                             "best_depth", "monitor_rate"};
    static const std::set<std::string> market{
        "seed",          "session_start", "session_end", "level",          "ladder",        "sell",
        "buy",           "monitor_rate",  "monitor",     "monitor_phase",  "b0",            "b1",
        "memory",        "imbalance_window", "market_order_size", "tick_size", "initial_bid",
        "inject_twap",   "held_imbalance"};
    if (kind.empty()) return global;
    if (kind == "stock") return stock;
    return market;
}

} // namespace detail

struct Config {
    fs::path base_dir{"."};
    ConfigSection global;
    std::vector<ConfigSection> sections;

    // Key-value lines; "[stock NAME]" and "[market NAME]" open sections; '#' starts a comment.
    static Config parse(std::istream& in, fs::path base_dir = ".") {
        Config c;
        c.base_dir = std::move(base_dir);
        ConfigSection* current = &c.global;
        std::string raw;
        std::size_t line = 0;
        std::set<std::string> names;
        while (std::getline(in, raw)) {
            ++line;
            const auto hash = raw.find('#');
            const auto text = detail::trim(std::string_view(raw).substr(0, hash));
            if (text.empty()) continue;
            if (text.front() == '[') {
                if (text.back() != ']') throw ParseError(line, "unterminated section header");
                std::istringstream h(text.substr(1, text.size() - 2));
                ConfigSection s;
                h >> s.kind >> s.name;
                std::string extra;
                if (s.name.empty() || (h >> extra)) throw ParseError(line, "section header must be [kind name]");
                if (s.kind != "stock" && s.kind != "market") {
                    throw ParseError(line, fmt::format("unknown section kind '{}'", s.kind));
                }
                if (!names.insert(s.kind + "/" + s.name).second) {
                    throw ParseError(line, fmt::format("duplicate section {} {}", s.kind, s.name));
                }
                s.line = line;
                c.sections.push_back(std::move(s));
                current = &c.sections.back();
                continue;
            }
            const auto eq = text.find('=');
            if (eq == std::string::npos) throw ParseError(line, "expected key = value");
            auto key = detail::trim(std::string_view(text).substr(0, eq));
            auto value = detail::trim(std::string_view(text).substr(eq + 1));
            if (key.empty()) throw ParseError(line, "empty key");
            if (!detail::allowed_keys(current->kind).contains(key)) {
                throw ParseError(line, fmt::format("unknown key '{}'", key));
            }
            current->entries.emplace_back(std::move(key), std::move(value));
            current->entry_lines.push_back(line);
        }
        return c;
    }

    static Config load(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open config " + path.string());
        return parse(in, path.parent_path().empty() ? fs::path(".") : path.parent_path());
    }

    [[nodiscard]] std::vector<const ConfigSection*> of_kind(const std::string& kind) const {
        std::vector<const ConfigSection*> out;
        for (const auto& s : sections) {
            if (s.kind == kind) out.push_back(&s);
        }
        return out;
    }

    [[nodiscard]] fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    }

    // Section value, then global value.
    [[nodiscard]] std::optional<std::string> lookup(const ConfigSection& s, const std::string& key) const {
        if (auto v = s.get(key)) return v;
        return global.get(key);
    }

    [[nodiscard]] double number(const ConfigSection& s, const std::string& key, double fallback) const {
        const auto v = lookup(s, key);
        return v ? detail::to_number(*v, key) : fallback;
    }

    [[nodiscard]] std::optional<double> maybe_number(const ConfigSection& s, const std::string& key) const {
        const auto v = lookup(s, key);
        if (!v) return std::nullopt;
        return detail::to_number(*v, key);
    }
};

struct RunOptions {
    fs::path out_dir{"out"};
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> grid_points;
    bool include_tmp{false};
    bool tangent_lambda{false};
    std::ostream* log{&std::cerr};
};

// ---------------------------------------------------------------- records

inline const std::vector<std::string>& record_columns() {
    static const std::vector<std::string> cols{
        "instantaneous_bps", "permanent_bps", "recovery_pct_day", "half_life_days", "impact_ratio",
        "improvement_pct",   "gamma_bps",     "rho",              "eta_ticks",      "lambda_ticks",
        "Lambda_ticks",      "b0",            "b1",               "se_b0",          "se_b1",
        "delta_bar",         "z_bar",         "l_bar",            "nu",             "A",
        "B",                 "branching_ratio", "best_depth",     "tick_size",      "price",
        "x0",                "horizon",       "mu",               "samples",        "sell_orders",
        "levels_used"};
    return cols;
}

struct Record {
    std::string stock;
    std::map<std::string, double> values;

    [[nodiscard]] std::optional<double> get(const std::string& key) const {
        const auto it = values.find(key);
        if (it == values.end()) return std::nullopt;
        return it->second;
    }
};

[[nodiscard]] inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    return fmt::format("{:.10g}", v);
}

inline void write_records(std::ostream& out, const std::vector<Record>& records) {
    out << "stock";
    for (const auto& c : record_columns()) out << ',' << c;
    out << '\n';
    for (const auto& r : records) {
        out << r.stock;
        for (const auto& c : record_columns()) {
            const auto v = r.get(c);
            out << ',' << (v ? format_number(*v) : "");
        }
        out << '\n';
    }
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::optional<std::size_t> column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    }
};

[[nodiscard]] inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> fields;
        for (auto f : ::impact::detail::split_fields(line)) fields.emplace_back(f);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw ParseError(n, fmt::format("expected {} fields, got {}", t.header.size(), fields.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    return t;
}

// Numeric columns become values; the stock name comes from "stock" (or the first column).
[[nodiscard]] inline std::vector<Record> read_records(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open records file " + path.string());
    const auto t = read_csv(in);
    const auto stock_col = t.column("stock").value_or(0);
    std::vector<Record> out;
    for (const auto& row : t.rows) {
        Record r;
        r.stock = row[stock_col];
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i == stock_col || row[i].empty()) continue;
            try {
                std::size_t used = 0;
                const double v = std::stod(row[i], &used);
                if (used == row[i].size()) r.values[t.header[i]] = v;
            } catch (const std::exception&) {
                // text column
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------- summary

struct Distribution {
    std::size_t n{0};
    double min{0.0}, p25{0.0}, median{0.0}, mean{0.0}, p75{0.0}, max{0.0}, sd{0.0};
};

// Linear interpolation between order statistics at position p (n - 1), inclusive of the extremes.
[[nodiscard]] inline double percentile(std::vector<double> v, double p) {
    if (v.empty()) throw DataError("percentile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Sample standard deviation (n - 1); zero for a single value.
[[nodiscard]] inline Distribution describe(const std::vector<double>& v) {
    if (v.empty()) throw DataError("summary needs at least one record");
    Distribution d;
    d.n = v.size();
    d.min = *std::min_element(v.begin(), v.end());
    d.max = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    d.mean = s / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - d.mean) * (x - d.mean);
    d.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    d.p25 = percentile(v, 0.25);
    d.median = percentile(v, 0.5);
    d.p75 = percentile(v, 0.75);
    return d;
}

inline const std::vector<std::string>& summary_columns() {
    static const std::vector<std::string> cols{"instantaneous_bps", "permanent_bps",  "recovery_pct_day",
                                               "half_life_days",    "impact_ratio",   "improvement_pct"};
    return cols;
}

[[nodiscard]] inline std::vector<std::pair<std::string, Distribution>> summarize(const std::vector<Record>& records) {
    if (records.empty()) throw DataError("summary needs at least one record");
    std::vector<std::pair<std::string, Distribution>> out;
    for (const auto& c : summary_columns()) {
        std::vector<double> v;
        for (const auto& r : records) {
            if (auto x = r.get(c)) v.push_back(*x);
        }
        if (!v.empty()) out.emplace_back(c, describe(v));
    }
    return out;
}

inline void write_summary(std::ostream& out, const std::vector<std::pair<std::string, Distribution>>& s) {
    out << "column,n,min,p25,median,mean,p75,max,sd\n";
    for (const auto& [name, d] : s) {
        out << fmt::format("{},{},{},{},{},{},{},{},{}\n", name, d.n, format_number(d.min), format_number(d.p25),
                           format_number(d.median), format_number(d.mean), format_number(d.p75),
                           format_number(d.max), format_number(d.sd));
    }
}

// ---------------------------------------------------------------- comparison

struct StrategyResult {
    StrategyKind kind;
    TradingSchedule schedule;
    CostBreakdown cost;
};

struct Comparison {
    std::string stock;
    ImpactParameters params;
    double x0{0.0};
    double horizon{0.0};
    double price{1.0};
    double tick_size{0.01};
    std::vector<StrategyResult> strategies; // ALL, INS, TMP
    double improvement_pct{0.0};            // 100 (C_INS - C_ALL) / C_INS
    double ins_over_all{0.0};
    std::optional<std::string> tmp_warning;

    [[nodiscard]] const StrategyResult& get(StrategyKind k) const {
        for (const auto& s : strategies) {
            if (s.kind == k) return s;
        }
        throw DomainError("strategy not in comparison");
    }
};

[[nodiscard]] inline Comparison compare(const ImpactParameters& params, double x0, double horizon, double price,
                                        double tick_size, std::size_t grid_points = kDefaultGridPoints,
                                        std::optional<double> best_depth = std::nullopt) {
    const LiquidationProblem problem{x0, horizon, params};
    problem.validate();
    Comparison c;
    c.params = params;
    c.x0 = x0;
    c.horizon = horizon;
    c.price = price;
    c.tick_size = tick_size;
    const UnitConverter units(tick_size, price);
    auto add = [&](TradingSchedule s) {
        const auto cost = execution_cost(s, params, units);
        c.strategies.push_back({s.kind(), std::move(s), cost});
    };
    add(optimal_schedule(problem, grid_points));
    add(twap_schedule(x0, horizon, grid_points));
    add(ow_schedule(x0, params.rho, horizon, grid_points));
    const double all = c.get(StrategyKind::all).cost.total;
    const double ins = c.get(StrategyKind::ins).cost.total;
    c.improvement_pct = 100.0 * (ins - all) / ins;
    c.ins_over_all = ins / all;
    const double block = c.get(StrategyKind::tmp).schedule.initial_block();
    if (best_depth && block > *best_depth) {
        c.tmp_warning = fmt::format("TMP block of {:.0f} shares is {:.1f} times the best-level depth of {:.0f} shares",
                                    block, block / *best_depth, *best_depth);
    }
    return c;
}

inline void write_comparison_rows(std::ostream& out, const Comparison& c, bool header) {
    if (header) out << "stock,strategy,instantaneous,transient,permanent,total,pct_of_notional,unit,block_cost_convention\n";
    for (const auto& s : c.strategies) {
        out << fmt::format("{},{},{},{},{},{},{},{},ow_midpoint\n", c.stock, to_string(s.kind),
                           format_number(s.cost.instantaneous), format_number(s.cost.transient),
                           format_number(s.cost.permanent), format_number(s.cost.total),
                           format_number(s.cost.pct_of_notional), to_string(s.cost.unit));
    }
}

// Figure 2 data: holdings of each strategy on a common grid, blocks shown as jumps at 0 and T.
inline void write_paths(std::ostream& out, const Comparison& c, std::size_t rows = 201) {
    out << "time,all,ins,tmp\n";
    const auto t = numerics::linspace(0.0, c.horizon, rows);
    const auto& tmp = c.get(StrategyKind::tmp).schedule;
    for (double x : t) {
        double tmp_h = tmp.holdings(x);
        if (x == 0.0) tmp_h = c.x0;
        out << fmt::format("{},{},{},{}\n", format_number(x), format_number(c.get(StrategyKind::all).schedule.holdings(x)),
                           format_number(c.get(StrategyKind::ins).schedule.holdings(x)), format_number(tmp_h));
    }
}

inline void write_schedule(std::ostream& out, const TradingSchedule& s, const ImpactParameters& p) {
    out << "time,rate,holdings,transient_impact\n";
    for (const auto& r : tabulate(s, p.gamma, p.rho)) {
        out << fmt::format("{},{},{},{}\n", format_number(r.time), format_number(r.rate), format_number(r.holdings),
                           format_number(r.transient_impact));
    }
}

// ---------------------------------------------------------------- calibration

struct CalibrationSettings {
    SessionWindow session{};
    double horizon{kTradingDaySeconds};
    int levels{10};
    Side depth_side{Side::ask};
    ImbalanceOptions imbalance{};
    double mu{1.0};
    LambdaVariant variant{LambdaVariant::exact_increment};
    double tick_size{0.01};
    double price{0.0};
    std::optional<double> x0;
    std::optional<double> adv;
    double x0_adv_fraction{0.05};
    std::size_t grid_points{kDefaultGridPoints};
};

struct CalibrationOutput {
    Record record;
    LevelTable levels;
    std::vector<ImbalanceSample> samples;
    LogisticFit logistic;
    EventTimes sell_times;
    EventTimes buy_times;
    HawkesFit hawkes;
    FlowScalars flow;
    std::vector<std::string> warnings;
};

[[nodiscard]] inline CalibrationOutput calibrate_events(const std::string& stock, const std::vector<BookEvent>& events,
                                                        const CalibrationSettings& cs) {
    ::impact::detail::require(cs.price > 0.0, "reference price must be positive");
    CalibrationOutput out;
    ReplayOptions ro;
    ro.session = cs.session;
    ro.max_levels = cs.levels;
    const auto r = replay(events, ro);
    if (r.orphans > 0) out.warnings.push_back(fmt::format("{} orphan events skipped", r.orphans));

    out.levels = level_statistics(r, cs.depth_side);
    if (!out.levels.excluded.empty()) {
        std::string lv;
        for (int l : out.levels.excluded) lv += (lv.empty() ? "" : " ") + std::to_string(l);
        out.warnings.push_back("levels excluded from the depth regression: " + lv);
    }
    const auto eta = estimate_eta(std::span<const LevelStats>(out.levels.stats));
    out.samples = imbalance_series(r, cs.imbalance);
    out.logistic = fit_logistic(out.samples);
    out.flow = flow_scalars(r);
    const auto pi = permanent_impact(out.logistic, out.flow.z_bar, out.flow.l_bar, cs.mu, cs.variant);
    out.sell_times = market_order_times(r, true);
    out.buy_times = market_order_times(r, false);
    out.hawkes = fit_mle(out.sell_times);
    if (out.hawkes.bound_active) out.warnings.push_back("Hawkes fit at the stationarity bound");
    const double rho = resilience_from_branching(out.hawkes.params, cs.horizon);

    const double eta_bps = to_basis_points(eta.eta, cs.tick_size, cs.price);
    const double lambda_bps = to_basis_points(pi.lambda, cs.tick_size, cs.price);
    const auto params = assemble_parameters(eta_bps, lambda_bps, rho, GammaRule::permanent_over_mu, cs.mu);

    double x0 = 0.0;
    if (cs.x0) {
        x0 = *cs.x0;
    } else {
        const double volume = cs.adv ? *cs.adv : out.flow.l_bar * static_cast<double>(out.flow.market_orders);
        x0 = cs.x0_adv_fraction * volume;
    }
    const double best_depth = out.levels.stats.empty() || out.levels.stats.front().level != 1
                                  ? std::numeric_limits<double>::quiet_NaN()
                                  : out.levels.stats.front().expected_depth();
    const auto cmp = compare(params, x0, cs.horizon, cs.price, cs.tick_size, cs.grid_points,
                             std::isnan(best_depth) ? std::nullopt : std::optional<double>(best_depth));

    auto& v = out.record.values;
    out.record.stock = stock;
    v["instantaneous_bps"] = eta_bps;
    v["permanent_bps"] = lambda_bps;
    v["recovery_pct_day"] = recovery_pct_per_day(rho);
    v["half_life_days"] = half_life_days(rho);
    v["impact_ratio"] = params.impact_ratio();
    v["improvement_pct"] = cmp.improvement_pct;
    v["gamma_bps"] = params.gamma;
    v["rho"] = rho;
    v["eta_ticks"] = eta.eta;
    v["lambda_ticks"] = pi.lambda;
    v["Lambda_ticks"] = pi.Lambda;
    v["b0"] = out.logistic.b0;
    v["b1"] = out.logistic.b1;
    v["se_b0"] = out.logistic.se_b0;
    v["se_b1"] = out.logistic.se_b1;
    v["delta_bar"] = out.logistic.delta_bar();
    v["z_bar"] = out.flow.z_bar;
    v["l_bar"] = out.flow.l_bar;
    v["nu"] = out.hawkes.params.nu;
    v["A"] = out.hawkes.params.A;
    v["B"] = out.hawkes.params.B;
    v["branching_ratio"] = out.hawkes.params.branching_ratio();
    v["best_depth"] = best_depth;
    v["tick_size"] = cs.tick_size;
    v["price"] = cs.price;
    v["x0"] = x0;
    v["horizon"] = cs.horizon;
    v["mu"] = cs.mu;
    v["samples"] = static_cast<double>(out.samples.size());
    v["sell_orders"] = static_cast<double>(out.sell_times.size());
    v["levels_used"] = static_cast<double>(out.levels.stats.size());
    if (cmp.tmp_warning) out.warnings.push_back(*cmp.tmp_warning);
    return out;
}

namespace detail {

inline std::string safe_name(const std::string& s) {
    std::string out;
    for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_';
    return out.empty() ? "_" : out;
}

inline void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
}

inline Side parse_side(const std::string& s) {
    if (s == "ask") return Side::ask;
    if (s == "bid") return Side::bid;
    throw DataError("depth_side must be ask or bid, got " + s);
}

inline ImbalanceMemory parse_memory(const std::string& s) {
    if (s == "cumulative") return ImbalanceMemory::cumulative;
    if (s == "per_window") return ImbalanceMemory::per_window;
    throw DataError("imbalance memory must be cumulative or per_window, got " + s);
}

inline std::size_t grid_points(const Config& c, const RunOptions& o) {
    if (o.grid_points) return *o.grid_points;
    return static_cast<std::size_t>(c.number(c.global, "grid_points", static_cast<double>(kDefaultGridPoints)));
}

inline CalibrationSettings settings_for(const Config& c, const ConfigSection& s, const RunOptions& o) {
    CalibrationSettings cs;
    cs.session.start = c.number(s, "session_start", cs.session.start);
    cs.session.end = c.number(s, "session_end", cs.session.end);
    cs.horizon = c.number(s, "horizon", cs.session.length());
    cs.levels = static_cast<int>(c.number(s, "levels", 10));
    if (auto v = c.lookup(s, "depth_side")) cs.depth_side = parse_side(*v);
    if (auto v = c.lookup(s, "imbalance_memory")) cs.imbalance.memory = parse_memory(*v);
    cs.imbalance.window = c.number(s, "imbalance_window", 1.0);
    cs.mu = c.number(s, "monitor_rate", 1.0);
    if (auto v = c.lookup(s, "lambda_variant")) {
        if (*v == "tangent") {
            cs.variant = LambdaVariant::tangent;
        } else if (*v != "exact") {
            throw DataError("lambda_variant must be exact or tangent, got " + *v);
        }
    }
    if (o.tangent_lambda) cs.variant = LambdaVariant::tangent;
    cs.tick_size = c.number(s, "tick_size", 0.01);
    const auto price = c.maybe_number(s, "price");
    if (!price) throw DataError("stock " + s.name + " has no reference price");
    cs.price = *price;
    cs.x0 = c.maybe_number(s, "x0");
    cs.adv = c.maybe_number(s, "adv");
    cs.x0_adv_fraction = c.number(s, "x0_adv_fraction", 0.05);
    cs.grid_points = grid_points(c, o);
    return cs;
}

inline std::string levels_csv(const LevelTable& t) {
    std::string out = "level,submits,cancels,executions,submitted_shares,resting_order_seconds,mu_plus,mu_minus,"
                      "mean_size,q,Q\n";
    double acc = 0.0;
    for (std::size_t i = 0; i < t.counts.size(); ++i) {
        const auto& c = t.counts[i];
        const int level = static_cast<int>(i + 1);
        const auto it = std::find_if(t.stats.begin(), t.stats.end(), [&](const LevelStats& s) { return s.level == level; });
        std::string tail = ",,,,";
        if (it != t.stats.end()) {
            acc += it->expected_depth();
            tail = fmt::format("{},{},{},{},{}", format_number(it->mu_plus), format_number(it->mu_minus),
                               format_number(it->mean_size), format_number(it->expected_depth()), format_number(acc));
        }
        out += fmt::format("{},{},{},{},{},{},{}\n", level, c.submits, c.cancels, c.executions,
                           format_number(c.submitted_shares), format_number(c.resting_order_seconds), tail);
    }
    return out;
}

inline std::string samples_csv(const std::vector<ImbalanceSample>& s) {
    std::string out = "window,delta,down\n";
    for (const auto& x : s) out += fmt::format("{},{},{}\n", x.window, format_number(x.delta), x.down ? 1 : 0);
    return out;
}

inline std::string times_txt(const EventTimes& t) {
    std::string out = "time\n";
    for (double x : t.times) out += format_number(x) + "\n";
    return out;
}

// Figure 1 data: empirical down frequency per integer imbalance against the fitted curve.
inline std::string logistic_csv(const std::vector<ImbalanceSample>& s, const LogisticFit& fit) {
    std::map<long, std::pair<std::size_t, std::size_t>> bins;
    for (const auto& x : s) {
        auto& b = bins[std::lround(x.delta)];
        ++b.first;
        b.second += x.down ? 1 : 0;
    }
    std::string out = "delta,n,down_frequency,fitted\n";
    for (const auto& [d, b] : bins) {
        out += fmt::format("{},{},{},{}\n", d, b.first,
                           format_number(static_cast<double>(b.second) / static_cast<double>(b.first)),
                           format_number(fit.probability_down(static_cast<double>(d))));
    }
    return out;
}

inline std::string hawkes_txt(const HawkesFit& f, double rho) {
    return fmt::format("nu={}\nA={}\nB={}\nbranching_ratio={}\nrho={}\nhalf_life_days={}\nlog_likelihood={}\n"
                       "converged={}\n",
                       format_number(f.params.nu), format_number(f.params.A), format_number(f.params.B),
                       format_number(f.params.branching_ratio()), format_number(rho),
                       format_number(half_life_days(rho)), format_number(f.log_likelihood), f.converged ? 1 : 0);
}

struct StockRun {
    std::optional<CalibrationOutput> output;
    std::string error;
    bool empty{false};
};

} // namespace detail

// Runs lob -> calibration -> hawkes for every [stock] with a file. Stocks run concurrently;
// outputs are assembled in config order. Returns the process exit status.
inline int run_calibrate(const Config& config, const RunOptions& opt) {
    auto& log = *opt.log;
    std::vector<const ConfigSection*> stocks;
    for (const auto* s : config.of_kind("stock")) {
        if (s->get("file")) stocks.push_back(s);
    }
    std::vector<std::future<detail::StockRun>> jobs;
    for (const auto* s : stocks) {
        jobs.push_back(std::async(std::launch::async, [&config, &opt, s] {
            detail::StockRun run;
            try {
                const auto cs = detail::settings_for(config, *s, opt);
                const auto events = parse_file(config.resolve(*s->get("file")).string());
                if (events.empty()) {
                    run.empty = true;
                    return run;
                }
                run.output = calibrate_events(s->name, events, cs);
            } catch (const std::exception& e) {
                run.error = e.what();
            }
            return run;
        }));
    }
    std::vector<Record> records;
    std::string manifest = "stock,error\n";
    std::size_t failures = 0;
    for (std::size_t i = 0; i < stocks.size(); ++i) {
        auto run = jobs[i].get();
        const auto& name = stocks[i]->name;
        if (run.empty) {
            log << fmt::format("warning: {}: message file has no events; no record written\n", name);
            continue;
        }
        if (!run.output) {
            ++failures;
            std::string msg = run.error;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            manifest += fmt::format("{},{}\n", name, msg);
            log << fmt::format("error: {}: {}\n", name, run.error);
            continue;
        }
        const auto& o = *run.output;
        for (const auto& w : o.warnings) log << fmt::format("warning: {}: {}\n", name, w);
        const auto dir = opt.out_dir / detail::safe_name(name);
        detail::write_file(dir / "levels.csv", detail::levels_csv(o.levels));
        detail::write_file(dir / "imbalance.csv", detail::samples_csv(o.samples));
        detail::write_file(dir / "sell_times.csv", detail::times_txt(o.sell_times));
        detail::write_file(dir / "buy_times.csv", detail::times_txt(o.buy_times));
        detail::write_file(dir / "logistic_fit.csv", detail::logistic_csv(o.samples, o.logistic));
        detail::write_file(dir / "hawkes.txt", detail::hawkes_txt(o.hawkes, *o.record.get("rho")));
        records.push_back(o.record);
    }
    if (stocks.empty()) log << "warning: no [stock] sections with a message file; writing empty records\n";
    std::ostringstream rec;
    write_records(rec, records);
    detail::write_file(opt.out_dir / "records.csv", rec.str());
    detail::write_file(opt.out_dir / "errors.csv", manifest);
    log << fmt::format("calibrated {} of {} stocks\n", records.size(), stocks.size());
    return failures > 0 && failures == stocks.size() ? 1 : 0;
}

// Parameter inputs for strategize / compare.
struct StockInputs {
    std::string stock;
    ImpactParameters params;
    double x0{0.0};
    double horizon{kTradingDaySeconds};
    double price{1.0};
    double tick_size{0.01};
    std::optional<double> best_depth;
};

namespace detail {

inline ImpactParameters params_from_record(const Record& r) {
    const auto eta = r.get("instantaneous_bps");
    const auto lambda = r.get("permanent_bps");
    if (!eta || !lambda) throw DataError("record " + r.stock + " lacks instantaneous_bps or permanent_bps");
    double rho = 0.0;
    if (auto v = r.get("rho")) {
        rho = *v;
    } else if (auto h = r.get("half_life_days")) {
        rho = std::numbers::ln2 / (*h * kTradingDaySeconds);
    } else {
        throw DataError("record " + r.stock + " lacks rho and half_life_days");
    }
    ImpactParameters p;
    p.eta = *eta;
    p.lambda = *lambda;
    p.gamma = r.get("gamma_bps").value_or(*lambda / r.get("mu").value_or(1.0));
    p.rho = rho;
    p.unit = PriceUnit::basis_point;
    p.validate();
    return p;
}

inline std::vector<std::pair<StockInputs, std::string>> gather_inputs(const Config& c) {
    std::vector<std::pair<StockInputs, std::string>> out; // inputs, error
    std::vector<Record> records;
    for (const auto& f : c.global.all("records")) {
        for (auto& r : read_records(c.resolve(f))) records.push_back(std::move(r));
    }
    const auto section = [&](const std::string& name) -> const ConfigSection* {
        for (const auto* s : c.of_kind("stock")) {
            if (s->name == name) return s;
        }
        return nullptr;
    };
    const auto finish = [&](StockInputs in, const Record* r, const ConfigSection* s) {
        const ConfigSection empty;
        const ConfigSection& sec = s ? *s : empty;
        const auto pick = [&](const std::string& key) -> std::optional<double> {
            if (s && s->get(key)) return c.maybe_number(*s, key);
            if (r && r->get(key)) return r->get(key);
            return c.maybe_number(sec, key);
        };
        in.horizon = pick("horizon").value_or(kTradingDaySeconds);
        in.price = pick("price").value_or(1.0);
        in.tick_size = pick("tick_size").value_or(0.01);
        in.best_depth = pick("best_depth");
        if (in.best_depth && std::isnan(*in.best_depth)) in.best_depth.reset();
        if (auto x0 = pick("x0")) {
            in.x0 = *x0;
        } else if (auto adv = pick("adv")) {
            in.x0 = c.number(sec, "x0_adv_fraction", 0.05) * *adv;
        } else {
            throw DataError("stock " + in.stock + " has no x0 or adv");
        }
        return in;
    };
    std::set<std::string> seen;
    for (const auto& r : records) {
        StockInputs in;
        in.stock = r.stock;
        try {
            in.params = params_from_record(r);
            out.emplace_back(finish(in, &r, section(r.stock)), "");
        } catch (const std::exception& e) {
            out.emplace_back(in, e.what());
        }
        seen.insert(r.stock);
    }
    for (const auto* s : c.of_kind("stock")) {
        if (seen.contains(s->name) || !s->get("eta_bps")) continue;
        StockInputs in;
        in.stock = s->name;
        try {
            Record r;
            r.stock = s->name;
            for (const auto* key : {"eta_bps", "lambda_bps", "gamma_bps", "rho", "monitor_rate"}) {
                if (auto v = c.maybe_number(*s, key)) {
                    const std::string k = key;
                    r.values[k == "eta_bps"        ? "instantaneous_bps"
                             : k == "lambda_bps"   ? "permanent_bps"
                             : k == "monitor_rate" ? "mu"
                                                   : k] = *v;
                }
            }
            in.params = params_from_record(r);
            out.emplace_back(finish(in, nullptr, s), "");
        } catch (const std::exception& e) {
            out.emplace_back(in, e.what());
        }
    }
    return out;
}

} // namespace detail

// Writes the ALL schedule table for every stock with parameters.
inline int run_strategize(const Config& config, const RunOptions& opt) {
    auto& log = *opt.log;
    const auto inputs = detail::gather_inputs(config);
    const auto grid = detail::grid_points(config, opt);
    std::size_t failures = 0;
    for (const auto& [in, error] : inputs) {
        if (!error.empty()) {
            ++failures;
            log << fmt::format("error: {}: {}\n", in.stock, error);
            continue;
        }
        const auto s = optimal_schedule({in.x0, in.horizon, in.params}, grid);
        std::ostringstream out;
        write_schedule(out, s, in.params);
        detail::write_file(opt.out_dir / detail::safe_name(in.stock) / "schedule_all.csv", out.str());
    }
    if (inputs.empty()) log << "warning: no parameter records found\n";
    return failures > 0 && failures == inputs.size() ? 1 : 0;
}

// ALL/INS/TMP costs per stock. TMP is always in comparison.csv; the headline file carries it only with include_tmp.
inline int run_compare(const Config& config, const RunOptions& opt) {
    auto& log = *opt.log;
    const auto inputs = detail::gather_inputs(config);
    const auto grid = detail::grid_points(config, opt);
    std::ostringstream costs, headline;
    costs << "stock,strategy,instantaneous,transient,permanent,total,pct_of_notional,unit,block_cost_convention\n";
    headline << "stock,x0,horizon,cost_all,cost_ins,improvement_pct,ins_over_all";
    if (opt.include_tmp) headline << ",cost_tmp,tmp_warning";
    headline << '\n';
    std::size_t failures = 0;
    for (const auto& [in, error] : inputs) {
        if (!error.empty()) {
            ++failures;
            log << fmt::format("error: {}: {}\n", in.stock, error);
            continue;
        }
        auto c = compare(in.params, in.x0, in.horizon, in.price, in.tick_size, grid, in.best_depth);
        c.stock = in.stock;
        write_comparison_rows(costs, c, false);
        headline << fmt::format("{},{},{},{},{},{},{}", c.stock, format_number(c.x0), format_number(c.horizon),
                                format_number(c.get(StrategyKind::all).cost.total),
                                format_number(c.get(StrategyKind::ins).cost.total), format_number(c.improvement_pct),
                                format_number(c.ins_over_all));
        if (opt.include_tmp) {
            headline << ',' << format_number(c.get(StrategyKind::tmp).cost.total) << ','
                     << (c.tmp_warning ? "block_exceeds_best_depth" : "");
        }
        headline << '\n';
        if (c.tmp_warning) log << fmt::format("warning: {}: {}\n", c.stock, *c.tmp_warning);
        const auto dir = opt.out_dir / detail::safe_name(c.stock);
        std::ostringstream paths;
        write_paths(paths, c);
        detail::write_file(dir / "paths.csv", paths.str());
        for (const auto& s : c.strategies) {
            std::ostringstream t;
            write_schedule(t, s.schedule, c.params);
            std::string name(to_string(s.kind));
            std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
            detail::write_file(dir / ("schedule_" + name + ".csv"), t.str());
        }
    }
    if (inputs.empty()) log << "warning: no parameter records found\n";
    detail::write_file(opt.out_dir / "comparison.csv", costs.str());
    detail::write_file(opt.out_dir / "improvement.csv", headline.str());
    return failures > 0 && failures == inputs.size() ? 1 : 0;
}

// Distribution table over the records files named in the config (or extra paths).
inline int run_summary(const Config& config, const RunOptions& opt, const std::vector<fs::path>& extra = {}) {
    auto& log = *opt.log;
    std::vector<Record> records;
    for (const auto& f : config.global.all("records")) {
        for (auto& r : read_records(config.resolve(f))) records.push_back(std::move(r));
    }
    for (const auto& p : extra) {
        for (auto& r : read_records(p)) records.push_back(std::move(r));
    }
    if (records.empty()) {
        log << "error: summary needs at least one record\n";
        return 1;
    }
    const auto s = summarize(records);
    std::ostringstream out;
    write_summary(out, s);
    detail::write_file(opt.out_dir / "summary.csv", out.str());
    // Figure 3 data.
    std::ostringstream box;
    box << "column,min,p25,median,p75,max\n";
    for (const auto& [name, d] : s) {
        box << fmt::format("{},{},{},{},{},{}\n", name, format_number(d.min), format_number(d.p25),
                           format_number(d.median), format_number(d.p75), format_number(d.max));
    }
    detail::write_file(opt.out_dir / "boxplot.csv", box.str());
    log << fmt::format("summarized {} records\n", records.size());
    return 0;
}

// ---------------------------------------------------------------- simulate

struct MarketRun {
    MarketSpec spec;
    std::optional<std::tuple<double, double, double>> inject_twap; // x, T, mean size
};

[[nodiscard]] inline MarketRun market_from_section(const Config& c, const ConfigSection& s) {
    MarketRun run;
    auto& m = run.spec;
    m.levels.clear();
    m.seed = static_cast<std::uint64_t>(c.number(s, "seed", 1));
    m.session.start = c.number(s, "session_start", m.session.start);
    m.session.end = c.number(s, "session_end", m.session.end);
    for (const auto& v : s.all("level")) {
        const auto x = detail::to_numbers(v, 3, "level");
        m.levels.push_back({x[0], x[1], x[2]});
    }
    if (auto v = s.get("ladder")) {
        const auto x = detail::to_numbers(*v, 4, "ladder");
        for (const auto& l : linear_ladder(x[0], static_cast<int>(x[1]), x[2], x[3])) m.levels.push_back(l);
    }
    if (m.levels.empty()) throw DataError("market " + s.name + " needs level or ladder entries");
    const auto hawkes = [&](const std::string& key, HawkesParameters& h) {
        if (auto v = s.get(key)) {
            const auto x = detail::to_numbers(*v, 3, key);
            h = {x[0], x[1], x[2]};
        }
    };
    hawkes("sell", m.sell);
    hawkes("buy", m.buy);
    m.monitor_rate = c.number(s, "monitor_rate", m.monitor_rate);
    if (auto v = s.get("monitor")) {
        if (*v == "grid") {
            m.monitor = MonitorMode::grid;
        } else if (*v != "poisson") {
            throw DataError("monitor must be poisson or grid, got " + *v);
        }
    }
    m.monitor_phase = c.number(s, "monitor_phase", m.monitor_phase);
    m.b0 = c.number(s, "b0", m.b0);
    m.b1 = c.number(s, "b1", m.b1);
    if (auto v = s.get("memory")) m.memory = detail::parse_memory(*v);
    m.imbalance_window = c.number(s, "imbalance_window", m.imbalance_window);
    if (auto v = s.get("held_imbalance")) m.held_imbalance = detail::to_number(*v, "held_imbalance");
    m.market_order_mean_size = c.number(s, "market_order_size", m.market_order_mean_size);
    m.tick_size = c.number(s, "tick_size", m.tick_size);
    m.initial_bid = static_cast<std::int64_t>(c.number(s, "initial_bid", static_cast<double>(m.initial_bid)));
    if (auto v = s.get("inject_twap")) {
        const auto x = detail::to_numbers(*v, 3, "inject_twap");
        run.inject_twap = std::make_tuple(x[0], x[1], x[2]);
    }
    m.validate();
    return run;
}

// One message file per [market] section; --seed replaces each section's seed by seed + index.
inline int run_simulate(const Config& config, const RunOptions& opt) {
    auto& log = *opt.log;
    const auto markets = config.of_kind("market");
    std::vector<std::future<std::string>> jobs;
    std::vector<MarketRun> runs;
    for (std::size_t i = 0; i < markets.size(); ++i) {
        runs.push_back(market_from_section(config, *markets[i]));
        if (opt.seed) runs.back().spec.seed = *opt.seed + i;
    }
    for (const auto& run : runs) {
        jobs.push_back(std::async(std::launch::async, [&run] {
            std::ostringstream out;
            if (run.inject_twap) {
                const auto [x, T, size] = *run.inject_twap;
                inject_strategy(run.spec, twap_schedule(x, T), size).write(out);
            } else {
                generate(run.spec).write(out);
            }
            return out.str();
        }));
    }
    for (std::size_t i = 0; i < markets.size(); ++i) {
        const auto name = detail::safe_name(markets[i]->name);
        detail::write_file(opt.out_dir / (name + ".txt"), jobs[i].get());
        const auto& m = runs[i].spec;
        detail::write_file(opt.out_dir / (name + ".truth.txt"),
                           fmt::format("seed={}\nsell_nu={}\nsell_A={}\nsell_B={}\nbuy_nu={}\nbuy_A={}\nbuy_B={}\n"
                                       "b0={}\nb1={}\nmonitor_rate={}\nsession_start={}\nsession_end={}\n",
                                       m.seed, format_number(m.sell.nu), format_number(m.sell.A),
                                       format_number(m.sell.B), format_number(m.buy.nu), format_number(m.buy.A),
                                       format_number(m.buy.B), format_number(m.b0), format_number(m.b1),
                                       format_number(m.monitor_rate), format_number(m.session.start),
                                       format_number(m.session.end)));
    }
    if (markets.empty()) log << "warning: no [market] sections\n";
    log << fmt::format("simulated {} streams\n", markets.size());
    return 0;
}

} // namespace impact::report
