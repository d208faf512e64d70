// Acceptance checks. One PASS/FAIL line per criterion; `--criterion N` runs a single one.

#include "impact/impact.hpp"

#include "generators.hpp"
#include "oracles.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace impact;
namespace fs = std::filesystem;

namespace {

const fs::path kData{IMPACT_TEST_DATA};

struct Outcome {
    bool pass{true};
    std::string detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome criterion1() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1);
    double worst_end = 0.0, worst_sym = 0.0, worst_stat = 0.0, min_rate = 1.0;
    for (int i = 0; i < 100; ++i) {
        const auto p = gen::random_problem(rng);
        const auto s = optimal_schedule(p);
        o.check(std::abs(s.holdings(0.0) - p.x0) <= 1e-9 * p.x0, fmt::format("X_0 != x0 (set {})", i));
        worst_end = std::max(worst_end, std::abs(s.holdings(p.horizon)) / p.x0);
        const double mid = s.rate(p.horizon / 2.0);
        for (double t : numerics::linspace(0.0, p.horizon, 1001)) {
            min_rate = std::min(min_rate, s.rate(t) / mid);
            worst_sym = std::max(worst_sym, std::abs(s.rate(t) - s.rate(p.horizon - t)) / mid);
        }
        worst_stat = std::max(worst_stat, stationarity_residual(s, p.params));
    }
    const double elapsed = seconds_since(t0);
    o.check(worst_end <= 1e-9, fmt::format("X_T/x0 = {:.2e}", worst_end));
    o.check(min_rate > 0.0, "non-positive rate");
    o.check(worst_sym <= 1e-10, fmt::format("symmetry {:.2e}", worst_sym));
    o.check(worst_stat < 1e-6, fmt::format("stationarity residual {:.2e}", worst_stat));
    o.check(elapsed < 10.0, fmt::format("runtime {:.1f}s", elapsed));
    if (o.pass) {
        o.detail = fmt::format("100 sets: |X_T|/x0 {:.1e}, symmetry {:.1e}, residual {:.1e}, {:.2f}s", worst_end,
                               worst_sym, worst_stat, elapsed);
    }
    return o;
}

Outcome criterion2() {
    Outcome o;
    std::mt19937_64 rng(2);
    double worst_twap = 0.0, worst_ow = 0.0, worst_block = 0.0;
    for (int i = 0; i < 20; ++i) {
        auto p = gen::random_problem(rng);
        p.params.gamma = 1e-8 * p.params.eta * p.params.rho;
        for (double t : numerics::linspace(0.0, p.horizon, 2001)) {
            worst_twap = std::max(worst_twap, std::abs(optimal_path(p, t) - twap_path(p.x0, p.horizon, t)) / p.x0);
        }
        p.params.gamma = 1e6 * p.params.eta;
        const double block = p.x0 / (p.params.rho * p.horizon + 2.0);
        worst_block = std::max(worst_block, std::abs(ow_block_size(p.x0, p.params.rho, p.horizon) - block) / p.x0);
        for (double t : numerics::linspace(0.01 * p.horizon, 0.99 * p.horizon, 981)) {
            // OW line: x0 - block - rho block t.
            const double line = p.x0 - block - p.params.rho * block * t;
            worst_ow = std::max(worst_ow, std::abs(optimal_path(p, t) - line) / p.x0);
        }
    }
    o.check(worst_twap < 1e-6, fmt::format("TWAP distance {:.2e} x0", worst_twap));
    o.check(worst_ow < 1e-3, fmt::format("OW distance {:.2e} x0", worst_ow));
    o.check(worst_block < 1e-12, "block size");
    if (o.pass) o.detail = fmt::format("TWAP sup {:.1e} x0, OW interior sup {:.1e} x0", worst_twap, worst_ow);
    return o;
}

Outcome criterion3() {
    Outcome o;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> coef(-0.5, 0.5);
    int cases = 0, failures = 0;
    for (int i = 0; i < 10; ++i) {
        const auto p = gen::random_problem(rng);
        const auto best = optimal_schedule(p, 1025);
        const double base = execution_cost(best, p.params, 100.0).total;
        for (int d = 0; d < 5; ++d) {
            const std::array<double, 3> a{coef(rng), coef(rng), coef(rng)};
            for (double eps : {-1e-2, -1e-3, 1e-3, 1e-2}) {
                const auto s = custom_schedule(p.x0, p.horizon, [&, eps, a](double t) {
                    double dv = 0.0;
                    for (int j = 1; j <= 3; ++j) {
                        const double w = j * std::numbers::pi / p.horizon;
                        dv += a[j - 1] * p.x0 * w * std::cos(w * t);
                    }
                    return best.rate(t) - eps * dv;
                }, 1025);
                ++cases;
                if (execution_cost(s, p.params, 100.0).total < base) ++failures;
            }
        }
    }
    o.check(failures == 0, fmt::format("{} of {} perturbations cheaper than ALL", failures, cases));
    int ins_fail = 0;
    for (int i = 0; i < 100; ++i) {
        auto p = gen::random_problem(rng);
        if (i % 10 == 0) p.params.gamma = 0.0;
        const double all = execution_cost(optimal_schedule(p), p.params, 100.0).total;
        const double ins = execution_cost(twap_schedule(p.x0, p.horizon), p.params, 100.0).total;
        const bool ok = p.params.gamma > 0.0 ? all < ins : all <= ins * (1.0 + 1e-12);
        if (!ok) ++ins_fail;
    }
    o.check(ins_fail == 0, fmt::format("{} sets with C(ALL) vs C(INS) violated", ins_fail));
    if (o.pass) o.detail = fmt::format("{} perturbations and 100 INS comparisons", cases);
    return o;
}

Outcome criterion4() {
    Outcome o;
    constexpr std::array<double, 10> Q{878.623,  2057.401, 4017.810, 6232.284, 6712.119,
                                       7005.441, 7194.968, 7415.414, 7836.580, 7968.954};
    std::vector<double> depth(Q.begin(), Q.end()), offset;
    for (std::size_t i = 0; i < Q.size(); ++i) offset.push_back(static_cast<double>(i + 1));
    const auto eta = estimate_eta(depth, offset);
    o.check(std::abs(eta.eta - 0.0011) <= 0.1 * 0.0011, fmt::format("eta {:.6f}", eta.eta));

    const auto fit = LogisticFit::from_coefficients(0.0697, 0.7624);
    o.check(std::abs(fit.delta_bar() + 0.0915) <= 2e-4, fmt::format("delta_bar {:.5f}", fit.delta_bar()));
    const auto perm = permanent_impact(fit, 0.5, 115.0);
    o.check(perm.Lambda >= 0.180 && perm.Lambda <= 0.184, fmt::format("Lambda {:.5f}", perm.Lambda));

    // The branching ratio enters at its displayed precision.
    const double ratio = std::round(8.647 / 10.829 * 1e4) / 1e4;
    const double rho = resilience_from_branching(ratio, 19800.0);
    o.check(fmt::format("{:.5e}", rho) == "2.03535e-05", fmt::format("rho {:.7e}", rho));
    o.check(fmt::format("{:.3f}", half_life_days(rho)) == "1.720", fmt::format("half-life {:.4f}", half_life_days(rho)));

    // Conversion applies to the calibrated values at their printed precision (0.0011, 0.0016 ticks).
    const auto printed = [](double v) { return std::stod(fmt::format("{:.1e}", v)); };
    const double eta_bps = to_basis_points(printed(eta.eta), 0.01, 48.625);
    const double lambda_bps = to_basis_points(printed(perm.lambda), 0.01, 48.625);
    o.check(fmt::format("{:.5f}", eta_bps) == "0.00226", fmt::format("eta {:.6f} bps", eta_bps));
    // The permanent column is truncated, not rounded, at four decimals.
    o.check(std::trunc(lambda_bps * 1e4) / 1e4 == 0.0032, fmt::format("lambda {:.6f} bps", lambda_bps));
    if (o.pass) {
        o.detail = fmt::format("eta {:.6f} ticks, delta_bar {:.5f}, Lambda {:.5f}, rho {:.6e}, half-life {:.4f}d, "
                               "{:.5f}/{:.5f} bps",
                               eta.eta, fit.delta_bar(), perm.Lambda, rho, half_life_days(rho), eta_bps, lambda_bps);
    }
    return o;
}

Outcome criterion5() {
    Outcome o;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto params = [&] {
        HawkesParameters p;
        p.nu = 0.05 + 0.5 * u(rng);
        p.B = 0.5 + 20.0 * u(rng);
        p.A = p.B * (0.05 + 0.85 * u(rng));
        return p;
    };
    double worst_ll = 0.0, worst_grad = 0.0;
    for (int s = 0; s < 20; ++s) {
        const auto p = params();
        const auto t = oracle::random_stream(rng, 1000, 1000.0 / 1.3);
        const EventTimes ev(t);
        const double direct = oracle::hawkes_loglik_direct(p.nu, p.A, p.B, t, t.back());
        worst_ll = std::max(worst_ll, std::abs(log_likelihood(p, ev) - direct) / std::abs(direct));
        const auto g = log_likelihood_with_gradient(p, ev);
        for (int k = 0; k < 3; ++k) {
            auto up = p, down = p;
            double* pu = k == 0 ? &up.nu : k == 1 ? &up.A : &up.B;
            double* pd = k == 0 ? &down.nu : k == 1 ? &down.A : &down.B;
            const double h = 1e-6 * *pu;
            *pu += h;
            *pd -= h;
            const double fd = (log_likelihood(up, ev) - log_likelihood(down, ev)) / (2.0 * h);
            const double scale = std::max({std::abs(fd), std::abs(g.gradient[k]), 1.0});
            worst_grad = std::max(worst_grad, std::abs(g.gradient[k] - fd) / scale);
        }
    }
    o.check(worst_ll <= 1e-9, fmt::format("likelihood rel err {:.2e}", worst_ll));
    o.check(worst_grad <= 1e-5, fmt::format("gradient rel err {:.2e}", worst_grad));
    if (o.pass) o.detail = fmt::format("likelihood {:.1e}, gradient {:.1e}", worst_ll, worst_grad);
    return o;
}

Outcome criterion6() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();

    const HawkesParameters truth{0.2, 8.6, 10.8};
    const auto ev = impact::simulate(truth, 50000.0 / truth.stationary_rate(), 2024);
    const auto fit = fit_mle(ev);
    const double e_nu = fit.params.nu / truth.nu - 1.0, e_a = fit.params.A / truth.A - 1.0,
                 e_b = fit.params.B / truth.B - 1.0;
    o.check(std::max({std::abs(e_nu), std::abs(e_a), std::abs(e_b)}) <= 0.05,
            fmt::format("Hawkes errors {:.3f}/{:.3f}/{:.3f}", e_nu, e_a, e_b));

    MarketSpec book;
    book.levels = linear_ladder(0.001, 8, 100.0, 0.1);
    book.sell = {0.1, 0.5, 2.0};
    book.buy = {0.1, 0.5, 2.0};
    book.market_order_mean_size = 50.0;
    book.monitor_rate = 0.2;
    book.session = {100.0, 5100.0};
    book.seed = 2;
    ReplayOptions ro;
    ro.session = book.session;
    ro.max_levels = 8;
    const auto table = level_statistics(replay(generate(book).events, ro), Side::ask);
    const auto eta = estimate_eta(std::span<const LevelStats>(table.stats));
    o.check(std::abs(eta.eta / 0.001 - 1.0) <= 0.05, fmt::format("eta {:.6f}", eta.eta));

    MarketSpec mk;
    mk.levels = {{5.0, 0.05, 100.0}, {1.0, 0.05, 100.0}};
    mk.sell = {0.6, 1.0, 4.0};
    mk.buy = {0.6, 1.0, 4.0};
    mk.market_order_mean_size = 20.0;
    mk.monitor = MonitorMode::grid;
    mk.memory = ImbalanceMemory::per_window;
    mk.session = {50.0, 20050.0};
    mk.seed = 33;
    ReplayOptions lo;
    lo.session = mk.session;
    ImbalanceOptions io;
    io.memory = ImbalanceMemory::per_window;
    const auto lf = fit_logistic(imbalance_series(replay(generate(mk).events, lo), io));
    const double z0 = (lf.b0 - mk.b0) / lf.se_b0, z1 = (lf.b1 - mk.b1) / lf.se_b1;
    o.check(std::abs(z0) <= 2.0 && std::abs(z1) <= 2.0, fmt::format("logistic z {:.2f}/{:.2f}", z0, z1));

    const double elapsed = seconds_since(t0);
    o.check(elapsed < 120.0, fmt::format("runtime {:.1f}s", elapsed));
    if (o.pass) {
        o.detail = fmt::format("Hawkes {:+.3f}/{:+.3f}/{:+.3f} on {} events, eta {:+.3f}, B0/B1 at {:+.2f}/{:+.2f} SE, "
                               "{:.1f}s",
                               e_nu, e_a, e_b, ev.size(), eta.eta / 0.001 - 1.0, z0, z1, elapsed);
    }
    return o;
}

Outcome criterion7() {
    Outcome o;
    const auto p = gen::intc_problem(199400.0);
    const auto c = report::compare(p.params, p.x0, p.horizon, 48.625, 0.01, kDefaultGridPoints, 878.623);
    const double all = c.get(StrategyKind::all).cost.total, ins = c.get(StrategyKind::ins).cost.total,
                 tmp = c.get(StrategyKind::tmp).cost.total;
    o.check(std::abs(c.improvement_pct - 7.479) <= 0.5, fmt::format("improvement {:.3f}% (target 7.479)",
                                                                    c.improvement_pct));
    o.check(all < ins && ins < tmp, fmt::format("ordering ALL {:.4f} INS {:.4f} TMP {:.4f}", all, ins, tmp));
    o.check(std::abs(c.ins_over_all - 1.081) <= 0.02, fmt::format("C_INS/C_ALL {:.4f} (target 1.081)",
                                                                  c.ins_over_all));
    if (o.pass) o.detail = fmt::format("improvement {:.3f}%, ratio {:.4f}", c.improvement_pct, c.ins_over_all);
    return o;
}

Outcome criterion8() {
    Outcome o;
    const auto dir = fs::temp_directory_path() / "impact_acceptance_summary";
    fs::remove_all(dir);
    std::ostringstream log;
    report::RunOptions opt;
    opt.out_dir = dir;
    opt.log = &log;
    if (report::run_summary(report::Config{}, opt, {kData / "nasdaq100_impact_rows.csv"}) != 0) {
        return {false, "summary failed: " + log.str()};
    }
    std::ifstream in(dir / "summary.csv");
    const auto table = report::read_csv(in);
    const auto stat = [&](const std::string& column, const std::string& name) {
        std::size_t col = 0;
        for (; col < table.header.size(); ++col) {
            if (table.header[col] == name) break;
        }
        for (const auto& row : table.rows) {
            if (row[0] == column) return std::stod(row[col]);
        }
        return std::nan("");
    };
    const auto near = [&](const std::string& column, const std::string& name, double target, double tol) {
        const double v = stat(column, name);
        o.check(std::abs(v - target) <= tol, fmt::format("{} {} {:.4f} (target {})", column, name, v, target));
    };
    near("instantaneous_bps", "mean", 0.022, 0.0005);
    near("permanent_bps", "mean", 0.008, 0.0005);
    near("half_life_days", "mean", 0.608, 0.0005);
    near("improvement_pct", "mean", 3.149, 0.0005);
    near("improvement_pct", "sd", 1.068, 0.0005);
    near("improvement_pct", "max", 8.760, 0.0005);
    near("improvement_pct", "min", 1.839, 0.0005);
    if (o.pass) o.detail = "all summary statistics within rounding";
    return o;
}

Outcome criterion9() {
    Outcome o;
    const auto cfg = report::Config::load(kData / "fixture_calibrate.cfg");
    const auto base = fs::temp_directory_path() / "impact_acceptance_determinism";
    fs::remove_all(base);
    std::ostringstream log;
    for (const char* run : {"a", "b"}) {
        report::RunOptions opt;
        opt.out_dir = base / run;
        opt.log = &log;
        if (report::run_calibrate(cfg, opt) != 0) return {false, "calibrate failed: " + log.str()};
    }
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(base / "a")) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), base / "a");
        o.check(fs::exists(base / "b" / rel) && slurp(e.path()) == slurp(base / "b" / rel),
                "differs: " + rel.string());
        ++files;
    }
    std::size_t other = 0;
    for (const auto& e : fs::recursive_directory_iterator(base / "b")) other += e.is_regular_file() ? 1 : 0;
    o.check(files == other && files > 0, "file sets differ");
    if (o.pass) o.detail = fmt::format("{} files byte-identical", files);
    return o;
}

const std::array<std::function<Outcome()>, 9> kCriteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                        criterion6, criterion7, criterion8, criterion9};

} // namespace

int main(int argc, char** argv) {
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--criterion" && i + 1 < argc) {
            which.push_back(std::atoi(argv[++i]));
        } else {
            fmt::print(stderr, "usage: {} [--criterion N]...\n", argv[0]);
            return 2;
        }
    }
    if (which.empty()) {
        for (int n = 1; n <= 9; ++n) which.push_back(n);
    }
    bool all_pass = true;
    for (int n : which) {
        if (n < 1 || n > 9) {
            fmt::print(stderr, "no criterion {}\n", n);
            return 2;
        }
        Outcome out;
        try {
            out = kCriteria[static_cast<std::size_t>(n - 1)]();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        fmt::print("criterion {}: {} {}\n", n, out.pass ? "PASS" : "FAIL", out.detail);
        all_pass = all_pass && out.pass;
    }
    return all_pass ? 0 : 1;
}
