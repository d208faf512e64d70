// impact_cli: calibrate / strategize / compare / summary / simulate over a config file.

#include "impact/report.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    using namespace impact;
    CLI::App app{"Market impact calibration and optimal execution"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    std::size_t grid_points = 0;
    bool include_tmp = false;
    bool tangent = false;
    std::vector<std::string> inputs;

    const auto common = [&](CLI::App* sub, bool need_config) {
        auto* c = sub->add_option("--config", config_path, "config file");
        if (need_config) c->required()->check(CLI::ExistingFile);
        sub->add_option("--out-dir", out_dir, "output directory")->capture_default_str();
        sub->add_option("--grid-points", grid_points, "time grid points for schedules and costs")
            ->check(CLI::Range(3, 1 << 24));
    };

    auto* calibrate = app.add_subcommand("calibrate", "estimate impact parameters from message files");
    common(calibrate, true);
    calibrate->add_flag("--tangent-lambda", tangent, "permanent impact from the logistic slope B1/4");

    auto* strategize = app.add_subcommand("strategize", "tabulate the optimal schedule per stock");
    common(strategize, true);

    auto* cmp = app.add_subcommand("compare", "ALL / INS / TMP execution costs");
    common(cmp, true);
    cmp->add_flag("--include-tmp", include_tmp, "include TMP in the headline table");

    auto* summary = app.add_subcommand("summary", "distribution table over parameter records");
    common(summary, false);
    summary->add_option("records", inputs, "records files")->check(CLI::ExistingFile);

    auto* simulate = app.add_subcommand("simulate", "generate synthetic message files");
    common(simulate, true);
    auto* seed_opt = simulate->add_option("--seed", seed, "base seed, replaces per-market seeds");

    CLI11_PARSE(app, argc, argv);

    report::RunOptions opt;
    opt.out_dir = out_dir;
    opt.include_tmp = include_tmp;
    opt.tangent_lambda = tangent;
    if (grid_points > 0) opt.grid_points = grid_points;
    if (seed_opt->count() > 0) opt.seed = seed;

    try {
        report::Config config;
        if (!config_path.empty()) config = report::Config::load(config_path);
        if (*calibrate) return report::run_calibrate(config, opt);
        if (*strategize) return report::run_strategize(config, opt);
        if (*cmp) return report::run_compare(config, opt);
        if (*summary) {
            std::vector<std::filesystem::path> extra(inputs.begin(), inputs.end());
            return report::run_summary(config, opt, extra);
        }
        if (*simulate) return report::run_simulate(config, opt);
    } catch (const ParseError& e) {
        std::cerr << "error: " << config_path << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
