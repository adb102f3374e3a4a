// Command-line runner: lodestro {solve|sweep|tune} [--config FILE] [path=value ...]

#include <lodestro/xcli/commands.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    namespace xcli = lodestro::xcli;
    CLI::App app{"Accelerated flux-split transport solver: single solves, parameter sweeps and tuning"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 0;
    bool plot = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON experiment configuration");
        sub->add_option("-s,--set", overrides, "Override a field, dotted path: accel.beta=0.4");
        sub->add_option("overrides", overrides, "Further path=value overrides");
        sub->add_option("--out-dir", out_dir, "Directory for reports and plots");
        sub->add_option("--seed", seed, "Root seed (overrides the config's seed)");
        sub->add_option("--jobs", jobs, "Worker threads for sweeps and tuning (0 = all cores)");
        sub->add_flag("--plot", plot, "Also write SVG plots");
    };
    auto* solve = app.add_subcommand("solve", "Run one accelerated solve");
    auto* sweep = app.add_subcommand("sweep", "Exhaustive beta x m x d sweep");
    auto* tune = app.add_subcommand("tune", "Sequential parameter tuning");
    for (auto* sub : {solve, sweep, tune}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : xcli::exit_config_error;
    }

    xcli::ExperimentConfig cfg;
    try {
        if (seed) overrides.push_back("seed=" + std::to_string(*seed));
        cfg = xcli::load_config(config_path.empty() ? std::nullopt : std::optional<std::string>(config_path),
                                overrides);
    } catch (const xcli::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return xcli::exit_config_error;
    }

    const xcli::RunOptions opts{out_dir, jobs, plot};
    try {
        if (solve->parsed()) return xcli::cmd_solve(cfg, opts, std::cerr);
        if (sweep->parsed()) return xcli::cmd_sweep(cfg, opts, std::cerr);
        return xcli::cmd_tune(cfg, opts, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return xcli::exit_solve_failure;
    }
}
