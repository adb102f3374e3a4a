#pragma once

// The solve / sweep / tune commands: run the configured experiment and
// write the JSON report, CSV data and optional SVG plots into an output
// directory. Exit codes: 0 success, 1 solve failure (files still written),
// 2 configuration error (nothing written).

#include <lodestro/experiment.hpp>
#include <lodestro/tune.hpp>
#include <lodestro/xcli/config.hpp>
#include <lodestro/xcli/svg.hpp>

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <system_error>
#include <vector>

namespace lodestro::xcli {

inline constexpr const char* solve_schema = "lodestro.solve-report/1";
inline constexpr const char* sweep_schema = "lodestro.sweep-report/1";
inline constexpr const char* tune_schema = "lodestro.tune-report/1";

inline constexpr int exit_ok = 0;
inline constexpr int exit_solve_failure = 1;
inline constexpr int exit_config_error = 2;

struct RunOptions {
    std::filesystem::path out_dir = ".";
    std::size_t jobs = 0;
    bool plot = false;
};

/// Shortest round-trip text; empty for NaN/inf (CSV "missing").
inline std::string csv_number(double v) {
    if (!std::isfinite(v)) return "";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

inline std::string dump_report(const json& j) { return j.dump(2) + "\n"; }

inline json trace_json(const accel::SolveReport& r) {
    json trace = json::array();
    for (const auto& e : r.trace) {
        trace.push_back({{"k", e.k},
                         {"residual", number_or_null(e.residual)},
                         {"beta", number_or_null(e.beta)},
                         {"m", e.depth},
                         {"f_norm", number_or_null(e.f_norm)},
                         {"gain", number_or_null(e.gain)},
                         {"lsq_residual", number_or_null(e.lsq_residual)},
                         {"linear_residual", number_or_null(e.linear_residual)}});
    }
    return trace;
}

inline std::string trace_csv(const accel::SolveReport& r) {
    std::string out = "k,residual,beta,m,f_norm,gain,lsq_residual,linear_residual\r\n";
    for (const auto& e : r.trace) {
        out += std::to_string(e.k) + "," + csv_number(e.residual) + "," + csv_number(e.beta) + "," +
               std::to_string(e.depth) + "," + csv_number(e.f_norm) + "," + csv_number(e.gain) + "," +
               csv_number(e.lsq_residual) + "," + csv_number(e.linear_residual) + "\r\n";
    }
    return out;
}

inline json provenance(const ExperimentConfig& cfg, const char* schema) {
    return {{"schema", schema}, {"config", to_json(cfg)}, {"config_hash", config_hash(cfg)}, {"seed", cfg.seed}};
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
}

/// Single solve: report.json, trace.csv, convergence.svg (with plot).
inline int cmd_solve(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log) {
    const ProblemConfig problem = cfg.problem_for(0);
    accel::SolveReport report = solve_problem(problem, cfg.accel, cfg.output.record_linear_residual);

    json j = provenance(cfg, solve_schema);
    j["status"] = std::string(accel::to_string(report.status));
    j["iterations"] = report.iterations;
    j["evaluations"] = report.evaluations;
    j["message"] = report.message;
    j["noise_seed"] = problem.noise ? json(problem.noise->seed) : json(nullptr);
    j["trace"] = trace_json(report);
    j["final_iterate"] = report.final_iterate;

    ensure_dir(opts.out_dir);
    write_text(opts.out_dir / "report.json", dump_report(j));
    write_text(opts.out_dir / "trace.csv", trace_csv(report));
    if (opts.plot || cfg.output.plot) {
        svg::Series res{"residual", {}, {}};
        svg::Series lin{"linear residual", {}, {}};
        for (const auto& e : report.trace) {
            res.x.push_back(static_cast<double>(e.k));
            res.y.push_back(e.residual);
            lin.x.push_back(static_cast<double>(e.k));
            lin.y.push_back(e.linear_residual);
        }
        std::vector<svg::Series> series{res};
        if (cfg.output.record_linear_residual) series.push_back(lin);
        write_text(opts.out_dir / "convergence.svg",
                   svg::line_chart_log("Convergence history", "iteration k", "residual", series));
    }
    log << "solve: " << accel::to_string(report.status) << " after " << report.iterations << " iterations\n";
    return report.converged() ? exit_ok : exit_solve_failure;
}

/// Cells of the beta x m x d grid, d slowest, beta fastest.
inline std::vector<tune::Sample> sweep_cells(const SweepSpec& s) {
    return tune::cartesian({s.d, s.m, s.beta});
}

inline tune::ParamSpace sweep_space(const SweepSpec& s) {
    auto hi = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
    auto lo = [](const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); };
    tune::ParamSpace space;
    space.add("d", tune::dim_kind::integer, lo(s.d), std::max(hi(s.d), lo(s.d) + 1));
    space.add("m", tune::dim_kind::integer, lo(s.m), std::max(hi(s.m), lo(s.m) + 1));
    space.add("beta", tune::dim_kind::continuous, lo(s.beta), std::max(hi(s.beta), lo(s.beta) + 1e-9));
    return space;
}

/// Exhaustive beta x m x d grid: sweep.csv, sweep.json, heatmap_d<d>.svg.
inline int cmd_sweep(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log) {
    const auto cells = sweep_cells(cfg.sweep);
    const tune::ParamSpace space = sweep_space(cfg.sweep);
    tune::Experiment ex{cfg.problem_for(0), cfg.accel, false};
    ex.problem.noise.reset();
    if (cfg.noise) ex.problem.noise = flux::NoiseModel{cfg.noise->amplitude, cfg.noise->correlation_length, 0};
    const auto records = tune::run_sweep(cells, tune::make_objective(space, ex, cfg.seed), opts.jobs);

    std::string csv = "beta,m,d,iterations,status\r\n";
    json rows = json::array();
    std::size_t converged = 0;
    for (const auto& r : records) {
        const double d = r.params[0], m = r.params[1], b = r.params[2];
        csv += csv_number(b) + "," + csv_number(m) + "," + csv_number(d) + "," +
               (r.converged() ? std::to_string(r.iterations) : std::string()) + "," +
               std::string(accel::to_string(r.status)) + "\r\n";
        rows.push_back({{"beta", b},
                        {"m", m},
                        {"d", d},
                        {"iterations", r.converged() ? json(r.iterations) : json(nullptr)},
                        {"status", std::string(accel::to_string(r.status))},
                        {"noise_seed", ex.problem.noise ? json(r.seed) : json(nullptr)}});
        converged += r.converged() ? 1 : 0;
    }
    json j = provenance(cfg, sweep_schema);
    j["cells"] = rows;
    j["converged_cells"] = converged;

    ensure_dir(opts.out_dir);
    write_text(opts.out_dir / "sweep.csv", csv);
    write_text(opts.out_dir / "sweep.json", dump_report(j));
    if (opts.plot || cfg.output.plot) {
        const auto& betas = cfg.sweep.beta;
        const auto& ms = cfg.sweep.m;
        for (std::size_t di = 0; di < cfg.sweep.d.size(); ++di) {
            std::vector<std::vector<std::optional<double>>> grid(ms.size(),
                                                                  std::vector<std::optional<double>>(betas.size()));
            for (std::size_t mi = 0; mi < ms.size(); ++mi) {
                for (std::size_t bi = 0; bi < betas.size(); ++bi) {
                    const auto& r = records[(di * ms.size() + mi) * betas.size() + bi];
                    if (r.converged()) grid[mi][bi] = static_cast<double>(r.iterations);
                }
            }
            const std::string d_text = csv_number(cfg.sweep.d[di]);
            write_text(opts.out_dir / ("heatmap_d" + d_text + ".svg"),
                       svg::heatmap("Iterations to tolerance, d = " + d_text, "beta", "m", betas, ms, grid));
        }
    }
    log << "sweep: " << converged << " of " << records.size() << " cells converged\n";
    return converged > 0 ? exit_ok : exit_solve_failure;
}

inline json trial_json(const tune::ParamSpace& space, const tune::TrialRecord& t, bool noisy) {
    json params = json::object();
    for (std::size_t i = 0; i < space.size(); ++i) params[space.dims()[i].name] = t.params[i];
    return {{"index", t.index},
            {"phase", t.phase},
            {"params", params},
            {"objective", t.objective},
            {"status", std::string(accel::to_string(t.status))},
            {"iterations", t.converged() ? json(t.iterations) : json(nullptr)},
            {"noise_seed", noisy ? json(t.seed) : json(nullptr)}};
}

/// Tuning run: tune.json (full history, best trial, seeds), tune.csv,
/// tune.svg (with plot).
inline int cmd_tune(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log) {
    tune::ParamSpace space;
    for (const auto& d : cfg.tune.space) space.add(d.name, d.kind, d.lower, d.upper);
    tune::Experiment ex{cfg.problem_for(0), cfg.accel, false};
    ex.problem.noise.reset();
    if (cfg.noise) ex.problem.noise = flux::NoiseModel{cfg.noise->amplitude, cfg.noise->correlation_length, 0};

    tune::TuneOptions to;
    to.n_initial = cfg.tune.n_initial;
    to.n_total = cfg.tune.n_total;
    to.seed = cfg.seed;
    to.jobs = opts.jobs;
    if (cfg.tune.seed_default) {
        tune::Sample s;
        for (const auto& d : space.dims()) {
            if (d.name == "beta") s.push_back(cfg.accel.beta);
            else if (d.name == "m") s.push_back(static_cast<double>(cfg.accel.m_max));
            else if (d.name == "d") s.push_back(static_cast<double>(cfg.accel.delay));
            else if (d.name == "omega_beta") s.push_back(cfg.accel.omega_beta);
            else if (d.name == "omega_m") s.push_back(cfg.accel.omega_m);
            else s.push_back(cfg.accel.beta_min);
        }
        if (space.contains(s)) to.seeded.push_back(std::move(s));
        else log << "tune: default configuration lies outside the space; not seeded\n";
    }
    const auto result = tune::tune(space, tune::make_objective(space, ex, cfg.seed), to);

    const bool noisy = cfg.noise.has_value();
    json history = json::array();
    std::string csv = "index,phase";
    for (const auto& d : space.dims()) csv += "," + d.name;
    csv += ",objective,status,iterations\r\n";
    for (const auto& t : result.history) {
        history.push_back(trial_json(space, t, noisy));
        csv += std::to_string(t.index) + "," + t.phase;
        for (double v : t.params) csv += "," + csv_number(v);
        csv += "," + csv_number(t.objective) + "," + std::string(accel::to_string(t.status)) + "," +
               (t.converged() ? std::to_string(t.iterations) : std::string()) + "\r\n";
    }
    json j = provenance(cfg, tune_schema);
    j["best"] = trial_json(space, result.best, noisy);
    j["history"] = history;
    j["all_failed"] = result.all_failed;
    j["sampler_seed"] = to.seed;
    j["failure_penalty"] = tune::failure_penalty(cfg.accel);

    ensure_dir(opts.out_dir);
    write_text(opts.out_dir / "tune.json", dump_report(j));
    write_text(opts.out_dir / "tune.csv", csv);
    if (opts.plot || cfg.output.plot) {
        svg::Series obj{"objective", {}, {}};
        svg::Series best{"best so far", {}, {}};
        double running = std::numeric_limits<double>::infinity();
        for (const auto& t : result.history) {
            running = std::min(running, t.objective);
            obj.x.push_back(static_cast<double>(t.index));
            obj.y.push_back(t.objective);
            best.x.push_back(static_cast<double>(t.index));
            best.y.push_back(running);
        }
        write_text(opts.out_dir / "tune.svg", svg::line_chart_log("Tuning history", "trial", "iterations", {obj, best}));
    }
    if (result.all_failed) log << "tune: warning: no trial converged\n";
    log << "tune: best objective " << result.best.objective << " after " << result.history.size() << " trials\n";
    return result.all_failed ? exit_solve_failure : exit_ok;
}

}  // namespace lodestro::xcli
