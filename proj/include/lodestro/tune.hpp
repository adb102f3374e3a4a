#pragma once

// Single-objective sequential tuning of accelerator parameters, plus
// exhaustive cartesian sweeps. The objective is iterations-to-tolerance;
// failed solves score a finite penalty.

#include <lodestro/accel.hpp>
#include <lodestro/errors.hpp>
#include <lodestro/experiment.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace lodestro::tune {

enum class dim_kind { continuous, continuous_log, integer };

inline std::string_view to_string(dim_kind k) {
    switch (k) {
        case dim_kind::continuous: return "continuous";
        case dim_kind::continuous_log: return "continuous_log";
        case dim_kind::integer: return "integer";
    }
    return "unknown";
}

struct Dimension {
    std::string name;
    dim_kind kind = dim_kind::continuous;
    double lower = 0.0;
    double upper = 1.0;
};

/// One point of a ParamSpace, ordered like its dimensions.
using Sample = std::vector<double>;
using Constraint = std::function<bool(const Sample&)>;

class ParamSpace {
public:
    ParamSpace& add(std::string name, dim_kind kind, double lower, double upper) {
        expects(lower < upper, "ParamSpace: lower bound must be below upper bound");
        expects(!index_of(name), "ParamSpace: duplicate dimension name");
        if (kind == dim_kind::continuous_log) expects(lower > 0.0, "ParamSpace: log dimension needs lower > 0");
        if (kind == dim_kind::integer) {
            expects(std::floor(lower) == lower && std::floor(upper) == upper,
                    "ParamSpace: integer bounds must be integral");
        }
        dims_.push_back({std::move(name), kind, lower, upper});
        return *this;
    }

    ParamSpace& constrain(Constraint c) {
        constraints_.push_back(std::move(c));
        return *this;
    }

    [[nodiscard]] const std::vector<Dimension>& dims() const noexcept { return dims_; }
    [[nodiscard]] std::size_t size() const noexcept { return dims_.size(); }
    [[nodiscard]] std::size_t constraint_count() const noexcept { return constraints_.size(); }

    [[nodiscard]] std::optional<std::size_t> index_of(const std::string& name) const {
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            if (dims_[i].name == name) return i;
        }
        return std::nullopt;
    }

    /// Bounds (closed), integrality and every constraint.
    [[nodiscard]] bool contains(const Sample& s) const {
        if (s.size() != dims_.size()) return false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const Dimension& d = dims_[i];
            if (!std::isfinite(s[i]) || s[i] < d.lower || s[i] > d.upper) return false;
            if (d.kind == dim_kind::integer && std::floor(s[i]) != s[i]) return false;
        }
        return std::all_of(constraints_.begin(), constraints_.end(),
                           [&](const Constraint& c) { return c(s); });
    }

    /// Unit-cube coordinate of a value. Integers map to bin centres.
    [[nodiscard]] double to_unit(std::size_t i, double v) const {
        const Dimension& d = dims_[i];
        switch (d.kind) {
            case dim_kind::continuous: return (v - d.lower) / (d.upper - d.lower);
            case dim_kind::continuous_log:
                return std::log(v / d.lower) / std::log(d.upper / d.lower);
            case dim_kind::integer: return (v - d.lower + 0.5) / (d.upper - d.lower + 1.0);
        }
        return 0.0;
    }

    [[nodiscard]] double from_unit(std::size_t i, double u) const {
        const Dimension& d = dims_[i];
        u = std::clamp(u, 0.0, 1.0);
        switch (d.kind) {
            case dim_kind::continuous: return std::clamp(d.lower + u * (d.upper - d.lower), d.lower, d.upper);
            case dim_kind::continuous_log:
                return std::clamp(d.lower * std::pow(d.upper / d.lower, u), d.lower, d.upper);
            case dim_kind::integer: {
                const double v = d.lower + std::floor(u * (d.upper - d.lower + 1.0));
                return std::min(v, d.upper);
            }
        }
        return d.lower;
    }

    [[nodiscard]] std::vector<double> to_unit(const Sample& s) const {
        std::vector<double> u(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) u[i] = to_unit(i, s[i]);
        return u;
    }

    [[nodiscard]] Sample from_unit(const std::vector<double>& u) const {
        Sample s(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) s[i] = from_unit(i, u[i]);
        return s;
    }

    template <class Rng>
    [[nodiscard]] Sample uniform(Rng& rng) const {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<double> u(size());
        for (double& v : u) v = unit(rng);
        return from_unit(u);
    }

    /// Latin hypercube in the unit cube, one stratum per sample and dimension.
    /// Samples that violate a constraint are redrawn uniformly.
    template <class Rng>
    [[nodiscard]] std::vector<Sample> latin_hypercube(std::size_t n, Rng& rng) const {
        std::vector<Sample> out;
        if (n == 0) return out;
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<std::vector<double>> cols(size(), std::vector<double>(n));
        for (std::size_t d = 0; d < size(); ++d) {
            std::vector<std::size_t> perm(n);
            for (std::size_t i = 0; i < n; ++i) perm[i] = i;
            std::shuffle(perm.begin(), perm.end(), rng);
            for (std::size_t i = 0; i < n; ++i) {
                cols[d][i] = (static_cast<double>(perm[i]) + unit(rng)) / static_cast<double>(n);
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> u(size());
            for (std::size_t d = 0; d < size(); ++d) u[d] = cols[d][i];
            Sample s = from_unit(u);
            for (int attempt = 0; !contains(s); ++attempt) {
                expects(attempt < 10000, "ParamSpace: constraints reject every sample drawn");
                s = uniform(rng);
            }
            out.push_back(std::move(s));
        }
        return out;
    }

private:
    std::vector<Dimension> dims_;
    std::vector<Constraint> constraints_;
};

struct TrialRecord {
    std::size_t index = 0;
    std::string phase;
    Sample params;
    double objective = 0.0;
    accel::solve_status status = accel::solve_status::max_iterations;
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
    std::optional<accel::SolveReport> report;

    [[nodiscard]] bool converged() const noexcept { return status == accel::solve_status::converged; }
};

/// Evaluates one sample; `index` is the trial's position in the history.
using Objective = std::function<TrialRecord(const Sample&, std::size_t index)>;

inline double failure_penalty(const accel::AccelConfig& config) {
    return static_cast<double>(config.k_max) + 1000.0;
}

/// Problem and base accelerator settings shared by every trial.
struct Experiment {
    ProblemConfig problem;
    accel::AccelConfig accel;
    bool keep_reports = false;
};

/// Overwrites the accelerator fields named by the space's dimensions.
/// Recognized names: beta, m, d, omega_beta, omega_m, beta_min.
inline accel::AccelConfig apply_sample(const ParamSpace& space, const Sample& s,
                                       accel::AccelConfig base) {
    expects(s.size() == space.size(), "apply_sample: sample does not match space");
    for (std::size_t i = 0; i < s.size(); ++i) {
        const std::string& name = space.dims()[i].name;
        const double v = s[i];
        if (name == "beta") base.beta = v;
        else if (name == "m") base.m_max = static_cast<std::size_t>(std::llround(v));
        else if (name == "d") base.delay = static_cast<std::size_t>(std::llround(v));
        else if (name == "omega_beta") base.omega_beta = v;
        else if (name == "omega_m") base.omega_m = v;
        else if (name == "beta_min") base.beta_min = v;
        else throw contract_error("apply_sample: unknown parameter '" + name + "'");
    }
    return base;
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
    return flux::detail::splitmix64(root ^ flux::detail::splitmix64(index));
}

/// Runs one solve. With noise enabled and `root_seed` set, the noise seed is
/// derived from (root_seed, index); otherwise the configured seed is used.
inline TrialRecord evaluate_objective(const ParamSpace& space, const Sample& s, const Experiment& experiment,
                                      std::size_t index = 0,
                                      std::optional<std::uint64_t> root_seed = std::nullopt) {
    expects(space.contains(s), "evaluate_objective: sample outside the parameter space");
    const accel::AccelConfig config = apply_sample(space, s, experiment.accel);
    ProblemConfig problem = experiment.problem;
    TrialRecord rec;
    rec.index = index;
    rec.params = s;
    if (problem.noise) {
        if (root_seed) problem.noise->seed = derive_seed(*root_seed, index);
        rec.seed = problem.noise->seed;
    }
    accel::SolveReport report = solve_problem(problem, config);
    rec.status = report.status;
    rec.iterations = report.iterations;
    rec.objective = report.converged() ? static_cast<double>(report.iterations) : failure_penalty(config);
    if (experiment.keep_reports) rec.report = std::move(report);
    return rec;
}

inline Objective make_objective(ParamSpace space, Experiment experiment,
                                std::optional<std::uint64_t> root_seed = std::nullopt) {
    auto sp = std::make_shared<const ParamSpace>(std::move(space));
    auto ex = std::make_shared<const Experiment>(std::move(experiment));
    return [sp, ex, root_seed](const Sample& s, std::size_t index) {
        return evaluate_objective(*sp, s, *ex, index, root_seed);
    };
}

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. Results are written by
/// index, so ordering never depends on scheduling. The first exception wins.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, n);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (error) std::rethrow_exception(error);
}

inline std::vector<TrialRecord> evaluate_batch(const std::vector<Sample>& samples, const Objective& objective,
                                               std::size_t first_index, std::size_t jobs) {
    std::vector<TrialRecord> out(samples.size());
    parallel_for(samples.size(), jobs, [&](std::size_t i) {
        out[i] = objective(samples[i], first_index + i);
        out[i].index = first_index + i;
        out[i].params = samples[i];
    });
    return out;
}

/// Cartesian product of per-dimension value lists, last dimension fastest.
inline std::vector<Sample> cartesian(const std::vector<std::vector<double>>& axes) {
    std::vector<Sample> out;
    if (axes.empty()) return out;
    for (const auto& a : axes) {
        if (a.empty()) return out;
    }
    std::vector<std::size_t> idx(axes.size(), 0);
    while (true) {
        Sample s(axes.size());
        for (std::size_t d = 0; d < axes.size(); ++d) s[d] = axes[d][idx[d]];
        out.push_back(std::move(s));
        std::size_t d = axes.size();
        while (d-- > 0) {
            if (++idx[d] < axes[d].size()) break;
            idx[d] = 0;
            if (d == 0) return out;
        }
    }
}

/// start, start + step, ... up to stop (inclusive, within step/1e6).
inline std::vector<double> arange(double start, double stop, double step) {
    expects(step > 0.0, "arange: step must be positive");
    std::vector<double> out;
    const double span = (stop - start) / step;
    const auto count = static_cast<std::size_t>(std::floor(span + 1e-6)) + 1;
    // Rounded to 12 decimals so 0.05-steps print as 0.15, not 0.15000000000000002.
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12);
    }
    return out;
}

/// One trial per cell, in cell order.
inline std::vector<TrialRecord> run_sweep(const std::vector<Sample>& cells, const Objective& objective,
                                          std::size_t jobs = 0) {
    auto out = evaluate_batch(cells, objective, 0, jobs);
    for (auto& rec : out) rec.phase = "sweep";
    return out;
}

/// Lowest objective; ties go to the earliest trial.
inline const TrialRecord& best_of(const std::vector<TrialRecord>& history) {
    expects(!history.empty(), "best_of: empty history");
    const TrialRecord* best = &history.front();
    for (const auto& t : history) {
        if (t.objective < best->objective) best = &t;
    }
    return *best;
}

/// Strategy for the sequential phase.
class Proposer {
public:
    virtual ~Proposer() = default;
    /// `progress` runs from 0 (first refinement trial) towards 1 (last).
    virtual Sample propose(const ParamSpace& space, const std::vector<TrialRecord>& history, double progress,
                           std::mt19937_64& rng) = 0;
};

/// Gaussian perturbations of the incumbent in the unit cube, radius shrinking
/// geometrically with progress. The candidate with the lowest
/// inverse-distance-weighted nearest-neighbour prediction is proposed.
class GaussianNeighborProposer final : public Proposer {
public:
    struct Options {
        double initial_radius = 0.25;
        double final_radius = 0.02;
        std::size_t candidates = 32;
        std::size_t neighbors = 3;
    };

    GaussianNeighborProposer() = default;
    explicit GaussianNeighborProposer(Options opts) : opts_(opts) {
        expects(opts.initial_radius > 0.0 && opts.final_radius > 0.0, "GaussianNeighborProposer: radii must be positive");
        expects(opts.candidates >= 1 && opts.neighbors >= 1, "GaussianNeighborProposer: counts must be positive");
    }

    Sample propose(const ParamSpace& space, const std::vector<TrialRecord>& history, double progress,
                   std::mt19937_64& rng) override {
        expects(!history.empty(), "GaussianNeighborProposer: needs at least one trial");
        std::vector<std::vector<double>> seen;
        seen.reserve(history.size());
        for (const auto& t : history) seen.push_back(space.to_unit(t.params));

        const TrialRecord& incumbent = best_of(history);
        const std::vector<double> centre = space.to_unit(incumbent.params);
        const double radius =
            opts_.initial_radius * std::pow(opts_.final_radius / opts_.initial_radius, std::clamp(progress, 0.0, 1.0));

        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<Sample> pool;
        const std::size_t max_attempts = 16 * opts_.candidates;
        for (std::size_t a = 0; a < max_attempts && pool.size() < opts_.candidates; ++a) {
            std::vector<double> u(centre);
            for (double& v : u) v = std::clamp(v + radius * normal(rng), 0.0, 1.0);
            Sample s = space.from_unit(u);
            if (!space.contains(s) || seen_before(history, s) || in(pool, s)) continue;
            pool.push_back(std::move(s));
        }
        if (pool.empty()) {
            // Neighbourhood exhausted: fall back to an unseen uniform draw.
            for (int a = 0; a < 10000; ++a) {
                Sample s = space.uniform(rng);
                if (space.contains(s) && !seen_before(history, s)) return s;
            }
            return space.uniform(rng);
        }

        std::size_t pick = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < pool.size(); ++c) {
            const double pred = predict(space.to_unit(pool[c]), seen, history);
            if (pred < best) {
                best = pred;
                pick = c;
            }
        }
        return pool[pick];
    }

private:
    static bool in(const std::vector<Sample>& pool, const Sample& s) {
        return std::find(pool.begin(), pool.end(), s) != pool.end();
    }
    static bool seen_before(const std::vector<TrialRecord>& history, const Sample& s) {
        return std::any_of(history.begin(), history.end(), [&](const TrialRecord& t) { return t.params == s; });
    }

    double predict(const std::vector<double>& u, const std::vector<std::vector<double>>& seen,
                   const std::vector<TrialRecord>& history) const {
        std::vector<std::pair<double, std::size_t>> dist(seen.size());
        for (std::size_t i = 0; i < seen.size(); ++i) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < u.size(); ++j) d2 += (u[j] - seen[i][j]) * (u[j] - seen[i][j]);
            dist[i] = {d2, i};
        }
        const std::size_t k = std::min(opts_.neighbors, dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double w = 1.0 / (dist[i].first + 1e-12);
            num += w * history[dist[i].second].objective;
            den += w;
        }
        return num / den;
    }

    Options opts_{};
};

struct TuneOptions {
    std::size_t n_initial = 10;
    std::size_t n_total = 50;
    std::uint64_t seed = 0;
    /// Evaluated first and counted against n_initial.
    std::vector<Sample> seeded;
    /// Worker count for the initial batch; 0 means hardware concurrency.
    std::size_t jobs = 1;
};

struct TuneResult {
    TrialRecord best;
    std::vector<TrialRecord> history;
    /// Set when no trial converged; `best` is then the lowest-penalty trial.
    bool all_failed = false;
};

/// Space-filling initial batch (seeded samples first, Latin hypercube for the
/// rest), then n_total - n_initial sequential proposals.
inline TuneResult tune(const ParamSpace& space, const Objective& objective, const TuneOptions& options,
                       Proposer& proposer) {
    expects(space.size() >= 1, "tune: empty parameter space");
    expects(options.n_initial >= 1, "tune: n_initial must be positive");
    expects(options.n_initial <= options.n_total, "tune: n_initial must not exceed n_total");
    expects(options.seeded.size() <= options.n_initial, "tune: more seeded samples than n_initial");
    for (const auto& s : options.seeded) expects(space.contains(s), "tune: seeded sample outside the space");

    std::mt19937_64 rng(options.seed);
    std::vector<Sample> initial = options.seeded;
    std::vector<Sample> lhs = space.latin_hypercube(options.n_initial - options.seeded.size(), rng);
    initial.insert(initial.end(), lhs.begin(), lhs.end());

    TuneResult result;
    result.history = evaluate_batch(initial, objective, 0, options.jobs);
    for (std::size_t i = 0; i < result.history.size(); ++i) {
        result.history[i].phase = i < options.seeded.size() ? "seeded" : "initial";
    }

    const std::size_t refine = options.n_total - options.n_initial;
    for (std::size_t t = 0; t < refine; ++t) {
        const double progress = refine > 1 ? static_cast<double>(t) / static_cast<double>(refine - 1) : 0.0;
        Sample s = proposer.propose(space, result.history, progress, rng);
        expects(space.contains(s), "tune: proposer returned a sample outside the space");
        const std::size_t index = result.history.size();
        TrialRecord rec = objective(s, index);
        rec.index = index;
        rec.params = std::move(s);
        rec.phase = "refine";
        result.history.push_back(std::move(rec));
    }

    result.best = best_of(result.history);
    result.all_failed = std::none_of(result.history.begin(), result.history.end(),
                                     [](const TrialRecord& t) { return t.converged(); });
    return result;
}

inline TuneResult tune(const ParamSpace& space, const Objective& objective, const TuneOptions& options) {
    GaussianNeighborProposer proposer;
    return tune(space, objective, options, proposer);
}

/// beta in [0.01, 1], m in {0..10}, d in {0..20}, omega_beta in [0, 0.89],
/// omega_m in [1e-2, 1e4] (log). `names` selects and orders the dimensions.
inline ParamSpace default_space(const std::vector<std::string>& names) {
    ParamSpace space;
    for (const auto& n : names) {
        if (n == "beta") space.add(n, dim_kind::continuous, 0.01, 1.0);
        else if (n == "m") space.add(n, dim_kind::integer, 0, 10);
        else if (n == "d") space.add(n, dim_kind::integer, 0, 20);
        else if (n == "omega_beta") space.add(n, dim_kind::continuous, 0.0, 0.89);
        else if (n == "omega_m") space.add(n, dim_kind::continuous_log, 1e-2, 1e4);
        else throw contract_error("default_space: unknown parameter '" + n + "'");
    }
    return space;
}

}  // namespace lodestro::tune
