// Acceptance runner: one [PASS]/[FAIL] line per criterion, nonzero exit on
// any failure. Desk scale: N = 500 unless stated.

#include <lodestro/accel.hpp>
#include <lodestro/denselin.hpp>
#include <lodestro/experiment.hpp>
#include <lodestro/flux.hpp>
#include <lodestro/transport.hpp>
#include <lodestro/tune.hpp>

#include "gmres_oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace lodestro;
using accel::AccelConfig;
using tune::Sample;
using tune::TrialRecord;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

ProblemConfig stiff(double r = 2.0) {
    ProblemConfig pc;
    pc.r = r;
    return pc;
}

AccelConfig base_accel(double r = 2.0) {
    AccelConfig a;
    a.beta = default_beta(r);
    return a;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double min_objective(const std::vector<TrialRecord>& recs, const std::function<bool(const Sample&)>& keep) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : recs) {
        if (r.converged() && keep(r.params)) best = std::min(best, r.objective);
    }
    return best;
}

// 1 ----------------------------------------------------------------------
Outcome depth_zero_equivalence() {
    const ProblemConfig pc = stiff();
    AccelConfig cfg = base_accel();
    cfg.k_max = 49;
    cfg.tol = 1e-300;
    TransportProblem a(pc);
    const auto report = accel::solve(a, a.initial(), cfg);

    TransportProblem b(pc);
    std::vector<double> p = b.initial();
    bool same = report.trace.size() == 50;
    for (std::size_t k = 0; k < 50 && same; ++k) {
        const auto g = b(p);
        std::vector<double> next(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) next[i] = cfg.beta * g[i] + (1.0 - cfg.beta) * p[i];
        p = std::move(next);
    }
    same = same && p == report.final_iterate;
    return {same, "50 iterations, final iterates " + std::string(same ? "bitwise equal" : "differ")};
}

// 2 ----------------------------------------------------------------------
Outcome qr_incremental_vs_fresh() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> op(0, 2);
    std::normal_distribution<double> gauss;
    const std::size_t n = 12, m = 6;
    double worst = 0.0;
    std::size_t compared = 0;
    for (int seq = 0; seq < 1000; ++seq) {
        denselin::QrFactor qr(n, m);
        std::vector<std::vector<double>> cols;
        const int steps = 5 + static_cast<int>(rng() % 20);
        for (int s = 0; s < steps; ++s) {
            const int o = op(rng);
            if ((o < 2 || cols.empty()) && cols.size() < m) {
                std::vector<double> c(n);
                for (double& v : c) v = gauss(rng);
                qr.append(c);
                cols.push_back(c);
            } else if (!cols.empty()) {
                qr.pop_front();
                cols.erase(cols.begin());
            }
            if (cols.empty()) continue;
            std::vector<double> f(n);
            for (double& v : f) v = gauss(rng);
            const auto inc = qr.solve_least_squares(f);
            denselin::QrFactor fresh(n, m);
            for (const auto& c : cols) fresh.append(c);
            const auto ref = fresh.solve_least_squares(f);
            double num = 0, den = 0;
            for (std::size_t i = 0; i < ref.size(); ++i) {
                num += (inc[i] - ref[i]) * (inc[i] - ref[i]);
                den += ref[i] * ref[i];
            }
            worst = std::max(worst, std::sqrt(num / std::max(den, 1e-300)));
            ++compared;
        }
    }
    return {worst <= 1e-10, std::to_string(compared) + " solves, worst relative difference " + fmt("%.2e", worst)};
}

// 3 ----------------------------------------------------------------------
Outcome gmres_correspondence() {
    struct LinearMap {
        std::vector<std::vector<double>> a;
        std::vector<double> b;
        std::vector<double> operator()(std::span<const double> p) const {
            std::vector<double> out(b);
            for (std::size_t i = 0; i < b.size(); ++i) {
                for (std::size_t j = 0; j < b.size(); ++j) out[i] += a[i][j] * p[j];
            }
            return out;
        }
    };
    std::mt19937_64 rng(7);
    const std::size_t n = 10;
    double worst = 0.0;
    std::size_t compared = 0;
    for (int t = 0; t < 20; ++t) {
        LinearMap map{test_support::random_contraction(rng, n, 0.9), test_support::random_vector(rng, n)};
        const std::vector<double> p0(n, 0.0);
        AccelConfig cfg;
        cfg.beta = 1.0;
        cfg.m_max = n;
        cfg.k_max = n;
        cfg.tol = 1e-300;
        const auto report = accel::solve(map, p0, cfg);
        const auto gm = test_support::gmres_residuals(map.a, map.b, p0, n);
        for (const auto& e : report.trace) {
            if (e.k == 0 || e.k >= gm.size() || gm[e.k] <= 1e-10 || !std::isfinite(e.lsq_residual)) continue;
            worst = std::max(worst, std::abs(e.lsq_residual / gm[e.k] - 1.0));
            ++compared;
        }
    }
    return {worst <= 1e-8 && compared >= 100,
            std::to_string(compared) + " residual pairs, worst relative mismatch " + fmt("%.2e", worst)};
}

// 4 ----------------------------------------------------------------------
Outcome flux_split_reconstruction() {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.01, 2.0);
    double worst = 0.0;
    bool theta_ok = true;
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 20 + rng() % 200;
        transport::Grid grid(n);
        std::vector<double> p(n), q(n);
        for (auto& v : p) v = u(rng);
        for (auto& v : q) v = (u(rng) - 1.0) * std::pow(10.0, static_cast<double>(t % 7) - 3.0);
        const auto split = transport::split_flux(grid, p, q, {1e-5, 1e13});
        const auto dp = transport::grad(grid, p);
        for (std::size_t i = 0; i < n; ++i) {
            theta_ok = theta_ok && split.theta[i] >= 0.0 && split.theta[i] <= 1.0;
            if (std::abs(dp[i]) < transport::min_gradient) continue;
            const double rec = -split.d_coef[i] * dp[i] + split.c_coef[i] * p[i];
            worst = std::max(worst, std::abs(rec - q[i]) / std::max(std::abs(q[i]), 1e-300));
        }
    }
    return {worst <= 1e-12 && theta_ok,
            "worst relative error " + fmt("%.2e", worst) + ", theta in [0,1]: " + (theta_ok ? "yes" : "no")};
}

// 5 ----------------------------------------------------------------------
Outcome steady_state_oracle() {
    struct Err {
        double full;
        double interior;
    };
    auto errors = [](std::size_t n) {
        ProblemConfig pc = stiff();
        pc.n_points = n;
        pc.h_step = 1e12;
        AccelConfig cfg;
        cfg.beta = 0.3;
        cfg.m_max = 3;
        cfg.delay = 1;
        const auto r = solve_problem(pc, cfg);
        if (!r.converged()) return Err{INFINITY, INFINITY};
        transport::Grid grid(n);
        const auto oracle = flux::steady_state_oracle(pc.r, grid, pc.p_right, pc.source_edge);
        Err e{0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            const double rel = std::abs(r.final_iterate[i] - oracle[i]) / std::abs(oracle[i]);
            e.full = std::max(e.full, rel);
            if (grid.x(i) >= 0.2) e.interior = std::max(e.interior, rel);
        }
        return e;
    };
    // 999 points halve the spacing of 500 exactly.
    const Err coarse = errors(500), fine = errors(999);
    const double ratio = coarse.full / fine.full;
    std::ostringstream s;
    s << "max rel error N=500 " << fmt("%.3e", coarse.full) << ", N=999 " << fmt("%.3e", fine.full)
      << ", ratio " << fmt("%.2f", ratio) << " (x >= 0.2 only: ratio " << fmt("%.2f", coarse.interior / fine.interior)
      << ")";
    return {coarse.full < 1e-2 && ratio >= 3.0 && ratio <= 5.0, s.str()};
}

// 6 ----------------------------------------------------------------------
Outcome adaptive_formulas() {
    bool ok = accel::adapt_damping(0.0, 0.5, 0.01) == 0.9 && accel::adapt_damping(1.0, 0.5, 0.01) == 0.4 &&
              std::abs(accel::adapt_damping(1.0, 0.89, 0.01) - 0.01) <= 1e-15 && accel::adapt_depth(1.0, 0, 1.0, 10) == 0 &&
              accel::adapt_depth(1e-4, 1, 1.0, 10) == 2 && accel::adapt_depth(1e-4, 5, 10.0, 10) == 3 &&
              accel::adapt_depth(1e-30, 50, 1.0, 10) == 10 && accel::adapt_depth(1e3, 4, 1.0, 10) == 0;
    const bool tables = ok;
    std::size_t rows = 0;
    for (double omega_m : {1e-2, 1.0, 1e2}) {
        for (double beta_min : {0.01, 0.1}) {
            AccelConfig cfg = base_accel();
            cfg.m_max = 8;
            cfg.damping = accel::damping_mode::adaptive;
            cfg.depth = accel::depth_mode::adaptive;
            cfg.omega_m = omega_m;
            cfg.beta_min = beta_min;
            cfg.k_max = 300;
            const auto r = solve_problem(stiff(), cfg);
            std::size_t m_prev = 0;
            for (const auto& e : r.trace) {
                const bool aa = std::isfinite(e.gain);
                if (aa) ok = ok && e.beta >= beta_min && e.beta <= 0.9;
                ok = ok && e.depth <= m_prev + 1;
                m_prev = e.depth;
                ++rows;
            }
        }
    }
    return {ok, std::string("tables ") + (tables ? "match" : "mismatch") + ", " + std::to_string(rows) +
                    " trace rows checked for beta and depth bounds"};
}

// 7 and 8 share the r = 2 sweep ------------------------------------------
struct StiffSweep {
    std::vector<double> betas = tune::arange(0.05, 1.0, 0.05);
    std::vector<Sample> cells;
    std::vector<TrialRecord> records;
    StiffSweep() {
        const auto space = tune::default_space({"beta", "m", "d"});
        cells = tune::cartesian({betas, tune::arange(0, 10, 1), {0, 1}});
        records = tune::run_sweep(cells, tune::make_objective(space, {stiff(), base_accel(), false}), 0);
    }
    std::set<long> convergent(double m, double d) const {
        std::set<long> out;
        for (const auto& r : records) {
            if (r.params[1] == m && r.params[2] == d && r.converged()) out.insert(std::lround(r.params[0] * 100));
        }
        return out;
    }
};

Outcome stiff_case(const StiffSweep& sw) {
    std::ostringstream s;
    const auto plain = sw.convergent(0, 0);
    const bool band = !plain.empty() && !plain.count(100) && *plain.rbegin() < 100;
    bool bounded = band;
    for (long b = plain.empty() ? 0 : *plain.begin(); !plain.empty() && b <= *plain.rbegin(); b += 5) {
        bounded = bounded && plain.count(b);
    }
    s << "(a) m=0 band beta [" << (plain.empty() ? 0 : *plain.begin()) / 100.0 << ", "
      << (plain.empty() ? 0 : *plain.rbegin()) / 100.0 << "] " << (bounded ? "ok" : "not a bounded band");

    const auto plain1 = sw.convergent(0, 1);
    bool contains = true;
    std::size_t smallest_extra = 1000;
    for (double m = 2; m <= 10; ++m) {
        const auto aa = sw.convergent(m, 1);
        const bool sup = std::includes(aa.begin(), aa.end(), plain1.begin(), plain1.end());
        contains = contains && sup && aa.size() > plain1.size();
        smallest_extra = std::min(smallest_extra, aa.size() - std::min(aa.size(), plain1.size()));
    }
    s << "; (b) d=1 m>=2 strict superset of m=0: " << (contains ? "yes" : "no") << " (min extra " << smallest_extra
      << ")";

    const double best_plain = min_objective(sw.records, [](const Sample& p) { return p[1] == 0; });
    const double best_aa = min_objective(sw.records, [](const Sample& p) { return p[1] >= 1 && p[2] == 1; });
    const double gain = 1.0 - best_aa / best_plain;
    s << "; (c) best m=0 " << best_plain << ", best AA d=1 " << best_aa << ", reduction " << fmt("%.1f", 100 * gain)
      << "%";
    return {bounded && contains && gain >= 0.10, s.str()};
}

Outcome optimized_damping(const StiffSweep& sw) {
    const double best = min_objective(sw.records, [](const Sample& p) { return p[1] == 0 && p[2] == 0; });
    const auto r = solve_problem(stiff(), base_accel());
    const double def = r.converged() ? static_cast<double>(r.iterations) : INFINITY;
    const double gain = 1.0 - best / def;
    return {gain >= 0.10, "default beta 0.3: " + fmt("%.0f", def) + ", best m=0: " + fmt("%.0f", best) +
                              ", reduction " + fmt("%.1f", 100 * gain) + "%"};
}

// 9 ----------------------------------------------------------------------
Outcome very_stiff_case() {
    const ProblemConfig pc = stiff(10.0);
    AccelConfig base = base_accel(10.0);
    base.k_max = 1000;
    const auto def = solve_problem(pc, base);

    const auto s1 = tune::default_space({"beta"});
    const auto plain = tune::run_sweep(tune::cartesian({tune::arange(0.01, 1.0, 0.01)}),
                                       tune::make_objective(s1, {pc, base, false}), 0);
    const double best_plain = min_objective(plain, [](const Sample&) { return true; });

    const auto s3 = tune::default_space({"beta", "m", "d"});
    const auto aa_sweep = tune::run_sweep(
        tune::cartesian({tune::arange(0.05, 0.5, 0.05), {1, 2, 3, 5}, {0, 5, 10, 15, 20}}),
        tune::make_objective(s3, {pc, base, false}), 0);
    double best_aa = min_objective(aa_sweep, [](const Sample& p) { return p[1] >= 1; });

    tune::TuneOptions to;
    to.seed = 9;
    to.seeded = {{base.beta, 0, 0}};
    const auto tuned = tune::tune(s3, tune::make_objective(s3, {pc, base, false}), to);
    if (tuned.best.converged() && tuned.best.params[1] >= 1) best_aa = std::min(best_aa, tuned.best.objective);

    const double gain = 1.0 - best_aa / best_plain;
    std::ostringstream s;
    s << "default beta 0.06: " << accel::to_string(def.status) << " (" << def.iterations << "), tuned m=0: "
      << best_plain << ", best AA: " << best_aa << ", reduction " << fmt("%.1f", 100 * gain) << "%";
    return {def.converged() && gain >= 0.15, s.str()};
}

// 10 ---------------------------------------------------------------------
Outcome adaptive_depth_delay() {
    // Judged at the default omega_m = 1; other weights are diagnostics.
    std::ostringstream s;
    bool ok = false;
    for (double omega_m : {1.0, 1e-2, 1e2}) {
        AccelConfig cfg = base_accel();
        cfg.m_max = 8;
        cfg.depth = accel::depth_mode::adaptive;
        cfg.omega_m = omega_m;
        const auto r = solve_problem(stiff(), cfg);
        std::size_t first = r.trace.size();
        for (const auto& e : r.trace) {
            if (e.depth > 0) {
                first = e.k;
                break;
            }
        }
        if (omega_m == 1.0) ok = first >= 2 && first < r.trace.size() && r.converged();
        s << "omega_m " << omega_m << ": first m>0 at k=" << first << " (" << accel::to_string(r.status) << ")"
          << (omega_m == 1.0 ? "; diagnostics: " : "; ");
    }
    return {ok, s.str()};
}

// 11 ---------------------------------------------------------------------
ProblemConfig noisy(std::uint64_t seed) {
    ProblemConfig pc = stiff();
    pc.noise = flux::NoiseModel{1e-3, 0.1, seed};
    return pc;
}

AccelConfig noisy_accel(double beta, std::size_t m) {
    AccelConfig a;
    a.beta = beta;
    a.m_max = m;
    a.delay = 2;
    a.tol = 1e-4;
    a.k_max = 300;
    return a;
}

std::optional<std::size_t> noisy_iterations(std::uint64_t seed, double beta, std::size_t m) {
    const auto r = solve_problem(noisy(seed), noisy_accel(beta, m));
    if (!r.converged()) return std::nullopt;
    return r.iterations;
}

Outcome noise_case() {
    std::ostringstream s;
    const std::vector<double> betas = tune::arange(0.05, 1.0, 0.05);
    const std::vector<std::size_t> depths{1, 2, 3, 5};

    // (a) floor: run past the tolerance for 300 iterations.
    bool floor_ok = true;
    s << "(a) min residual k<=100 / k<=300:";
    for (std::size_t m : {std::size_t{0}, std::size_t{2}}) {
        AccelConfig a = noisy_accel(0.3, m);
        a.tol = 1e-300;
        const auto r = solve_problem(noisy(1), a);
        double m100 = INFINITY, m300 = INFINITY;
        for (const auto& e : r.trace) {
            if (e.k <= 100) m100 = std::min(m100, e.residual);
            if (e.k <= 300) m300 = std::min(m300, e.residual);
        }
        const bool ok = r.trace.size() >= 300 && m300 > 0.0 && m100 / m300 <= 10.0;
        floor_ok = floor_ok && ok;
        s << " m=" << m << " " << fmt("%.2e", m100) << "/" << fmt("%.2e", m300);
    }

    // (b) at each seed's best m = 0 beta, counts summed over seeds 1..5.
    std::size_t plain_sum = 0;
    std::map<std::size_t, std::size_t> aa_sum;
    bool all_converged = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        double best_beta = betas.front();
        std::size_t best = std::numeric_limits<std::size_t>::max();
        for (double b : betas) {
            const auto it = noisy_iterations(seed, b, 0);
            if (it && *it < best) best = *it, best_beta = b;
        }
        plain_sum += best;
        for (std::size_t m : depths) {
            const auto it = noisy_iterations(seed, best_beta, m);
            all_converged = all_converged && it.has_value();
            aa_sum[m] += it.value_or(300);
        }
    }
    bool parity = all_converged;
    s << "; (b) no-AA " << plain_sum;
    for (const auto& [m, sum] : aa_sum) {
        const double rel = static_cast<double>(sum) / static_cast<double>(plain_sum);
        parity = parity && rel >= 0.75 && rel <= 1.25;
        s << ", m=" << m << " " << sum;
    }

    // (c) seed 1: non-optimal beta where AA rescues or beats damping by 20%.
    std::map<double, std::optional<std::size_t>> plain;
    double best_beta = 0;
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (double b : betas) {
        plain[b] = noisy_iterations(1, b, 0);
        if (plain[b] && *plain[b] < best) best = *plain[b], best_beta = b;
    }
    bool rescue_ok = true;
    s << "; (c) improved non-optimal betas:";
    for (std::size_t m : depths) {
        std::size_t count = 0;
        for (double b : betas) {
            if (b == best_beta) continue;
            const auto aa = noisy_iterations(1, b, m);
            if (!aa) continue;
            if (!plain[b] || static_cast<double>(*aa) <= 0.8 * static_cast<double>(*plain[b])) ++count;
        }
        rescue_ok = rescue_ok && count >= 3;
        s << " m=" << m << " " << count;
    }
    return {floor_ok && parity && rescue_ok, s.str()};
}

// 12 ---------------------------------------------------------------------
Outcome tuner_sanity() {
    const auto space = tune::default_space({"beta", "m", "d"});
    const tune::Experiment ex{stiff(), base_accel(), false};
    const auto objective = tune::make_objective(space, ex);
    const auto cells = tune::cartesian({tune::arange(0.05, 1.0, 0.05), tune::arange(0, 10, 1), tune::arange(0, 20, 1)});
    const auto sweep = tune::run_sweep(cells, objective, 0);
    const double optimum = min_objective(sweep, [](const Sample&) { return true; });

    const double def = objective({ex.accel.beta, 0, 0}, 0).objective;
    bool never_worse = true;
    double worst_gap = 0.0;
    std::ostringstream s;
    s << cells.size() << "-cell optimum " << optimum << ", default " << def << ", tuned:";
    for (std::uint64_t seed : {0, 1, 2, 3, 4}) {
        tune::TuneOptions to;
        to.seed = seed;
        to.seeded = {{ex.accel.beta, 0, 0}};
        const auto r = tune::tune(space, objective, to);
        never_worse = never_worse && r.best.objective <= def;
        worst_gap = std::max(worst_gap, r.best.objective / optimum - 1.0);
        s << " " << r.best.objective;
    }
    s << " (worst gap " << fmt("%.1f", 100 * worst_gap) << "%)";
    return {never_worse && worst_gap <= 0.15, s.str()};
}

}  // namespace

int main() {
    using clock = std::chrono::steady_clock;
    int failures = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
        const auto t0 = clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(clock::now() - t0).count();
        std::printf("[%s] %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    };
    report(1, "depth-zero equivalence", depth_zero_equivalence);
    report(2, "incremental QR vs fresh", qr_incremental_vs_fresh);
    report(3, "GMRES correspondence", gmres_correspondence);
    report(4, "flux-split reconstruction", flux_split_reconstruction);
    report(5, "steady-state oracle", steady_state_oracle);
    report(6, "adaptive formulas", adaptive_formulas);
    std::optional<StiffSweep> sweep;
    const auto t0 = clock::now();
    sweep.emplace();
    std::printf("       (r=2 beta x m x d sweep: %zu cells, %.1fs)\n", sweep->cells.size(),
                std::chrono::duration<double>(clock::now() - t0).count());
    report(7, "stiff case", [&] { return stiff_case(*sweep); });
    report(8, "optimized damping", [&] { return optimized_damping(*sweep); });
    report(9, "very stiff case", very_stiff_case);
    report(10, "adaptive depth delay", adaptive_depth_delay);
    report(11, "noise case", noise_case);
    report(12, "tuner sanity", tuner_sanity);
    std::printf("%d of 12 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
