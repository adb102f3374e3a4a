#pragma once

// Anderson acceleration of a damped fixed-point iteration p <- G(p), with an
// initial delay of plain damped steps and optional adaptive damping (driven
// by the convergence gain of the least-squares step) and adaptive depth
// (driven by the residual magnitude).

#include <lodestro/denselin.hpp>
#include <lodestro/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lodestro::accel {

enum class damping_mode { fixed, adaptive };
enum class depth_mode { fixed, adaptive };

enum class solve_status { converged, max_iterations, failed_unphysical, failed_linear_solve };

inline std::string_view to_string(solve_status s) {
    switch (s) {
        case solve_status::converged: return "converged";
        case solve_status::max_iterations: return "max_iterations";
        case solve_status::failed_unphysical: return "failed_unphysical";
        case solve_status::failed_linear_solve: return "failed_linear_solve";
    }
    return "unknown";
}

inline std::string_view to_string(damping_mode m) {
    return m == damping_mode::fixed ? "fixed" : "adaptive";
}
inline std::string_view to_string(depth_mode m) {
    return m == depth_mode::fixed ? "fixed" : "adaptive";
}

struct AccelConfig {
    std::size_t m_max = 0;
    double beta = 1.0;
    std::size_t delay = 0;
    std::size_t k_max = 1000;
    double tol = 1e-11;
    damping_mode damping = damping_mode::fixed;
    depth_mode depth = depth_mode::fixed;
    double omega_beta = 0.5;
    double omega_m = 1.0;
    double beta_min = 0.01;

    void validate() const {
        expects(beta > 0.0 && beta <= 1.0, "AccelConfig: beta must lie in (0, 1]");
        expects(k_max >= 1, "AccelConfig: k_max must be at least 1");
        expects(tol > 0.0, "AccelConfig: tol must be positive");
        expects(omega_beta >= 0.0 && omega_beta < 0.9, "AccelConfig: omega_beta must lie in [0, 0.9)");
        expects(omega_m > 0.0, "AccelConfig: omega_m must be positive");
        expects(beta_min > 0.0 && beta_min <= 0.9, "AccelConfig: beta_min must lie in (0, 0.9]");
    }
};

/// One row per iteration k. `residual` is |p_{k+1} - p_k| / max(|p_{k+1}|, 1), the
/// quantity tested against tol. `lsq_residual` is |f_k - F_k gamma_k|, the
/// minimized linearized residual (NaN on plain damped steps), and
/// `linear_residual` is filled by an optional monitor.
struct TraceEntry {
    std::size_t k = 0;
    double residual = 0.0;
    double beta = 0.0;
    std::size_t depth = 0;
    double f_norm = 0.0;
    double gain = std::numeric_limits<double>::quiet_NaN();
    double lsq_residual = std::numeric_limits<double>::quiet_NaN();
    double linear_residual = std::numeric_limits<double>::quiet_NaN();
};

struct SolveReport {
    solve_status status = solve_status::max_iterations;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    std::vector<TraceEntry> trace;
    std::vector<double> final_iterate;
    std::string message;

    [[nodiscard]] bool converged() const noexcept { return status == solve_status::converged; }
};

using Vector = std::vector<double>;

/// beta * g + (1 - beta) * p, elementwise.
inline Vector fixed_point_step(std::span<const double> g_value, std::span<const double> p,
                               double beta) {
    expects(g_value.size() == p.size(), "fixed_point_step: length mismatch");
    Vector out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = beta * g_value[i] + (1.0 - beta) * p[i];
    return out;
}

/// Convergence gain sqrt(1 - (|Q^T f| / |f|)^2), or nullopt when f = 0.
inline std::optional<double> gain(const denselin::QrFactor& factor, std::span<const double> f) {
    expects(factor.cols() >= 1, "gain: factor has no columns");
    const double f_norm = denselin::norm2(f);
    if (f_norm == 0.0) return std::nullopt;
    const double captured = denselin::norm2(factor.project(f)) / f_norm;
    return std::sqrt(std::clamp(1.0 - captured * captured, 0.0, 1.0));
}

inline constexpr double max_adaptive_beta = 0.9;

inline double adapt_damping(double gain_value, double omega_beta, double beta_min) {
    return std::clamp(max_adaptive_beta - omega_beta * gain_value, beta_min, max_adaptive_beta);
}

/// min{ max(0, floor(-log10(omega_m |f|))), m_prev + 1, m_max }.
inline std::size_t adapt_depth(double f_norm, std::size_t m_prev, double omega_m,
                               std::size_t m_max) {
    expects(f_norm > 0.0, "adapt_depth: residual norm must be positive");
    const double level = std::floor(-std::log10(omega_m * f_norm));
    const std::size_t suggested = level > 0.0 ? static_cast<std::size_t>(level) : 0;
    return std::min({suggested, m_prev + 1, m_max});
}

/// Sliding window of (Delta G, Delta f) pairs. The Delta f columns live in the
/// QR factor; the matching Delta G columns are kept alongside.
class History {
public:
    History(std::size_t n, std::size_t m_max) : factor_(n, std::max<std::size_t>(m_max, 1)), m_max_(m_max) {}

    [[nodiscard]] std::size_t size() const noexcept { return dg_.size(); }
    [[nodiscard]] const denselin::QrFactor& factor() const noexcept { return factor_; }
    [[nodiscard]] const std::deque<Vector>& g_differences() const noexcept { return dg_; }

    /// Adds the newest pair, retiring the oldest when full. A difference that
    /// is numerically dependent on the window retires old columns until it
    /// fits; if it is dependent even alone it is dropped.
    void push(Vector dg, std::span<const double> df) {
        if (m_max_ == 0) return;
        if (size() == m_max_) pop_front();
        while (factor_.append(df) == denselin::append_status::rank_deficient) {
            if (empty()) return;
            pop_front();
        }
        dg_.push_back(std::move(dg));
    }

    void pop_front() {
        factor_.pop_front();
        dg_.pop_front();
    }

    void truncate(std::size_t keep) {
        while (size() > keep) pop_front();
    }

    [[nodiscard]] bool empty() const noexcept { return dg_.empty(); }

private:
    denselin::QrFactor factor_;
    std::deque<Vector> dg_;
    std::size_t m_max_;
};

struct AaStepResult {
    Vector next;
    double gain = std::numeric_limits<double>::quiet_NaN();
    double lsq_residual = std::numeric_limits<double>::quiet_NaN();
    double beta = 0.0;
    std::size_t depth = 0;
};

/// Accelerated update
///   p_{k+1} = G(p_k) - dG gamma - (1 - beta_k)(f_k - Q R gamma),
/// where gamma minimizes |f_k - F gamma|. beta_k comes from `choose_beta`,
/// which receives the gain (NaN when f_k = 0). A rank-deficient solve retires
/// the oldest pair and retries; an exhausted window yields a damped step.
template <class ChooseBeta>
AaStepResult aa_step(History& history, std::span<const double> g_value, std::span<const double> p,
                     std::span<const double> f, double fallback_beta, ChooseBeta&& choose_beta) {
    while (!history.empty()) {
        Vector gamma;
        try {
            gamma = history.factor().solve_least_squares(f);
        } catch (const rank_deficient_error&) {
            history.pop_front();
            continue;
        }
        AaStepResult out;
        out.depth = history.size();
        const auto g = gain(history.factor(), f);
        out.gain = g ? *g : 0.0;
        out.lsq_residual = out.gain * denselin::norm2(f);
        out.beta = choose_beta(g ? *g : std::numeric_limits<double>::quiet_NaN());

        const Vector fitted = history.factor().apply(gamma);
        out.next.assign(g_value.begin(), g_value.end());
        const auto& dg = history.g_differences();
        for (std::size_t j = 0; j < gamma.size(); ++j) {
            const Vector& col = dg[j];
            for (std::size_t i = 0; i < out.next.size(); ++i) out.next[i] -= gamma[j] * col[i];
        }
        const double damp = 1.0 - out.beta;
        if (damp != 0.0) {
            for (std::size_t i = 0; i < out.next.size(); ++i) out.next[i] -= damp * (f[i] - fitted[i]);
        }
        return out;
    }
    AaStepResult out;
    out.beta = fallback_beta;
    out.next = fixed_point_step(g_value, p, fallback_beta);
    return out;
}

struct SolveOptions {
    /// Evaluated on each new iterate and stored as TraceEntry::linear_residual.
    std::function<double(std::span<const double>)> monitor;
};

namespace detail {

inline double relative_change(std::span<const double> next, std::span<const double> prev) {
    double diff = 0.0;
    double ref = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
        diff += (next[i] - prev[i]) * (next[i] - prev[i]);
        ref += next[i] * next[i];
    }
    // Absolute below unit norm, so iterates converging to zero can stop.
    return std::sqrt(diff / std::max(ref, 1.0));
}

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace detail

/// Runs iterations k = 0..k_max. Iterations k <= delay are damped
/// fixed-point steps with the configured beta; later iterations accelerate
/// with a window of differences collected from iteration `delay` onward.
/// Stops when |p_{k+1} - p_k| / max(|p_{k+1}|, 1) < tol. A map that throws
/// evaluation_error ends the solve with the matching failed status.
template <class Map>
SolveReport solve(Map&& map_g, std::span<const double> p0, const AccelConfig& config,
                  const SolveOptions& options = {}) {
    config.validate();
    expects(!p0.empty(), "solve: empty initial iterate");
    expects(detail::all_finite(p0), "solve: initial iterate is not finite");

    const std::size_t n = p0.size();
    SolveReport report;
    History history(n, config.m_max);

    Vector p(p0.begin(), p0.end());
    Vector g_prev;
    Vector f_prev;
    std::size_t m_prev = 0;

    auto fail = [&](const evaluation_error& e) {
        report.status = e.kind() == evaluation_failure::unphysical
                            ? solve_status::failed_unphysical
                            : solve_status::failed_linear_solve;
        report.message = e.what();
        report.iterations = report.trace.empty() ? 0 : report.trace.size() - 1;
        report.final_iterate = p;
        return report;
    };

    for (std::size_t k = 0; k <= config.k_max; ++k) {
        Vector g_value;
        try {
            g_value = map_g(std::span<const double>(p));
            ++report.evaluations;
        } catch (const evaluation_error& e) {
            return fail(e);
        }
        expects(g_value.size() == n, "solve: map changed the vector length");
        Vector f(n);
        for (std::size_t i = 0; i < n; ++i) f[i] = g_value[i] - p[i];
        const double f_norm = denselin::norm2(f);

        TraceEntry entry;
        entry.k = k;
        entry.f_norm = f_norm;
        Vector next;

        if (k <= config.delay || config.m_max == 0) {
            entry.beta = config.beta;
            next = fixed_point_step(g_value, p, config.beta);
        } else {
            Vector dg(n);
            Vector df(n);
            for (std::size_t i = 0; i < n; ++i) {
                dg[i] = g_value[i] - g_prev[i];
                df[i] = f[i] - f_prev[i];
            }
            history.push(std::move(dg), df);

            std::size_t depth = history.size();
            if (config.depth == depth_mode::adaptive) {
                depth = f_norm > 0.0 ? adapt_depth(f_norm, m_prev, config.omega_m, config.m_max)
                                     : std::min(m_prev + 1, config.m_max);
                depth = std::min(depth, history.size());
            }
            history.truncate(depth);

            auto choose_beta = [&](double gain_value) {
                if (config.damping == damping_mode::adaptive && std::isfinite(gain_value)) {
                    return adapt_damping(gain_value, config.omega_beta, config.beta_min);
                }
                return config.beta;
            };
            AaStepResult step = aa_step(history, g_value, p, f, config.beta, choose_beta);
            next = std::move(step.next);
            entry.beta = step.beta;
            entry.depth = step.depth;
            entry.gain = step.gain;
            entry.lsq_residual = step.lsq_residual;
        }
        m_prev = entry.depth;

        entry.residual = detail::relative_change(next, p);
        if (options.monitor && detail::all_finite(next)) entry.linear_residual = options.monitor(next);
        report.trace.push_back(entry);

        if (!detail::all_finite(next)) {
            report.status = solve_status::failed_unphysical;
            report.message = "non-finite iterate";
            report.iterations = k;
            report.final_iterate = std::move(p);
            return report;
        }

        g_prev = std::move(g_value);
        f_prev = std::move(f);
        p = std::move(next);

        if (entry.residual < config.tol) {
            report.status = solve_status::converged;
            report.iterations = k;
            report.final_iterate = std::move(p);
            return report;
        }
    }
    report.status = solve_status::max_iterations;
    report.iterations = config.k_max;
    report.final_iterate = std::move(p);
    return report;
}

}  // namespace lodestro::accel
