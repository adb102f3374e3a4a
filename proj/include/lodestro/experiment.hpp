#pragma once

// The standard transport test problem wired to the accelerator: one large
// backward-Euler step of the stiff-flux problem, iterated to tolerance.

#include <lodestro/accel.hpp>
#include <lodestro/flux.hpp>
#include <lodestro/transport.hpp>

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lodestro {

struct ProblemConfig {
    double r = 2.0;
    std::size_t n_points = 500;
    double h_step = 1e4;
    double dmin = 1e-5;
    double dmax = 1e13;
    double p_right = 0.01;
    double source_edge = 0.1;
    /// "scaled_steady": p_right + scale (p_ss - p_right), with p_ss the
    /// analytic noiseless steady state. "parabolic": p_right + height (1 - x^2).
    std::string initial_profile = "scaled_steady";
    double initial_scale = 2.0;
    double initial_height = 0.3;
    std::optional<flux::NoiseModel> noise;

    void validate() const {
        expects(r >= 0.0, "ProblemConfig: r must be nonnegative");
        expects(n_points >= 3, "ProblemConfig: n_points must be at least 3");
        expects(h_step > 0.0, "ProblemConfig: h_step must be positive");
        expects(dmin < dmax, "ProblemConfig: dmin must be below dmax");
        expects(p_right > 0.0, "ProblemConfig: p_right must be positive");
        expects(initial_profile == "parabolic" || initial_profile == "scaled_steady",
                "ProblemConfig: unknown initial profile");
        expects(initial_height >= 0.0, "ProblemConfig: initial_height must be nonnegative");
        expects(initial_scale > 0.0, "ProblemConfig: initial_scale must be positive");
        if (noise) {
            expects(noise->amplitude >= 0.0, "ProblemConfig: noise amplitude must be nonnegative");
            expects(noise->correlation_length > 0.0,
                    "ProblemConfig: noise correlation length must be positive");
        }
    }
};

inline std::vector<double> initial_profile(const ProblemConfig& config, const transport::Grid& grid) {
    if (config.initial_profile == "parabolic") {
        return transport::parabolic_profile(grid, config.p_right, config.initial_height);
    }
    std::vector<double> p =
        flux::steady_state_oracle(config.r, grid, config.p_right, config.source_edge);
    for (double& v : p) v = config.p_right + config.initial_scale * (v - config.p_right);
    return p;
}

/// Owns the grid, step parameters and flux model of one transport problem;
/// operator() is the fixed-point map G. Noise draws advance with every call,
/// so a fresh instance is needed for each reproducible solve.
class TransportProblem {
public:
    explicit TransportProblem(const ProblemConfig& config)
        : config_((config.validate(), config)), grid_(config.n_points),
          flux_(grid_, flux::ShestakovModel{config.r, config.noise}) {
        initial_ = initial_profile(config, grid_);
        params_.h_step = config.h_step;
        params_.p_prev = initial_;
        params_.source = flux::source_cell_average(grid_, config.source_edge);
        params_.p_right = config.p_right;
        bounds_ = {config.dmin, config.dmax};
    }

    std::vector<double> operator()(std::span<const double> p) {
        return transport::lodestro_g(grid_, p, flux_, params_, bounds_);
    }

    /// |M(p) p - b| / |b| with the noiseless flux, so monitoring does not
    /// consume noise draws.
    [[nodiscard]] double linear_residual(std::span<const double> p) const {
        const auto q = flux::shestakov_flux(grid_, p, config_.r);
        const auto split = transport::split_flux(grid_, p, q, bounds_);
        return transport::linear_residual(grid_, p, split, params_);
    }

    [[nodiscard]] const transport::Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] const std::vector<double>& initial() const noexcept { return initial_; }
    [[nodiscard]] const transport::StepParams& params() const noexcept { return params_; }
    [[nodiscard]] const ProblemConfig& config() const noexcept { return config_; }

private:
    ProblemConfig config_;
    transport::Grid grid_;
    flux::ShestakovFlux flux_;
    transport::StepParams params_;
    transport::SplitBounds bounds_;
    std::vector<double> initial_;
};

/// Solves the configured problem from its initial profile.
inline accel::SolveReport solve_problem(const ProblemConfig& problem, const accel::AccelConfig& config,
                                        bool record_linear_residual = false) {
    TransportProblem tp(problem);
    accel::SolveOptions options;
    if (record_linear_residual) {
        options.monitor = [&tp](std::span<const double> p) {
            try {
                return tp.linear_residual(p);
            } catch (const evaluation_error&) {
                return std::numeric_limits<double>::quiet_NaN();
            }
        };
    }
    return accel::solve(tp, tp.initial(), config, options);
}

/// The customary starting relaxation for stiffness exponent r.
inline double default_beta(double r) { return r > 0.0 ? std::min(1.0, 0.6 / r) : 1.0; }

}  // namespace lodestro
