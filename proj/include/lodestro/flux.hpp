#pragma once

// Analytic stiff flux q = -D p' + noise with D = (p'/p)^r, the localized
// heating source, a spatially correlated Gaussian noise field, and the exact
// steady state of the noiseless problem used for verification.

#include <lodestro/errors.hpp>
#include <lodestro/transport.hpp>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace lodestro::flux {

using transport::Grid;

/// Spatially correlated, temporally white Gaussian noise. The amplitude is
/// relative to the spatial mean of |q|; the correlation length is a fraction
/// of the unit domain.
struct NoiseModel {
    double amplitude = 1e-3;
    double correlation_length = 0.1;
    std::uint64_t seed = 0;
};

struct ShestakovModel {
    double r = 2.0;
    std::optional<NoiseModel> noise;
};

/// Noiseless flux q_i = -|p'_i / p_i|^r p'_i. For even integer r this is
/// the signed power; for other r the magnitude keeps D real and >= 0.
inline std::vector<double> shestakov_flux(const Grid& grid, std::span<const double> p, double r) {
    transport::require_physical(p);
    const std::vector<double> g = transport::grad(grid, p);
    std::vector<double> q(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double diffusivity = std::pow(std::abs(g[i] / p[i]), r);
        q[i] = -diffusivity * g[i];
    }
    return q;
}

/// S = 1 on [0, 0.1] (inclusive), 0 elsewhere, sampled at the nodes.
inline std::vector<double> source_profile(const Grid& grid, double edge = 0.1) {
    std::vector<double> s(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) s[i] = grid.x(i) <= edge ? 1.0 : 0.0;
    return s;
}

/// The same source averaged over each node's control volume
/// [x_i - dx/2, x_i + dx/2] clipped to [0, 1]. The discrete integral then
/// equals the exact one, which the conservative assembly relies on.
inline std::vector<double> source_cell_average(const Grid& grid, double edge = 0.1) {
    const std::size_t n = grid.size();
    const double half = 0.5 * grid.dx();
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = std::max(0.0, grid.x(i) - half);
        const double hi = std::min(1.0, grid.x(i) + half);
        const double overlap = std::max(0.0, std::min(hi, edge) - lo);
        s[i] = overlap / (hi - lo);
    }
    return s;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Unit-variance field with autocorrelation exp(-(lag/l)^2 / 2), scaled by
/// amplitude * q_scale. Built by convolving white noise on a padded grid with
/// a Gaussian kernel of width l / sqrt(2), so the statistics are stationary
/// up to the boundaries. Deterministic in (seed, draw_index).
inline std::vector<double> sample_noise(const NoiseModel& model, const Grid& grid, double q_scale,
                                        std::uint64_t draw_index) {
    expects(model.amplitude >= 0.0, "sample_noise: negative amplitude");
    expects(model.correlation_length > 0.0, "sample_noise: correlation length must be positive");
    expects(q_scale >= 0.0, "sample_noise: negative flux scale");
    const std::size_t n = grid.size();
    std::vector<double> out(n, 0.0);
    if (model.amplitude == 0.0 || q_scale == 0.0) return out;

    const double sigma = model.correlation_length / std::sqrt(2.0);
    const auto pad = static_cast<std::size_t>(std::ceil(5.0 * sigma / grid.dx()));
    std::vector<double> kernel(2 * pad + 1);
    double kernel_sq = 0.0;
    for (std::size_t k = 0; k < kernel.size(); ++k) {
        const double lag = (static_cast<double>(k) - static_cast<double>(pad)) * grid.dx();
        kernel[k] = std::exp(-0.5 * lag * lag / (sigma * sigma));
        kernel_sq += kernel[k] * kernel[k];
    }
    const double scale = model.amplitude * q_scale / std::sqrt(kernel_sq);

    std::mt19937_64 rng(detail::splitmix64(model.seed ^ detail::splitmix64(draw_index)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> white(n + 2 * pad);
    for (double& w : white) w = normal(rng);

    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < kernel.size(); ++k) s += kernel[k] * white[i + k];
        out[i] = scale * s;
    }
    return out;
}

/// Flux functor handed to transport::lodestro_g. Each call is one coupling
/// exchange and consumes a fresh noise draw.
class ShestakovFlux {
public:
    ShestakovFlux(Grid grid, ShestakovModel model) : grid_(std::move(grid)), model_(model) {
        expects(model_.r >= 0.0, "ShestakovFlux: exponent must be nonnegative");
    }

    std::vector<double> operator()(std::span<const double> p) {
        std::vector<double> q = shestakov_flux(grid_, p, model_.r);
        if (model_.noise) {
            double mean_abs = 0.0;
            for (double v : q) mean_abs += std::abs(v);
            mean_abs /= static_cast<double>(q.size());
            const auto eps = sample_noise(*model_.noise, grid_, mean_abs, draws_++);
            for (std::size_t i = 0; i < q.size(); ++i) q[i] += eps[i];
        }
        return q;
    }

    [[nodiscard]] std::uint64_t draws() const noexcept { return draws_; }
    [[nodiscard]] const ShestakovModel& model() const noexcept { return model_; }

private:
    Grid grid_;
    ShestakovModel model_;
    std::uint64_t draws_ = 0;
};

/// Exact steady state of the noiseless problem. With u = p^{1/(r+1)} the
/// steady flux balance gives u' = -q(x)^{1/(r+1)} / (r+1), where q is the
/// integrated source: q = x inside the source region and q = edge beyond.
/// The outer region is affine in u; the source region is integrated with
/// tanh-sinh quadrature, which handles the x^{1/(r+1)} endpoint behaviour.
inline std::vector<double> steady_state_oracle(double r, const Grid& grid, double p_right = 0.01,
                                               double edge = 0.1) {
    expects(r >= 0.0, "steady_state_oracle: exponent must be nonnegative");
    const double inv = 1.0 / (r + 1.0);
    const double u_right = std::pow(p_right, inv);
    const double slope = std::pow(edge, inv) * inv;
    const double u_edge = u_right + slope * (1.0 - edge);

    boost::math::quadrature::tanh_sinh<double> integrator;
    std::vector<double> p(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid.x(i);
        double u = 0.0;
        if (x >= edge) {
            u = u_right + slope * (1.0 - x);
        } else {
            const double tail =
                integrator.integrate([inv](double s) { return std::pow(s, inv); }, x, edge);
            u = u_edge + inv * tail;
        }
        p[i] = std::pow(u, r + 1.0);
    }
    return p;
}

}  // namespace lodestro::flux
