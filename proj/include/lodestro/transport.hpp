#pragma once

// One backward-Euler step of the 1D transport equation
//     dp/dt + dq/dx = S,   p'(0) = 0,   p(1) = p_right,
// solved by the LoDestro flux-split iteration. The turbulent flux q(p) is
// split nodewise into a diffusive part -D dp/dx and a convective part c p,
// and the resulting linear tridiagonal system M p_new = b is solved directly.
// lodestro_g() is the map G(p) that the accelerator iterates.

#include <lodestro/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lodestro::transport {

/// Uniform node-centered grid on [0, 1] with x_0 = 0 and x_{N-1} = 1.
class Grid {
public:
    explicit Grid(std::size_t n_points) : x_(n_points) {
        expects(n_points >= 3, "Grid: need at least 3 points");
        const double last = static_cast<double>(n_points - 1);
        for (std::size_t i = 0; i < n_points; ++i) x_[i] = static_cast<double>(i) / last;
        dx_ = 1.0 / last;
    }

    [[nodiscard]] std::size_t size() const noexcept { return x_.size(); }
    [[nodiscard]] double dx() const noexcept { return dx_; }
    [[nodiscard]] double x(std::size_t i) const { return x_[i]; }
    [[nodiscard]] std::span<const double> nodes() const noexcept { return x_; }

private:
    std::vector<double> x_;
    double dx_;
};

/// Per-node diffusive/convective decomposition of a flux.
struct FluxSplit {
    std::vector<double> theta;
    std::vector<double> d_coef;
    std::vector<double> c_coef;
    std::vector<double> d_hat;
};

/// M = tridiag(sub, diag, super); sub[i] couples row i+1 to column i,
/// super[i] couples row i to column i+1.
struct TridiagonalSystem {
    std::vector<double> sub;
    std::vector<double> diag;
    std::vector<double> super;
    std::vector<double> rhs;

    [[nodiscard]] std::size_t size() const noexcept { return diag.size(); }

    [[nodiscard]] std::vector<double> multiply(std::span<const double> p) const {
        const std::size_t n = size();
        expects(p.size() == n, "TridiagonalSystem::multiply: length mismatch");
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = diag[i] * p[i];
            if (i > 0) s += sub[i - 1] * p[i - 1];
            if (i + 1 < n) s += super[i] * p[i + 1];
            out[i] = s;
        }
        return out;
    }
};

struct StepParams {
    double h_step = 1e4;
    std::vector<double> p_prev;
    std::vector<double> source;
    double p_right = 0.01;
};

/// Split thresholds on the raw diffusivity -q/p'.
struct SplitBounds {
    double dmin = 1e-5;
    double dmax = 1e13;
};

inline constexpr double min_gradient = 1e-10;
inline constexpr double steep_gradient = 10.0;

/// Second-order first derivative: centered inside, one-sided at the ends.
inline std::vector<double> grad(const Grid& grid, std::span<const double> p) {
    const std::size_t n = grid.size();
    expects(p.size() == n, "grad: profile length does not match grid");
    const double inv2dx = 0.5 / grid.dx();
    std::vector<double> g(n);
    g[0] = (-3.0 * p[0] + 4.0 * p[1] - p[2]) * inv2dx;
    for (std::size_t i = 1; i + 1 < n; ++i) g[i] = (p[i + 1] - p[i - 1]) * inv2dx;
    g[n - 1] = (3.0 * p[n - 1] - 4.0 * p[n - 2] + p[n - 3]) * inv2dx;
    return g;
}

/// Throws evaluation_error(unphysical) unless every value is finite and > 0.
inline void require_physical(std::span<const double> p) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p[i]) || p[i] <= 0.0) {
            throw evaluation_error(evaluation_failure::unphysical,
                                   "unphysical profile value at node " + std::to_string(i));
        }
    }
}

/// Diffusive weight for a node with raw diffusivity d_hat and gradient g.
inline double split_theta(double d_hat, double g, const SplitBounds& bounds) {
    if (d_hat < bounds.dmin) return 0.0;
    if (std::abs(g) < steep_gradient && d_hat <= bounds.dmax) {
        return 0.5 * (1.0 + (bounds.dmax - d_hat) / (bounds.dmax - bounds.dmin));
    }
    // d_hat > dmax, or a steep gradient the case table does not cover.
    return 0.5;
}

inline FluxSplit split_flux(const Grid& grid, std::span<const double> p, std::span<const double> q,
                            const SplitBounds& bounds = {}) {
    const std::size_t n = grid.size();
    expects(q.size() == n, "split_flux: flux length does not match grid");
    require_physical(p);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(q[i])) {
            throw evaluation_error(evaluation_failure::unphysical,
                                   "non-finite flux at node " + std::to_string(i));
        }
    }
    const std::vector<double> g = grad(grid, p);
    FluxSplit split{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n),
                    std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const double gi = std::abs(g[i]) < min_gradient ? std::copysign(min_gradient, g[i]) : g[i];
        const double d_hat = -q[i] / gi;
        const double theta = split_theta(d_hat, gi, bounds);
        split.d_hat[i] = d_hat;
        split.theta[i] = theta;
        split.d_coef[i] = -theta * q[i] / gi;
        split.c_coef[i] = (1.0 - theta) * q[i] / p[i];
    }
    return split;
}

/// Conservative control-volume assembly of M = I - H Dx(D Dx - c).
/// Face diffusivity and convective face flux are arithmetic means of the
/// adjacent nodal values. Node 0 carries a half cell with zero flux through
/// x = 0 (p'(0) = 0); the last row pins p(1) = p_right.
inline TridiagonalSystem assemble_system(const Grid& grid, const FluxSplit& split,
                                         const StepParams& params) {
    const std::size_t n = grid.size();
    expects(split.d_coef.size() == n && split.c_coef.size() == n,
            "assemble_system: split does not match grid");
    expects(params.p_prev.size() == n && params.source.size() == n,
            "assemble_system: step parameters do not match grid");
    expects(params.h_step >= 0.0, "assemble_system: negative time step");
    const auto& d = split.d_coef;
    const auto& c = split.c_coef;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(d[i]) || !std::isfinite(c[i])) {
            throw evaluation_error(evaluation_failure::linear_solve,
                                   "non-finite transport coefficient at node " + std::to_string(i));
        }
    }

    const double dx = grid.dx();
    const double a = params.h_step / dx;
    TridiagonalSystem sys{std::vector<double>(n - 1), std::vector<double>(n),
                          std::vector<double>(n - 1), std::vector<double>(n)};

    const double face0 = 0.5 * (d[0] + d[1]) / dx;
    sys.diag[0] = 1.0 + 2.0 * a * (face0 + 0.5 * c[0]);
    sys.super[0] = 2.0 * a * (-face0 + 0.5 * c[1]);
    sys.rhs[0] = params.p_prev[0] + params.h_step * params.source[0];

    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double west = 0.5 * (d[i - 1] + d[i]) / dx;
        const double east = 0.5 * (d[i] + d[i + 1]) / dx;
        sys.sub[i - 1] = -a * (west + 0.5 * c[i - 1]);
        sys.diag[i] = 1.0 + a * (west + east);
        sys.super[i] = a * (-east + 0.5 * c[i + 1]);
        sys.rhs[i] = params.p_prev[i] + params.h_step * params.source[i];
    }

    sys.sub[n - 2] = 0.0;
    sys.diag[n - 1] = 1.0;
    sys.rhs[n - 1] = params.p_right;
    return sys;
}

/// Thomas algorithm. A zero or non-finite pivot raises
/// evaluation_error(linear_solve).
inline std::vector<double> thomas_solve(const TridiagonalSystem& sys) {
    const std::size_t n = sys.size();
    expects(n >= 1 && sys.rhs.size() == n && sys.sub.size() + 1 == n && sys.super.size() + 1 == n,
            "thomas_solve: inconsistent system dimensions");
    std::vector<double> c_prime(n, 0.0);
    std::vector<double> x(n);
    auto check = [](double pivot, std::size_t row) {
        if (pivot == 0.0 || !std::isfinite(pivot)) {
            throw evaluation_error(evaluation_failure::linear_solve,
                                   "zero pivot in tridiagonal solve at row " + std::to_string(row));
        }
    };

    check(sys.diag[0], 0);
    if (n > 1) c_prime[0] = sys.super[0] / sys.diag[0];
    x[0] = sys.rhs[0] / sys.diag[0];
    for (std::size_t i = 1; i < n; ++i) {
        const double pivot = sys.diag[i] - sys.sub[i - 1] * c_prime[i - 1];
        check(pivot, i);
        if (i + 1 < n) c_prime[i] = sys.super[i] / pivot;
        x[i] = (sys.rhs[i] - sys.sub[i - 1] * x[i - 1]) / pivot;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= c_prime[i] * x[i + 1];
    return x;
}

/// |M p - b| / |b| for the system assembled at `split`.
inline double linear_residual(const Grid& grid, std::span<const double> p, const FluxSplit& split,
                              const StepParams& params) {
    const TridiagonalSystem sys = assemble_system(grid, split, params);
    const std::vector<double> mp = sys.multiply(p);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < mp.size(); ++i) {
        num += (mp[i] - sys.rhs[i]) * (mp[i] - sys.rhs[i]);
        den += sys.rhs[i] * sys.rhs[i];
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

/// G(p): evaluate the flux, split it, assemble and solve. Returns the
/// unrelaxed next profile.
template <class FluxModel>
std::vector<double> lodestro_g(const Grid& grid, std::span<const double> p, FluxModel&& flux,
                               const StepParams& params, const SplitBounds& bounds = {}) {
    require_physical(p);
    const std::vector<double> q = flux(p);
    const FluxSplit split = split_flux(grid, p, q, bounds);
    return thomas_solve(assemble_system(grid, split, params));
}

/// Default starting profile 0.01 + 0.3 (1 - x^2); satisfies both boundary
/// conditions of the standard problem.
inline std::vector<double> parabolic_profile(const Grid& grid, double p_right = 0.01,
                                             double height = 0.3) {
    std::vector<double> p(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid.x(i);
        p[i] = p_right + height * (1.0 - x * x);
    }
    return p;
}

}  // namespace lodestro::transport
