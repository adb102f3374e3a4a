#pragma once

// Thin QR factorization of a sliding window of columns, updated in place.
// Backs the least-squares step of Anderson acceleration: columns are appended
// at the back and retired from the front as the residual history advances.

#include <lodestro/errors.hpp>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lodestro::denselin {

inline constexpr double rank_tolerance = 1e-14;

inline double dot(std::span<const double> a, std::span<const double> b) {
    expects(a.size() == b.size(), "dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

enum class append_status { appended, rank_deficient };

/// Q (n_rows x cols, orthonormal columns) and R (cols x cols, upper
/// triangular) with F = Q R, where F is the represented column window.
/// Storage is dense and column-major, sized once for max_cols.
class QrFactor {
public:
    QrFactor(std::size_t n_rows, std::size_t max_cols)
        : n_rows_(n_rows), max_cols_(max_cols), q_(n_rows * max_cols, 0.0),
          r_(max_cols * max_cols, 0.0) {
        expects(n_rows >= 1, "QrFactor: n_rows must be positive");
    }

    [[nodiscard]] std::size_t rows() const noexcept { return n_rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return n_cols_; }
    [[nodiscard]] std::size_t max_cols() const noexcept { return max_cols_; }
    [[nodiscard]] bool empty() const noexcept { return n_cols_ == 0; }

    [[nodiscard]] double q(std::size_t i, std::size_t j) const { return q_[j * n_rows_ + i]; }
    [[nodiscard]] double r(std::size_t i, std::size_t j) const { return r_[j * max_cols_ + i]; }

    [[nodiscard]] std::span<const double> q_column(std::size_t j) const {
        return {q_.data() + j * n_rows_, n_rows_};
    }

    void clear() noexcept { n_cols_ = 0; }

    /// Appends `column` as the newest column using classical Gram-Schmidt with
    /// one reorthogonalization pass. A column whose orthogonal component falls
    /// below rank_tolerance * |column| is rejected and the factor is unchanged.
    append_status append(std::span<const double> column) {
        expects(column.size() == n_rows_, "QrFactor::append: column length mismatch");
        expects(n_cols_ < max_cols_, "QrFactor::append: factor is full");

        const std::size_t k = n_cols_;
        double* w = q_.data() + k * n_rows_;
        for (std::size_t i = 0; i < n_rows_; ++i) w[i] = column[i];
        std::vector<double> coeffs(k, 0.0);
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < k; ++j) {
                const double h = dot(q_column(j), {w, n_rows_});
                coeffs[j] += h;
                const double* qj = q_.data() + j * n_rows_;
                for (std::size_t i = 0; i < n_rows_; ++i) w[i] -= h * qj[i];
            }
        }
        const double col_norm = norm2(column);
        const double diag = norm2({w, n_rows_});
        if (!(diag > rank_tolerance * col_norm)) return append_status::rank_deficient;

        for (std::size_t i = 0; i < n_rows_; ++i) w[i] /= diag;
        for (std::size_t j = 0; j < k; ++j) r_[k * max_cols_ + j] = coeffs[j];
        r_[k * max_cols_ + k] = diag;
        for (std::size_t i = k + 1; i < max_cols_; ++i) r_[k * max_cols_ + i] = 0.0;
        ++n_cols_;
        return append_status::appended;
    }

    /// Removes the oldest column. Dropping column 0 of R leaves an upper
    /// Hessenberg matrix; Givens rotations restore triangular form and are
    /// applied to the columns of Q so that Q R still spans the window.
    void pop_front() {
        expects(n_cols_ >= 1, "QrFactor::pop_front: factor is empty");
        const std::size_t m = n_cols_;
        for (std::size_t j = 0; j + 1 < m; ++j) {
            for (std::size_t i = 0; i < m; ++i) r_[j * max_cols_ + i] = r_[(j + 1) * max_cols_ + i];
        }
        for (std::size_t i = 0; i < m; ++i) r_[(m - 1) * max_cols_ + i] = 0.0;

        for (std::size_t i = 0; i + 1 < m; ++i) {
            const double a = r(i, i);
            const double b = r(i + 1, i);
            const double rho = std::hypot(a, b);
            if (rho == 0.0) continue;
            const double c = a / rho;
            const double s = b / rho;
            for (std::size_t j = i; j + 1 < m; ++j) {
                const double upper = r_[j * max_cols_ + i];
                const double lower = r_[j * max_cols_ + i + 1];
                r_[j * max_cols_ + i] = c * upper + s * lower;
                r_[j * max_cols_ + i + 1] = -s * upper + c * lower;
            }
            r_[i * max_cols_ + i + 1] = 0.0;
            double* qa = q_.data() + i * n_rows_;
            double* qb = q_.data() + (i + 1) * n_rows_;
            for (std::size_t row = 0; row < n_rows_; ++row) {
                const double u = qa[row];
                const double v = qb[row];
                qa[row] = c * u + s * v;
                qb[row] = -s * u + c * v;
            }
        }
        --n_cols_;
    }

    /// Returns Q^T v.
    [[nodiscard]] std::vector<double> project(std::span<const double> v) const {
        expects(v.size() == n_rows_, "QrFactor::project: length mismatch");
        std::vector<double> out(n_cols_);
        for (std::size_t j = 0; j < n_cols_; ++j) out[j] = dot(q_column(j), v);
        return out;
    }

    /// Returns F gamma, evaluated as Q (R gamma).
    [[nodiscard]] std::vector<double> apply(std::span<const double> gamma) const {
        expects(gamma.size() == n_cols_, "QrFactor::apply: length mismatch");
        std::vector<double> rg(n_cols_, 0.0);
        for (std::size_t i = 0; i < n_cols_; ++i) {
            for (std::size_t j = i; j < n_cols_; ++j) rg[i] += r(i, j) * gamma[j];
        }
        std::vector<double> out(n_rows_, 0.0);
        for (std::size_t j = 0; j < n_cols_; ++j) {
            const double* qj = q_.data() + j * n_rows_;
            for (std::size_t i = 0; i < n_rows_; ++i) out[i] += qj[i] * rg[j];
        }
        return out;
    }

    /// Minimizes |rhs - F gamma|_2 by back substitution of R gamma = Q^T rhs.
    [[nodiscard]] std::vector<double> solve_least_squares(std::span<const double> rhs) const {
        expects(n_cols_ >= 1, "QrFactor::solve_least_squares: factor is empty");
        expects(rhs.size() == n_rows_, "QrFactor::solve_least_squares: rhs length mismatch");
        for (std::size_t j = 0; j < n_cols_; ++j) {
            double col = 0.0;
            for (std::size_t i = 0; i <= j; ++i) col += r(i, j) * r(i, j);
            if (!(std::abs(r(j, j)) > rank_tolerance * std::sqrt(col))) {
                throw rank_deficient_error(
                    j, "QrFactor: R is numerically singular at column " + std::to_string(j));
            }
        }
        std::vector<double> gamma = project(rhs);
        for (std::size_t ii = n_cols_; ii-- > 0;) {
            double s = gamma[ii];
            for (std::size_t j = ii + 1; j < n_cols_; ++j) s -= r(ii, j) * gamma[j];
            gamma[ii] = s / r(ii, ii);
        }
        return gamma;
    }

private:
    std::size_t n_rows_;
    std::size_t max_cols_;
    std::size_t n_cols_ = 0;
    std::vector<double> q_;
    std::vector<double> r_;
};

}  // namespace lodestro::denselin
