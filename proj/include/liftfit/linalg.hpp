#ifndef LIFTFIT_LINALG_HPP
#define LIFTFIT_LINALG_HPP

// Small dense linear algebra: a row-major matrix, Householder QR with column
// pivoting, one-sided Jacobi SVD, and the cyclic Jacobi symmetric eigensolver.
// Sizes here are tiny (tens of columns), so clarity wins over blocking.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace liftfit {

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill)
    {
    }

    static Matrix identity(std::size_t n)
    {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double> column(std::size_t c) const
    {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            out[r] = (*this)(r, c);
        return out;
    }

    std::span<const double> data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline std::vector<double> multiply(const Matrix& a, std::span<const double> x)
{
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j)
            s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

/// A^T y
inline std::vector<double> transpose_multiply(const Matrix& a, std::span<const double> y)
{
    std::vector<double> x(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            x[j] += a(i, j) * y[i];
    return x;
}

inline double norm2(std::span<const double> v)
{
    // Scaled to avoid overflow in the squares.
    double scale = 0.0;
    for (double x : v)
        scale = std::max(scale, std::fabs(x));
    if (scale == 0.0)
        return 0.0;
    double s = 0.0;
    for (double x : v)
        s += (x / scale) * (x / scale);
    return scale * std::sqrt(s);
}

inline double max_abs(std::span<const double> v)
{
    double m = 0.0;
    for (double x : v)
        m = std::max(m, std::fabs(x));
    return m;
}

/// Infinity norm (max absolute row sum).
inline double norm_inf(const Matrix& a)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (double x : a.row(i))
            s += std::fabs(x);
        m = std::max(m, s);
    }
    return m;
}

inline bool all_finite(const Matrix& a)
{
    return std::all_of(a.data().begin(), a.data().end(), [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------

struct PivotedQr {
    Matrix r;                        // upper-trapezoidal factor, min(m,p) x p
    std::vector<std::size_t> perm;   // column j of R came from column perm[j] of A
    std::vector<double> qtb;         // Q^T b, length m
    std::size_t rank = 0;
    double tolerance = 0.0;
};

/// Householder QR with column pivoting applied to A and b together.
/// Rank counts diagonal entries of R above the tolerance; the default
/// tolerance is max(m,p) * eps * |R(0,0)| (|R(0,0)| is the largest column norm).
inline PivotedQr pivoted_qr(Matrix a, std::vector<double> b, std::optional<double> tolerance = std::nullopt)
{
    const std::size_t m = a.rows(), p = a.cols();
    const std::size_t steps = std::min(m, p);
    std::vector<std::size_t> perm(p);
    std::iota(perm.begin(), perm.end(), std::size_t{0});

    auto tail_norm = [&](std::size_t k, std::size_t j) {
        double scale = 0.0;
        for (std::size_t i = k; i < m; ++i)
            scale = std::max(scale, std::fabs(a(i, j)));
        if (scale == 0.0)
            return 0.0;
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i)
            s += (a(i, j) / scale) * (a(i, j) / scale);
        return scale * std::sqrt(s);
    };

    std::vector<double> v(m);
    for (std::size_t k = 0; k < steps; ++k) {
        std::size_t best = k;
        double best_norm = tail_norm(k, k);
        for (std::size_t j = k + 1; j < p; ++j) {
            const double nj = tail_norm(k, j);
            if (nj > best_norm) {
                best_norm = nj;
                best = j;
            }
        }
        if (best != k) {
            for (std::size_t i = 0; i < m; ++i)
                std::swap(a(i, k), a(i, best));
            std::swap(perm[k], perm[best]);
        }
        if (best_norm == 0.0)
            break;

        const double alpha = a(k, k) > 0.0 ? -best_norm : best_norm;
        double vtv = 0.0;
        for (std::size_t i = k; i < m; ++i) {
            v[i] = a(i, k);
            if (i == k)
                v[i] -= alpha;
            vtv += v[i] * v[i];
        }
        if (vtv == 0.0)
            continue;
        for (std::size_t j = k + 1; j < p; ++j) {
            double dot = 0.0;
            for (std::size_t i = k; i < m; ++i)
                dot += v[i] * a(i, j);
            const double f = 2.0 * dot / vtv;
            for (std::size_t i = k; i < m; ++i)
                a(i, j) -= f * v[i];
        }
        double dot = 0.0;
        for (std::size_t i = k; i < m; ++i)
            dot += v[i] * b[i];
        const double f = 2.0 * dot / vtv;
        for (std::size_t i = k; i < m; ++i)
            b[i] -= f * v[i];
        a(k, k) = alpha;
        for (std::size_t i = k + 1; i < m; ++i)
            a(i, k) = 0.0;
    }

    PivotedQr qr;
    qr.r = Matrix(steps, p);
    for (std::size_t i = 0; i < steps; ++i)
        for (std::size_t j = i; j < p; ++j)
            qr.r(i, j) = a(i, j);
    qr.perm = std::move(perm);
    qr.qtb = std::move(b);
    const double lead = steps > 0 ? std::fabs(qr.r(0, 0)) : 0.0;
    qr.tolerance = tolerance.value_or(static_cast<double>(std::max(m, p)) *
                                      std::numeric_limits<double>::epsilon() * lead);
    for (std::size_t k = 0; k < steps; ++k)
        if (std::fabs(qr.r(k, k)) > qr.tolerance)
            ++qr.rank;
    return qr;
}

/// Back substitution on a full-rank pivoted QR; returns x in A's column order.
inline std::vector<double> solve_full_rank(const PivotedQr& qr)
{
    const std::size_t p = qr.r.cols();
    std::vector<double> y(p, 0.0);
    for (std::size_t k = p; k-- > 0;) {
        double s = qr.qtb[k];
        for (std::size_t j = k + 1; j < p; ++j)
            s -= qr.r(k, j) * y[j];
        y[k] = s / qr.r(k, k);
    }
    std::vector<double> x(p);
    for (std::size_t j = 0; j < p; ++j)
        x[qr.perm[j]] = y[j];
    return x;
}

// ---------------------------------------------------------------------------

struct Svd {
    Matrix u;                   // m x p, orthonormal columns where sigma > 0
    std::vector<double> sigma;  // descending
    Matrix v;                   // p x p orthogonal
    std::size_t sweeps = 0;
    bool converged = false;
};

/// One-sided Jacobi (Hestenes) SVD: rotates column pairs of A until they are
/// mutually orthogonal, which diagonalizes A^T A implicitly.
inline Svd jacobi_svd(const Matrix& a, std::size_t max_sweeps = 100)
{
    const std::size_t m = a.rows(), p = a.cols();
    Matrix u = a;
    Matrix v = Matrix::identity(p);
    const double eps = std::numeric_limits<double>::epsilon();
    Svd out;
    for (out.sweeps = 0; out.sweeps < max_sweeps; ++out.sweeps) {
        bool rotated = false;
        for (std::size_t i = 0; i + 1 < p; ++i) {
            for (std::size_t j = i + 1; j < p; ++j) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t k = 0; k < m; ++k) {
                    alpha += u(k, i) * u(k, i);
                    beta += u(k, j) * u(k, j);
                    gamma += u(k, i) * u(k, j);
                }
                if (alpha == 0.0 || beta == 0.0 || std::fabs(gamma) <= eps * std::sqrt(alpha * beta))
                    continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t k = 0; k < m; ++k) {
                    const double ui = u(k, i), uj = u(k, j);
                    u(k, i) = c * ui - s * uj;
                    u(k, j) = s * ui + c * uj;
                }
                for (std::size_t k = 0; k < p; ++k) {
                    const double vi = v(k, i), vj = v(k, j);
                    v(k, i) = c * vi - s * vj;
                    v(k, j) = s * vi + c * vj;
                }
            }
        }
        if (!rotated) {
            out.converged = true;
            break;
        }
    }

    std::vector<double> sigma(p);
    for (std::size_t j = 0; j < p; ++j)
        sigma[j] = norm2(u.column(j));
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    out.u = Matrix(m, p);
    out.v = Matrix(p, p);
    out.sigma.resize(p);
    for (std::size_t jj = 0; jj < p; ++jj) {
        const std::size_t j = order[jj];
        out.sigma[jj] = sigma[j];
        for (std::size_t k = 0; k < m; ++k)
            out.u(k, jj) = sigma[j] > 0.0 ? u(k, j) / sigma[j] : 0.0;
        for (std::size_t k = 0; k < p; ++k)
            out.v(k, jj) = v(k, j);
    }
    return out;
}

/// Default spectral cutoff: max(m,p) * eps * sigma_max.
inline double default_svd_tolerance(const Svd& svd, std::size_t m, std::size_t p)
{
    const double top = svd.sigma.empty() ? 0.0 : svd.sigma.front();
    return static_cast<double>(std::max(m, p)) * std::numeric_limits<double>::epsilon() * top;
}

// ---------------------------------------------------------------------------

struct SymmetricEigen {
    std::vector<double> values;  // descending
    Matrix vectors;              // column k pairs with values[k]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
inline SymmetricEigen symmetric_eigen(Matrix a, std::size_t max_sweeps = 100)
{
    const std::size_t n = a.rows();
    Matrix v = Matrix::identity(n);
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0, total = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                total += a(i, j) * a(i, j);
                if (i != j)
                    off += a(i, j) * a(i, j);
            }
        if (off <= 1e-30 * total || off == 0.0)
            break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0)
                    continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = std::copysign(1.0, theta) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    SymmetricEigen out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t kk = 0; kk < n; ++kk) {
        out.values[kk] = a(order[kk], order[kk]);
        for (std::size_t i = 0; i < n; ++i)
            out.vectors(i, kk) = v(i, order[kk]);
    }
    return out;
}

} // namespace liftfit

#endif // LIFTFIT_LINALG_HPP
