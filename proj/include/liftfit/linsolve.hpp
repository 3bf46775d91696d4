#ifndef LIFTFIT_LINSOLVE_HPP
#define LIFTFIT_LINSOLVE_HPP

// Design-system assembly for a lifted model and the linear least-squares
// solve with rank and conditioning diagnostics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "liftfit/error.hpp"
#include "liftfit/lifting.hpp"
#include "liftfit/linalg.hpp"

namespace liftfit {

struct Sample {
    std::vector<double> point;
    double response = 0.0;

    bool operator==(const Sample&) const = default;
};

struct Dataset {
    std::vector<std::string> data_var_names;
    std::vector<Sample> rows;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }

    bool operator==(const Dataset&) const = default;
};

/// Throws DataError unless every row has one finite value per variable.
inline void validate(const Dataset& data)
{
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        const auto& row = data.rows[i];
        if (row.point.size() != data.data_var_names.size())
            throw DataError("row " + std::to_string(i) + " has " + std::to_string(row.point.size()) +
                            " values, expected " + std::to_string(data.data_var_names.size()));
        for (double x : row.point)
            if (!std::isfinite(x))
                throw DataError("row " + std::to_string(i) + " contains a non-finite value");
        if (!std::isfinite(row.response))
            throw DataError("row " + std::to_string(i) + " has a non-finite response");
    }
}

/// Points re-ordered to the model's data variables; extra dataset columns
/// are ignored, missing ones are an error.
inline std::vector<std::vector<double>> bind_points(const std::vector<std::string>& model_vars, const Dataset& data)
{
    std::vector<std::size_t> source(model_vars.size());
    for (std::size_t k = 0; k < model_vars.size(); ++k) {
        const auto it = std::find(data.data_var_names.begin(), data.data_var_names.end(), model_vars[k]);
        if (it == data.data_var_names.end())
            throw DataError("dataset has no column for model variable '" + model_vars[k] + "'");
        source[k] = static_cast<std::size_t>(it - data.data_var_names.begin());
    }
    std::vector<std::vector<double>> points;
    points.reserve(data.rows.size());
    for (const auto& row : data.rows) {
        std::vector<double> p(model_vars.size());
        for (std::size_t k = 0; k < p.size(); ++k)
            p[k] = row.point.at(source[k]);
        points.push_back(std::move(p));
    }
    return points;
}

struct DesignSystem {
    Matrix matrix;                   // m x p
    std::vector<double> response;    // y_i - offset(x_i)
    std::vector<std::string> labels; // one per column
};

inline DesignSystem assemble_design(const LiftedModel& lifted, const Dataset& data)
{
    if (data.empty())
        throw DataError("dataset is empty");
    validate(data);
    const auto points = bind_points(lifted.base.data_var_names, data);
    const std::size_t m = data.size(), p = lifted.columns.size();
    DesignSystem sys;
    sys.matrix = Matrix(m, p);
    sys.response.resize(m);
    sys.labels = lifted.map.column_labels(lifted.base.param_names);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < p; ++j)
            sys.matrix(i, j) = evaluate(lifted.columns[j].feature, points[i]);
        sys.response[i] = data.rows[i].response - evaluate(lifted.offset, points[i]);
    }
    return sys;
}

enum class SolveMethod { orthogonal_factorization, spectral_min_norm };

inline std::string_view method_name(SolveMethod m)
{
    return m == SolveMethod::orthogonal_factorization ? "orthogonal-factorization" : "spectral-min-norm";
}

struct LiftedSolution {
    std::vector<double> z;
    double residual_norm = 0.0;
    std::size_t rank = 0;
    double condition_estimate = 0.0;  // infinity when rank deficient
    SolveMethod method = SolveMethod::orthogonal_factorization;
    double rank_tolerance = 0.0;
    bool rank_deficient = false;
    bool underdetermined = false;     // fewer rows than columns
    std::vector<double> singular_values;
    Matrix null_space;                // p x (p - rank), orthonormal columns
};

namespace detail {

inline double condition_from(const std::vector<double>& sigma, std::size_t rank)
{
    if (sigma.empty() || rank < sigma.size() || sigma.back() == 0.0)
        return std::numeric_limits<double>::infinity();
    return sigma.front() / sigma.back();
}

} // namespace detail

/// min ||A z - r||_2. Full column rank goes through pivoted Householder QR;
/// otherwise the minimum-norm solution comes from the SVD.
inline LiftedSolution solve_least_squares(const Matrix& a, std::span<const double> r,
                                          std::optional<double> rank_tolerance = std::nullopt)
{
    const std::size_t m = a.rows(), p = a.cols();
    if (m == 0 || p == 0)
        throw NumericalError("least squares needs at least one row and one column");
    if (r.size() != m)
        throw NumericalError("response length does not match the design matrix");
    if (!all_finite(a))
        throw NumericalError("design matrix contains non-finite entries");
    for (double x : r)
        if (!std::isfinite(x))
            throw NumericalError("response contains non-finite entries");

    LiftedSolution sol;
    sol.underdetermined = m < p;
    const Svd svd = jacobi_svd(a);
    sol.singular_values = svd.sigma;

    const PivotedQr qr = pivoted_qr(a, std::vector<double>(r.begin(), r.end()), rank_tolerance);
    if (qr.rank == p) {
        sol.z = solve_full_rank(qr);
        sol.rank = p;
        sol.rank_tolerance = qr.tolerance;
        sol.method = SolveMethod::orthogonal_factorization;
    } else {
        const double tol = rank_tolerance.value_or(default_svd_tolerance(svd, m, p));
        sol.rank_tolerance = tol;
        sol.method = SolveMethod::spectral_min_norm;
        sol.z.assign(p, 0.0);
        std::size_t rank = 0;
        for (std::size_t k = 0; k < p; ++k) {
            if (!(svd.sigma[k] > tol))
                continue;
            ++rank;
            double utr = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                utr += svd.u(i, k) * r[i];
            const double coef = utr / svd.sigma[k];
            for (std::size_t j = 0; j < p; ++j)
                sol.z[j] += coef * svd.v(j, k);
        }
        sol.rank = rank;
        sol.null_space = Matrix(p, p - rank);
        std::size_t col = 0;
        for (std::size_t k = 0; k < p; ++k) {
            if (svd.sigma[k] > tol)
                continue;
            for (std::size_t j = 0; j < p; ++j)
                sol.null_space(j, col) = svd.v(j, k);
            ++col;
        }
    }
    sol.rank_deficient = sol.rank < p;
    sol.condition_estimate = detail::condition_from(svd.sigma, sol.rank);

    std::vector<double> resid = multiply(a, sol.z);
    for (std::size_t i = 0; i < m; ++i)
        resid[i] -= r[i];
    sol.residual_norm = norm2(resid);
    return sol;
}

inline LiftedSolution solve_least_squares(const DesignSystem& sys, std::optional<double> rank_tolerance = std::nullopt)
{
    return solve_least_squares(sys.matrix, sys.response, rank_tolerance);
}

/// sigma_max / sigma_min of the design matrix; infinity if rank deficient.
inline double condition_estimate(const Matrix& a)
{
    const Svd svd = jacobi_svd(a);
    const double tol = default_svd_tolerance(svd, a.rows(), a.cols());
    std::size_t rank = 0;
    for (double s : svd.sigma)
        if (s > tol)
            ++rank;
    return detail::condition_from(svd.sigma, rank);
}

inline double condition_estimate(const DesignSystem& sys) { return condition_estimate(sys.matrix); }

} // namespace liftfit

#endif // LIFTFIT_LINSOLVE_HPP
