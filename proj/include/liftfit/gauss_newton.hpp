#ifndef LIFTFIT_GAUSS_NEWTON_HPP
#define LIFTFIT_GAUSS_NEWTON_HPP

// Damped Gauss-Newton on the original (non-lifted) model. Used as the
// classical baseline and as the polish step after lifted recovery.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "liftfit/error.hpp"
#include "liftfit/linalg.hpp"
#include "liftfit/linsolve.hpp"
#include "liftfit/model.hpp"

namespace liftfit {

struct GaussNewtonOptions {
    std::size_t max_iter = 100;
    double tol = 1e-10;             // on ||delta||_inf
    double relative_sse_tol = 1e-14;
    double lambda0 = 1e-3;
    double lambda_factor = 10.0;
    double lambda_max = 1e12;
};

struct GaussNewtonStep {
    std::size_t iteration = 0;
    double sse = 0.0;
    double damping = 0.0;  // 0 for an undamped step
};

struct FitResult {
    std::vector<double> a_hat;
    double sse = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<GaussNewtonStep> step_history;  // accepted states, starting with the initial one
    std::string message;
    double seconds = 0.0;
};

/// Model, its parameter derivatives, and a dataset bound to the model's
/// variable order. Built once per fit.
class BoundProblem {
public:
    BoundProblem(const CanonicalModel& model, const Dataset& data) : model_(model)
    {
        if (data.empty())
            throw DataError("dataset is empty");
        validate(data);
        points_ = bind_points(model.data_var_names, data);
        responses_.reserve(data.size());
        for (const auto& row : data.rows)
            responses_.push_back(row.response);
        for (std::size_t k = 0; k < model.parameter_count(); ++k)
            derivatives_.push_back(differentiate_param(model, k));
    }

    std::size_t rows() const { return points_.size(); }
    std::size_t parameter_count() const { return model_.parameter_count(); }

    std::vector<double> residuals(std::span<const double> a) const
    {
        std::vector<double> r(rows());
        for (std::size_t i = 0; i < rows(); ++i)
            r[i] = evaluate(model_, a, points_[i]) - responses_[i];
        return r;
    }

    double sse(std::span<const double> a) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < rows(); ++i) {
            const double r = evaluate(model_, a, points_[i]) - responses_[i];
            s += r * r;
        }
        return s;
    }

    Matrix jacobian(std::span<const double> a) const
    {
        Matrix j(rows(), parameter_count());
        for (std::size_t i = 0; i < rows(); ++i)
            for (std::size_t k = 0; k < parameter_count(); ++k)
                j(i, k) = derivatives_[k].empty() ? 0.0 : evaluate(derivatives_[k], a, points_[i]);
        return j;
    }

private:
    const CanonicalModel& model_;
    std::vector<CanonicalModel> derivatives_;
    std::vector<std::vector<double>> points_;
    std::vector<double> responses_;
};

/// sum_i (f(a; x_i) - y_i)^2 on the original model.
inline double sum_of_squares(const CanonicalModel& model, std::span<const double> a, const Dataset& data)
{
    return BoundProblem(model, data).sse(a);
}

struct ResidualJacobian {
    std::vector<double> residuals;  // f(a; x_i) - y_i
    Matrix jacobian;                // df/da_k at x_i
};

inline ResidualJacobian residual_jacobian(const CanonicalModel& model, std::span<const double> a, const Dataset& data)
{
    BoundProblem problem(model, data);
    return {problem.residuals(a), problem.jacobian(a)};
}

namespace detail {

/// sse at a trial point, or +inf if the model cannot be evaluated there.
inline double trial_sse(const BoundProblem& problem, std::span<const double> a)
{
    try {
        const double s = problem.sse(a);
        return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
    } catch (const DomainError&) {
        return std::numeric_limits<double>::infinity();
    }
}

/// Solves min ||J d + r||^2 + lambda ||d||^2 via the stacked system.
inline std::vector<double> damped_step(const Matrix& j, std::span<const double> r, double lambda)
{
    const std::size_t m = j.rows(), n = j.cols();
    Matrix stacked(m + n, n);
    std::vector<double> rhs(m + n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < n; ++k)
            stacked(i, k) = j(i, k);
        rhs[i] = -r[i];
    }
    const double s = std::sqrt(lambda);
    for (std::size_t k = 0; k < n; ++k)
        stacked(m + k, k) = s;
    return solve_least_squares(stacked, rhs).z;
}

} // namespace detail

/// Each iteration first tries the undamped Gauss-Newton step; if that does
/// not lower the sse, Levenberg damping lambda*I is applied, multiplied by
/// lambda_factor on every rejection and divided by it on acceptance.
inline FitResult gauss_newton_fit(const CanonicalModel& model, const Dataset& data, std::span<const double> a_init,
                                  const GaussNewtonOptions& opts = {})
{
    const auto started = std::chrono::steady_clock::now();
    if (a_init.size() != model.parameter_count())
        throw ModelError("initial guess has " + std::to_string(a_init.size()) + " values, expected " +
                         std::to_string(model.parameter_count()));
    const BoundProblem problem(model, data);

    FitResult fit;
    fit.a_hat.assign(a_init.begin(), a_init.end());
    fit.sse = detail::trial_sse(problem, fit.a_hat);
    if (!std::isfinite(fit.sse))
        throw NumericalError("model cannot be evaluated at the initial guess");
    double lambda = opts.lambda0;
    fit.step_history.push_back({0, fit.sse, 0.0});

    auto accept = [&](std::vector<double>&& a, double s, double damping) {
        const double previous = fit.sse;
        fit.a_hat = std::move(a);
        fit.sse = s;
        fit.step_history.push_back({fit.iterations, s, damping});
        return s == 0.0 || previous - s <= opts.relative_sse_tol * previous;
    };
    auto shifted = [&](const std::vector<double>& delta) {
        std::vector<double> a = fit.a_hat;
        for (std::size_t k = 0; k < a.size(); ++k)
            a[k] += delta[k];
        return a;
    };

    while (fit.iterations < opts.max_iter && !fit.converged) {
        ++fit.iterations;
        const std::vector<double> r = problem.residuals(fit.a_hat);
        const Matrix j = problem.jacobian(fit.a_hat);

        std::vector<double> minus_r(r.size());
        for (std::size_t i = 0; i < r.size(); ++i)
            minus_r[i] = -r[i];
        std::vector<double> delta = solve_least_squares(j, minus_r).z;
        std::vector<double> trial = shifted(delta);
        double s = detail::trial_sse(problem, trial);
        if (max_abs(delta) <= opts.tol) {
            if (s <= fit.sse)
                accept(std::move(trial), s, 0.0);
            fit.converged = true;
            fit.message = "step below tolerance";
            break;
        }
        if (s < fit.sse) {
            if (accept(std::move(trial), s, 0.0)) {
                fit.converged = true;
                fit.message = "relative sse change below tolerance";
            }
            continue;
        }

        bool accepted = false;
        while (lambda <= opts.lambda_max) {
            delta = detail::damped_step(j, r, lambda);
            if (max_abs(delta) <= opts.tol) {
                fit.converged = true;
                fit.message = "damped step below tolerance";
                break;
            }
            trial = shifted(delta);
            s = detail::trial_sse(problem, trial);
            if (s < fit.sse) {
                if (accept(std::move(trial), s, lambda)) {
                    fit.converged = true;
                    fit.message = "relative sse change below tolerance";
                }
                lambda /= opts.lambda_factor;
                accepted = true;
                break;
            }
            lambda *= opts.lambda_factor;
        }
        if (!accepted && !fit.converged) {
            fit.message = "damping exceeded maximum without decreasing sse";
            break;
        }
    }
    if (!fit.converged && fit.message.empty())
        fit.message = "iteration limit reached";
    fit.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return fit;
}

} // namespace liftfit

#endif // LIFTFIT_GAUSS_NEWTON_HPP
