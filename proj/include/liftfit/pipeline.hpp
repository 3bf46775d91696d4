#ifndef LIFTFIT_PIPELINE_HPP
#define LIFTFIT_PIPELINE_HPP

// End-to-end lifted fit and the comparison against the Gauss-Newton baseline.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "liftfit/gauss_newton.hpp"
#include "liftfit/lifting.hpp"
#include "liftfit/linsolve.hpp"
#include "liftfit/model.hpp"
#include "liftfit/recovery.hpp"

namespace liftfit {

struct LiftedTimings {
    double lift_seconds = 0.0;
    double assemble_seconds = 0.0;
    double solve_seconds = 0.0;
    double recover_seconds = 0.0;

    double total() const { return lift_seconds + assemble_seconds + solve_seconds + recover_seconds; }
};

struct LiftedFit {
    LiftMap map;
    LiftedModel lifted;
    DesignSystem system;
    LiftedSolution solution;
    RecoveredParams recovery;
    LiftedTimings timings;
};

/// Lift, assemble, solve, recover.
inline LiftedFit fit_lifted(const CanonicalModel& model, const Dataset& data, const RecoveryOptions& options = {},
                            std::optional<double> rank_tolerance = std::nullopt)
{
    using clock = std::chrono::steady_clock;
    auto seconds_since = [](clock::time_point t) {
        return std::chrono::duration<double>(clock::now() - t).count();
    };
    LiftedFit fit;
    auto t = clock::now();
    fit.map = build_lift_map(model);
    fit.lifted = lift_model(model, fit.map);
    fit.timings.lift_seconds = seconds_since(t);

    t = clock::now();
    fit.system = assemble_design(fit.lifted, data);
    fit.timings.assemble_seconds = seconds_since(t);

    t = clock::now();
    fit.solution = solve_least_squares(fit.system, rank_tolerance);
    fit.timings.solve_seconds = seconds_since(t);

    t = clock::now();
    fit.recovery = recover_parameters(fit.solution, fit.map, model, data, options);
    fit.timings.recover_seconds = seconds_since(t);
    fit.recovery.seconds = fit.timings.total();
    return fit;
}

struct ComparisonReport {
    std::vector<std::string> param_names;
    std::vector<double> lifted_estimate;
    std::vector<double> gn_estimate;
    double lifted_sse = 0.0;
    double gn_sse = 0.0;
    std::optional<std::vector<double>> lifted_error;  // |a_hat - truth| per parameter
    std::optional<std::vector<double>> gn_error;
    double max_disagreement = 0.0;                    // max_k |lifted_k - gn_k|
    double consistency_residual = 0.0;
    bool gn_converged = false;
    std::string gn_message;
    double lifted_seconds = 0.0;
    double gn_seconds = 0.0;
};

inline ComparisonReport compare_fits(const RecoveredParams& lifted, const FitResult& gn,
                                     std::optional<std::span<const double>> truth = std::nullopt,
                                     std::vector<std::string> param_names = {})
{
    ComparisonReport report;
    report.param_names = std::move(param_names);
    report.lifted_estimate = lifted.a_hat;
    report.gn_estimate = gn.a_hat;
    report.lifted_sse = lifted.data_sse;
    report.gn_sse = gn.sse;
    report.consistency_residual = lifted.consistency_residual;
    report.gn_converged = gn.converged;
    report.gn_message = gn.message;
    report.lifted_seconds = lifted.seconds;
    report.gn_seconds = gn.seconds;
    for (std::size_t k = 0; k < lifted.a_hat.size() && k < gn.a_hat.size(); ++k)
        report.max_disagreement = std::max(report.max_disagreement, std::fabs(lifted.a_hat[k] - gn.a_hat[k]));
    if (truth) {
        auto errors = [&](const std::vector<double>& est) {
            std::vector<double> e(est.size());
            for (std::size_t k = 0; k < est.size(); ++k)
                e[k] = std::fabs(est[k] - (*truth)[k]);
            return e;
        };
        if (truth->size() != lifted.a_hat.size())
            throw ModelError("truth vector length does not match the parameter count");
        report.lifted_error = errors(lifted.a_hat);
        report.gn_error = errors(gn.a_hat);
    }
    return report;
}

} // namespace liftfit

#endif // LIFTFIT_PIPELINE_HPP
