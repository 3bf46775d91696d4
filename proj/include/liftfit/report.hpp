#ifndef LIFTFIT_REPORT_HPP
#define LIFTFIT_REPORT_HPP

// JSON fit reports. Top-level keys, in order:
//   model, lifted?, solution?, recovery?, baseline?, comparison?, timings,
//   version, inputs
// Doubles are written in shortest round-trip form; infinities become null.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "liftfit/dataset_io.hpp"
#include "liftfit/gauss_newton.hpp"
#include "liftfit/lifting.hpp"
#include "liftfit/model.hpp"
#include "liftfit/pipeline.hpp"

namespace liftfit {

inline constexpr const char* version_string = "liftfit 1.0.0";

using Json = nlohmann::ordered_json;

struct ReportInputs {
    std::string model_text;
    std::string data_path;
    std::size_t rows = 0;
    std::string digest;  // FNV-1a of model text followed by the CSV bytes
};

struct FitReport {
    CanonicalModel model;
    std::optional<LiftedFit> lifted;
    std::optional<FitResult> baseline;
    std::vector<double> baseline_init;
    std::optional<ComparisonReport> comparison;
    ReportInputs inputs;
};

inline std::string input_digest(std::string_view model_text, std::string_view csv_bytes)
{
    return hex64(fnv1a64(csv_bytes, fnv1a64(model_text)));
}

namespace detail {

inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json numbers(const std::vector<double>& v)
{
    Json a = Json::array();
    for (double x : v)
        a.push_back(number(x));
    return a;
}

inline bool degree_at_most_two(const LiftMap& map)
{
    for (const auto& e : map.entries())
        if (e.monomial.degree() > 2)
            return false;
    return true;
}

} // namespace detail

inline Json model_json(const CanonicalModel& model, const std::string& text)
{
    Json j;
    j["text"] = text;
    j["canonical"] = print_canonical(model);
    j["params"] = model.param_names;
    j["data_vars"] = model.data_var_names;
    return j;
}

/// Column structure of the lifted model plus the dimension bound check.
inline Json lifted_structure_json(const LiftedModel& lifted)
{
    const auto& map = lifted.map;
    const auto labels = map.column_labels(lifted.base.param_names);
    Json cols = Json::array();
    std::size_t lifted_index = 0;
    for (std::size_t c = 0; c < lifted.columns.size(); ++c) {
        Json col;
        col["index"] = c;
        if (lifted.columns[c].kind == ColumnKind::lifted_monomial) {
            col["kind"] = "lifted";
            col["name"] = "b" + std::to_string(++lifted_index);
        } else {
            col["kind"] = "linear";
            col["name"] = labels[c];
        }
        col["monomial"] = labels[c];
        col["feature"] = to_string(lifted.columns[c].feature, lifted.base.data_var_names);
        cols.push_back(std::move(col));
    }
    std::size_t quadratic = 0;
    for (const auto& e : map.entries())
        quadratic += e.monomial.degree() == 2 ? 1 : 0;
    const std::size_t bound = lifted_dimension_bound(map.parameter_count());

    Json j;
    j["columns"] = std::move(cols);
    j["offset"] = to_string(lifted.offset, lifted.base.data_var_names);
    j["column_count"] = map.column_count();
    j["lifted_entries"] = map.entries().size();
    j["linear_slots"] = map.linear_slots().size();
    j["quadratic_entries"] = quadratic;
    j["dimension_bound"] = bound;
    j["bound_applies"] = detail::degree_at_most_two(map);
    j["bound_holds"] = quadratic <= bound;
    return j;
}

inline Json report_json(const FitReport& report)
{
    Json j;
    j["model"] = model_json(report.model, report.inputs.model_text);
    Json timings;
    if (report.lifted) {
        const LiftedFit& fit = *report.lifted;
        Json lifted = lifted_structure_json(fit.lifted);
        lifted["rows"] = fit.system.matrix.rows();
        lifted["rank"] = fit.solution.rank;
        lifted["condition_estimate"] = detail::number(fit.solution.condition_estimate);
        lifted["rank_deficient"] = fit.solution.rank_deficient;
        lifted["underdetermined"] = fit.solution.underdetermined;
        j["lifted"] = std::move(lifted);

        Json sol;
        sol["labels"] = fit.system.labels;
        sol["z"] = detail::numbers(fit.solution.z);
        sol["residual_norm"] = fit.solution.residual_norm;
        sol["rank"] = fit.solution.rank;
        sol["rank_tolerance"] = fit.solution.rank_tolerance;
        sol["method"] = std::string(method_name(fit.solution.method));
        sol["singular_values"] = detail::numbers(fit.solution.singular_values);
        j["solution"] = std::move(sol);

        const RecoveredParams& rec = fit.recovery;
        Json r;
        r["a_hat"] = detail::numbers(rec.a_hat);
        Json routes = Json::array();
        for (auto route : rec.routes)
            routes.push_back(std::string(route_name(route)));
        r["routes"] = std::move(routes);
        r["fully_identified"] = rec.fully_identified();
        r["sign_convention"] = rec.sign_convention;
        r["consistency_residual"] = detail::number(rec.consistency_residual);
        r["data_sse"] = detail::number(rec.data_sse);
        r["moment"] = Json{{"used", rec.moment_used},
                           {"converged", rec.moment_converged},
                           {"fit_residual", detail::number(rec.moment_fit_residual)}};
        r["polished"] = rec.polished;
        r["a_unpolished"] = detail::numbers(rec.a_unpolished);
        r["sse_unpolished"] = detail::number(rec.sse_unpolished);
        if (rec.polish) {
            r["polish_iterations"] = rec.polish->iterations;
            r["polish_converged"] = rec.polish->converged;
        }
        j["recovery"] = std::move(r);

        timings["lift_seconds"] = fit.timings.lift_seconds;
        timings["assemble_seconds"] = fit.timings.assemble_seconds;
        timings["solve_seconds"] = fit.timings.solve_seconds;
        timings["recover_seconds"] = fit.timings.recover_seconds;
    }
    if (report.baseline) {
        const FitResult& gn = *report.baseline;
        Json b;
        b["init"] = detail::numbers(report.baseline_init);
        b["a_hat"] = detail::numbers(gn.a_hat);
        b["sse"] = detail::number(gn.sse);
        b["iterations"] = gn.iterations;
        b["converged"] = gn.converged;
        b["message"] = gn.message;
        Json steps = Json::array();
        for (const auto& s : gn.step_history)
            steps.push_back(Json{{"iteration", s.iteration}, {"sse", detail::number(s.sse)}, {"damping", s.damping}});
        b["step_history"] = std::move(steps);
        j["baseline"] = std::move(b);
        timings["baseline_seconds"] = gn.seconds;
    }
    if (report.comparison) {
        const ComparisonReport& c = *report.comparison;
        Json cmp;
        cmp["params"] = c.param_names;
        cmp["lifted_estimate"] = detail::numbers(c.lifted_estimate);
        cmp["gn_estimate"] = detail::numbers(c.gn_estimate);
        cmp["lifted_sse"] = detail::number(c.lifted_sse);
        cmp["gn_sse"] = detail::number(c.gn_sse);
        cmp["max_disagreement"] = detail::number(c.max_disagreement);
        cmp["consistency_residual"] = detail::number(c.consistency_residual);
        cmp["gn_converged"] = c.gn_converged;
        cmp["gn_message"] = c.gn_message;
        if (c.lifted_error)
            cmp["lifted_error"] = detail::numbers(*c.lifted_error);
        if (c.gn_error)
            cmp["gn_error"] = detail::numbers(*c.gn_error);
        j["comparison"] = std::move(cmp);
    }
    j["timings"] = timings.is_null() ? Json::object() : std::move(timings);
    j["version"] = version_string;
    j["inputs"] = Json{{"model_text", report.inputs.model_text},
                       {"data_path", report.inputs.data_path},
                       {"rows", report.inputs.rows},
                       {"digest", report.inputs.digest}};
    return j;
}

inline std::string format_report_json(const FitReport& report) { return report_json(report).dump(2) + "\n"; }

inline void write_report_json(const FitReport& report, const std::string& path)
{
    write_file(path, format_report_json(report));
}

} // namespace liftfit

#endif // LIFTFIT_REPORT_HPP
