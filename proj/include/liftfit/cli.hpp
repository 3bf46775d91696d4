#ifndef LIFTFIT_CLI_HPP
#define LIFTFIT_CLI_HPP

// `liftfit` command line: lift | gen | fit | compare.
//
// Exit codes: 0 success, 1 usage error, 2 data/model error, 3 numerical
// failure (non-convergence, unidentifiable parameters).

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "liftfit/dataset_io.hpp"
#include "liftfit/error.hpp"
#include "liftfit/gauss_newton.hpp"
#include "liftfit/lifting.hpp"
#include "liftfit/model.hpp"
#include "liftfit/pipeline.hpp"
#include "liftfit/report.hpp"

namespace liftfit {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_numerical = 3 };

namespace detail {

struct CliArgs {
    std::string model;
    std::vector<std::string> params;
    std::string data;
    std::string out;
    std::string json;
    std::string method = "lifted";
    bool polish = false;
    std::vector<double> init;
    std::vector<double> truth;
    std::uint64_t seed = 0;
    double noise = 0.0;
    std::size_t n = 50;
    std::vector<std::string> ranges;
    std::size_t max_iter = 100;
    double tol = 1e-10;
};

inline std::map<std::string, std::pair<double, double>> parse_ranges(const std::vector<std::string>& specs)
{
    std::map<std::string, std::pair<double, double>> out;
    for (const auto& spec : specs) {
        const auto eq = spec.find('=');
        const auto colon = spec.find(':', eq == std::string::npos ? 0 : eq);
        if (eq == std::string::npos || colon == std::string::npos)
            throw CLI::ValidationError("--range", "expected var=lo:hi, got '" + spec + "'");
        const std::string name = spec.substr(0, eq);
        double lo = 0.0, hi = 0.0;
        const std::string los = spec.substr(eq + 1, colon - eq - 1), his = spec.substr(colon + 1);
        auto [p1, e1] = std::from_chars(los.data(), los.data() + los.size(), lo);
        auto [p2, e2] = std::from_chars(his.data(), his.data() + his.size(), hi);
        if (e1 != std::errc() || e2 != std::errc() || p1 != los.data() + los.size() || p2 != his.data() + his.size())
            throw CLI::ValidationError("--range", "bad bounds in '" + spec + "'");
        out[name] = {lo, hi};
    }
    return out;
}

inline GaussNewtonOptions gn_options(const CliArgs& args)
{
    GaussNewtonOptions opts;
    opts.max_iter = args.max_iter;
    opts.tol = args.tol;
    return opts;
}

inline std::vector<double> gn_init(const CliArgs& args, std::size_t n)
{
    if (args.init.empty())
        return std::vector<double>(n, 1.0);
    if (args.init.size() != n)
        throw ModelError("--init has " + std::to_string(args.init.size()) + " values, model has " +
                         std::to_string(n) + " parameters");
    return args.init;
}

inline std::string join_numbers(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? ", " : "") + format_number(v[i]);
    return s;
}

inline void print_lift(std::ostream& out, const CanonicalModel& model, const LiftedModel& lifted)
{
    const auto& map = lifted.map;
    const auto labels = map.column_labels(model.param_names);
    out << "model:    " << print_canonical(model) << "\n";
    out << "params:   ";
    for (std::size_t i = 0; i < model.param_names.size(); ++i)
        out << (i ? ", " : "") << model.param_names[i];
    out << " (n = " << model.parameter_count() << ")\n";
    out << "data:     ";
    for (std::size_t i = 0; i < model.data_var_names.size(); ++i)
        out << (i ? ", " : "") << model.data_var_names[i];
    out << "\n";
    out << "columns:  " << map.column_count() << " (" << map.entries().size() << " lifted, "
        << map.linear_slots().size() << " linear)\n";
    std::size_t b = 0;
    for (std::size_t c = 0; c < lifted.columns.size(); ++c) {
        std::string name = lifted.columns[c].kind == ColumnKind::lifted_monomial
                               ? "b" + std::to_string(++b) + " = " + labels[c]
                               : labels[c];
        out << "  [" << c << "] " << std::left << std::setw(18) << name
            << " feature: " << to_string(lifted.columns[c].feature, model.data_var_names) << "\n";
    }
    out << "offset:   " << to_string(lifted.offset, model.data_var_names) << "\n";
    std::size_t quadratic = 0;
    bool higher = false;
    for (const auto& e : map.entries()) {
        quadratic += e.monomial.degree() == 2 ? 1 : 0;
        higher = higher || e.monomial.degree() > 2;
    }
    const std::size_t bound = lifted_dimension_bound(model.parameter_count());
    out << "bound:    n(n+1)/2 = " << bound << "; lifted entries = " << map.entries().size()
        << "; degree-2 entries = " << quadratic << (quadratic <= bound ? " (within bound)" : " (EXCEEDS bound)");
    if (higher)
        out << "; degree>2 entries present, bound covers degree-2 only";
    out << "\n";
}

inline void print_recovery(std::ostream& out, const CanonicalModel& model, const LiftedFit& fit)
{
    out << "lifted solve: rank " << fit.solution.rank << "/" << fit.solution.z.size() << ", "
        << method_name(fit.solution.method) << ", residual norm " << format_number(fit.solution.residual_norm)
        << ", condition " << format_number(fit.solution.condition_estimate) << "\n";
    if (fit.solution.underdetermined)
        out << "warning: fewer samples than lifted columns; parameters are not identifiable from this data\n";
    for (std::size_t k = 0; k < model.parameter_count(); ++k)
        out << "  " << std::left << std::setw(8) << model.param_names[k] << " = "
            << format_number(fit.recovery.a_hat[k]) << "  (" << route_name(fit.recovery.routes[k]) << ")\n";
    out << "consistency residual: " << format_number(fit.recovery.consistency_residual) << "\n";
    out << "data sse: " << format_number(fit.recovery.data_sse);
    if (fit.recovery.polished)
        out << " (before polish " << format_number(fit.recovery.sse_unpolished) << ")";
    out << "\n";
}

inline void print_gn(std::ostream& out, const CanonicalModel& model, const FitResult& gn)
{
    out << "gauss-newton: " << (gn.converged ? "converged" : "NOT converged") << " after " << gn.iterations
        << " iterations (" << gn.message << ")\n";
    for (std::size_t k = 0; k < model.parameter_count(); ++k)
        out << "  " << std::left << std::setw(8) << model.param_names[k] << " = " << format_number(gn.a_hat[k])
            << "\n";
    out << "data sse: " << format_number(gn.sse) << "\n";
}

inline void emit_json(std::ostream& out, const std::string& target, const std::string& text)
{
    if (target == "-")
        out << text;
    else
        write_file(target, text);
}

inline int cmd_lift(const CliArgs& args, bool want_json, std::ostream& out)
{
    const CanonicalModel model = parse_model(args.model, args.params);
    const LiftMap map = build_lift_map(model);
    const LiftedModel lifted = lift_model(model, map);
    print_lift(out, model, lifted);
    if (want_json) {
        Json j;
        j["model"] = model_json(model, args.model);
        j["lifted"] = lifted_structure_json(lifted);
        j["version"] = version_string;
        emit_json(out, args.json, j.dump(2) + "\n");
    }
    return exit_ok;
}

inline int cmd_gen(const CliArgs& args, std::ostream& out)
{
    GenSpec spec;
    spec.model_text = args.model;
    spec.param_names = args.params;
    spec.true_params = args.truth;
    spec.ranges = parse_ranges(args.ranges);
    spec.sample_count = args.n;
    spec.noise_sigma = args.noise;
    spec.seed = args.seed;
    const Dataset data = generate_synthetic(spec, args.out);
    out << "wrote " << data.size() << " rows to " << args.out << "\n";
    return exit_ok;
}

struct LoadedInputs {
    CanonicalModel model;
    Dataset data;
    ReportInputs inputs;
};

inline LoadedInputs load_inputs(const CliArgs& args)
{
    LoadedInputs in;
    const std::string csv = read_file(args.data);
    in.data = parse_dataset_csv(csv, args.data);
    ParseOptions popts;
    in.model = parse_model(args.model, args.params, popts);
    in.inputs.model_text = args.model;
    in.inputs.data_path = args.data;
    in.inputs.rows = in.data.size();
    in.inputs.digest = input_digest(args.model, csv);
    return in;
}

inline int cmd_fit(const CliArgs& args, std::ostream& out)
{
    LoadedInputs in = load_inputs(args);
    FitReport report;
    report.model = in.model;
    report.inputs = in.inputs;
    int code = exit_ok;
    if (args.method == "gn") {
        report.baseline_init = gn_init(args, in.model.parameter_count());
        report.baseline = gauss_newton_fit(in.model, in.data, report.baseline_init, gn_options(args));
        print_gn(out, in.model, *report.baseline);
        if (!report.baseline->converged)
            code = exit_numerical;
    } else {
        RecoveryOptions ropts;
        ropts.polish = args.polish;
        ropts.polish_options = gn_options(args);
        report.lifted = fit_lifted(in.model, in.data, ropts);
        print_recovery(out, in.model, *report.lifted);
        const auto& rec = report.lifted->recovery;
        if (!rec.fully_identified() || !rec.moment_converged)
            code = exit_numerical;
    }
    if (!args.json.empty())
        emit_json(out, args.json, format_report_json(report));
    return code;
}

inline int cmd_compare(const CliArgs& args, std::ostream& out)
{
    LoadedInputs in = load_inputs(args);
    FitReport report;
    report.model = in.model;
    report.inputs = in.inputs;

    RecoveryOptions ropts;
    ropts.polish = args.polish;
    ropts.polish_options = gn_options(args);
    report.lifted = fit_lifted(in.model, in.data, ropts);
    report.baseline_init = gn_init(args, in.model.parameter_count());
    report.baseline = gauss_newton_fit(in.model, in.data, report.baseline_init, gn_options(args));

    std::optional<std::span<const double>> truth;
    if (!args.truth.empty()) {
        if (args.truth.size() != in.model.parameter_count())
            throw ModelError("--true has " + std::to_string(args.truth.size()) + " values, model has " +
                             std::to_string(in.model.parameter_count()) + " parameters");
        truth = std::span<const double>(args.truth);
    }
    report.comparison = compare_fits(report.lifted->recovery, *report.baseline, truth, in.model.param_names);

    print_recovery(out, in.model, *report.lifted);
    print_gn(out, in.model, *report.baseline);
    const auto& c = *report.comparison;
    out << "max |lifted - gn| = " << format_number(c.max_disagreement) << "\n";
    if (c.lifted_error)
        out << "error vs truth: lifted [" << join_numbers(*c.lifted_error) << "], gn [" << join_numbers(*c.gn_error)
            << "]\n";
    if (!args.json.empty())
        emit_json(out, args.json, format_report_json(report));
    return exit_ok;
}

} // namespace detail

/// Runs the CLI; `out` receives results, `err` receives diagnostics.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    detail::CliArgs args;
    CLI::App app{"Fit models that are polynomial in their parameters by lifting to linear least squares", "liftfit"};
    app.require_subcommand(1);

    auto add_model = [&](CLI::App* sub) {
        sub->add_option("--model", args.model, "Model expression, e.g. \"a1^2*x1 + a1*x2\"")->required();
        sub->add_option("--params-names", args.params, "Comma-separated parameter names")
            ->required()
            ->delimiter(',');
    };
    auto add_gn = [&](CLI::App* sub) {
        sub->add_option("--init", args.init, "Gauss-Newton initial guess (default all ones)")->delimiter(',');
        sub->add_option("--max-iter", args.max_iter, "Gauss-Newton iteration limit")->capture_default_str();
        sub->add_option("--tol", args.tol, "Gauss-Newton step tolerance")->capture_default_str();
    };

    CLI::App* lift = app.add_subcommand("lift", "Print the lifted linear system");
    add_model(lift);
    CLI::Option* lift_json =
        lift->add_option("--json", args.json, "Also write the lifted system as JSON ('-' for stdout)")
            ->expected(0, 1)
            ->default_str("-");

    CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
    add_model(gen);
    gen->add_option("--true", args.truth, "True parameter values")->required()->delimiter(',');
    gen->add_option("--out", args.out, "Output CSV path")->required();
    gen->add_option("--n", args.n, "Number of samples")->capture_default_str()->check(CLI::PositiveNumber);
    gen->add_option("--noise", args.noise, "Gaussian noise sigma")->capture_default_str()->check(CLI::NonNegativeNumber);
    gen->add_option("--seed", args.seed, "PRNG seed")->capture_default_str();
    gen->add_option("--range", args.ranges, "Sampling range var=lo:hi (repeatable; default -1:1)");

    CLI::App* fit = app.add_subcommand("fit", "Fit a model to a dataset");
    add_model(fit);
    fit->add_option("--data", args.data, "Input CSV")->required();
    fit->add_option("--method", args.method, "lifted or gn")
        ->capture_default_str()
        ->check(CLI::IsMember({"lifted", "gn"}));
    fit->add_flag("--polish", args.polish, "Refine the lifted recovery with Gauss-Newton");
    fit->add_option("--json", args.json, "Write the JSON report ('-' for stdout)");
    add_gn(fit);

    CLI::App* compare = app.add_subcommand("compare", "Run the lifted fit and the Gauss-Newton baseline");
    add_model(compare);
    compare->add_option("--data", args.data, "Input CSV")->required();
    compare->add_option("--true", args.truth, "True parameters for error reporting")->delimiter(',');
    compare->add_flag("--polish", args.polish, "Refine the lifted recovery with Gauss-Newton");
    compare->add_option("--json", args.json, "Write the JSON report ('-' for stdout)");
    add_gn(compare);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const CLI::App* failing = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << failing->help();
        return exit_usage;
    }

    try {
        if (lift->parsed())
            return detail::cmd_lift(args, lift_json->count() > 0, out);
        if (gen->parsed())
            return detail::cmd_gen(args, out);
        if (fit->parsed())
            return detail::cmd_fit(args, out);
        return detail::cmd_compare(args, out);
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return exit_numerical;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_data;
    }
}

} // namespace liftfit

#endif // LIFTFIT_CLI_HPP
