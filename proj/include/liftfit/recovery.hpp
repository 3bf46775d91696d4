#ifndef LIFTFIT_RECOVERY_HPP
#define LIFTFIT_RECOVERY_HPP

// Recovery of the original parameters from a lifted solution z.
//
// Policy, cheapest reliable route first:
//   1. linear readout: a_k = z[slot] when a_k has a degree-1 column;
//   2. moment factor: quadratic entries form M with M ~ a a^T; a rank-1 fit
//      over the observed entries gives a up to sign per connected block;
//   3. power root: a_k = z^(1/d) from a pure power a_k^d, d >= 3;
//   4. otherwise the parameter is unidentifiable (reported as 0).
// Mixed monomials of degree >= 3 only enter the consistency residual.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "liftfit/error.hpp"
#include "liftfit/gauss_newton.hpp"
#include "liftfit/lifting.hpp"
#include "liftfit/linalg.hpp"
#include "liftfit/linsolve.hpp"
#include "liftfit/model.hpp"

namespace liftfit {

struct MomentMatrix {
    std::size_t n = 0;
    Matrix values;                                    // unobserved entries hold 0
    std::vector<char> observed;                       // n*n, row-major
    std::vector<std::size_t> higher_degree_entries;   // lift entries of degree >= 3

    bool is_observed(std::size_t i, std::size_t j) const { return observed[i * n + j] != 0; }

    std::size_t observed_count() const
    {
        return static_cast<std::size_t>(std::count(observed.begin(), observed.end(), char{1}));
    }
};

inline MomentMatrix build_moment_matrix(std::span<const double> z, const LiftMap& map)
{
    if (z.size() != map.column_count())
        throw ModelError("lifted vector length does not match the lift map");
    MomentMatrix mm;
    mm.n = map.parameter_count();
    mm.values = Matrix(mm.n, mm.n);
    mm.observed.assign(mm.n * mm.n, 0);
    for (std::size_t e = 0; e < map.entries().size(); ++e) {
        const auto& entry = map.entries()[e];
        if (entry.monomial.degree() != 2) {
            mm.higher_degree_entries.push_back(e);
            continue;
        }
        std::vector<std::size_t> idx;
        for (std::size_t k = 0; k < entry.monomial.exponents.size(); ++k)
            for (unsigned r = 0; r < entry.monomial.exponents[k]; ++r)
                idx.push_back(k);
        const std::size_t i = idx[0], j = idx[1];
        mm.values(i, j) = mm.values(j, i) = z[entry.column];
        mm.observed[i * mm.n + j] = mm.observed[j * mm.n + i] = 1;
    }
    return mm;
}

struct Rank1Options {
    std::size_t max_iter = 500;
    double tol = 1e-12;
};

struct Rank1Factor {
    std::vector<double> v;
    double fit_residual = 0.0;  // sqrt of the loss over observed (i, j)
    std::size_t iterations = 0;
    bool converged = false;
    /// Index sets linked by observed entries; each has its own sign freedom.
    std::vector<std::vector<std::size_t>> blocks;
};

/// sqrt( sum over observed ordered (i, j) of (M_ij - v_i v_j)^2 )
inline double masked_rank1_residual(const MomentMatrix& mm, std::span<const double> v)
{
    double loss = 0.0;
    for (std::size_t i = 0; i < mm.n; ++i)
        for (std::size_t j = 0; j < mm.n; ++j)
            if (mm.is_observed(i, j)) {
                const double d = mm.values(i, j) - v[i] * v[j];
                loss += d * d;
            }
    return std::sqrt(loss);
}

namespace detail {

inline std::vector<std::vector<std::size_t>> observed_blocks(const MomentMatrix& mm)
{
    std::vector<int> block(mm.n, -1);
    std::vector<std::vector<std::size_t>> blocks;
    for (std::size_t s = 0; s < mm.n; ++s) {
        bool touched = false;
        for (std::size_t j = 0; j < mm.n; ++j)
            touched = touched || mm.is_observed(s, j);
        if (!touched || block[s] >= 0)
            continue;
        const int id = static_cast<int>(blocks.size());
        blocks.emplace_back();
        std::vector<std::size_t> stack{s};
        block[s] = id;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            blocks.back().push_back(i);
            for (std::size_t j = 0; j < mm.n; ++j)
                if (j != i && mm.is_observed(i, j) && block[j] < 0) {
                    block[j] = id;
                    stack.push_back(j);
                }
        }
        std::sort(blocks.back().begin(), blocks.back().end());
    }
    return blocks;
}

struct BlockFit {
    std::vector<double> v;
    std::size_t iterations = 0;
    bool converged = false;
};

inline double block_loss(const Matrix& m, const std::vector<char>& obs, std::span<const double> v)
{
    const std::size_t k = v.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (obs[i * k + j]) {
                const double d = m(i, j) - v[i] * v[j];
                loss += d * d;
            }
    return loss;
}

/// Gauss-Newton with backtracking on the observed-entry residuals, moving
/// only components with free[i] set. Returns whether it settled.
inline bool refine_block(const Matrix& m, const std::vector<char>& obs, const std::vector<char>& free,
                         std::vector<double>& v, const Rank1Options& opts, std::size_t& iterations)
{
    const std::size_t k = v.size();
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < k; ++i)
        if (free[i])
            cols.push_back(i);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (obs[i * k + j])
                pairs.emplace_back(i, j);
    if (cols.empty() || pairs.empty())
        return true;

    double loss = block_loss(m, obs, v);
    const std::size_t budget = iterations + opts.max_iter;
    while (iterations < budget && loss > 0.0) {
        ++iterations;
        Matrix jac(pairs.size(), cols.size());
        std::vector<double> resid(pairs.size());
        for (std::size_t r = 0; r < pairs.size(); ++r) {
            const auto [i, j] = pairs[r];
            for (std::size_t c = 0; c < cols.size(); ++c) {
                if (cols[c] == i)
                    jac(r, c) += v[j];
                if (cols[c] == j)
                    jac(r, c) += v[i];
            }
            resid[r] = m(i, j) - v[i] * v[j];
        }
        const std::vector<double> delta = solve_least_squares(jac, resid).z;
        double step = 1.0;
        bool improved = false;
        std::vector<double> trial = v;
        for (int halving = 0; halving < 40; ++halving) {
            for (std::size_t c = 0; c < cols.size(); ++c)
                trial[cols[c]] = v[cols[c]] + step * delta[c];
            const double t = block_loss(m, obs, trial);
            if (t < loss) {
                improved = true;
                loss = t;
                break;
            }
            step *= 0.5;
        }
        double change = 0.0, scale = 1.0;
        for (std::size_t i = 0; i < k; ++i) {
            change = std::max(change, std::fabs(trial[i] - v[i]));
            scale = std::max(scale, std::fabs(v[i]));
        }
        if (improved)
            v = trial;
        if (!improved || change / scale <= opts.tol)
            return true;
    }
    return loss == 0.0;
}

/// Indices among the free ones that the observed entries leave locally
/// undetermined at v (e.g. only v_i v_j observed: v_i may trade scale with v_j).
inline std::vector<char> locally_undetermined(const std::vector<char>& obs,
                                              const std::vector<char>& free, std::span<const double> v)
{
    const std::size_t k = v.size();
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < k; ++i)
        if (free[i])
            cols.push_back(i);
    std::vector<char> out(k, 0);
    if (cols.empty())
        return out;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i; j < k; ++j)
            if (obs[i * k + j])
                pairs.emplace_back(i, j);
    Matrix jac(std::max<std::size_t>(pairs.size(), 1), cols.size());
    for (std::size_t r = 0; r < pairs.size(); ++r) {
        const auto [i, j] = pairs[r];
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (cols[c] == i)
                jac(r, c) += v[j];
            if (cols[c] == j)
                jac(r, c) += v[i];
        }
    }
    const Svd svd = jacobi_svd(jac);
    const double tol = std::max(default_svd_tolerance(svd, jac.rows(), jac.cols()),
                                1e-10 * (svd.sigma.empty() ? 0.0 : svd.sigma.front()));
    for (std::size_t s = 0; s < cols.size(); ++s) {
        if (svd.sigma[s] > tol)
            continue;
        for (std::size_t c = 0; c < cols.size(); ++c)
            if (std::fabs(svd.v(c, s)) > 1e-8)
                out[cols[c]] = 1;
    }
    return out;
}

/// Rank-1 fit on one connected block: imputation iterations (fill the
/// unobserved entries with v_i v_j, take the dominant eigenpair) until the
/// iterate settles, then Gauss-Newton on the observed-entry residuals.
inline BlockFit fit_block(const Matrix& m, const std::vector<char>& obs, const Rank1Options& opts)
{
    const std::size_t k = m.rows();
    BlockFit fit;
    fit.v.assign(k, 0.0);
    auto scaled_change = [](const std::vector<double>& a, const std::vector<double>& b) {
        double d = 0.0, s = 1.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            d = std::max(d, std::fabs(a[i] - b[i]));
            s = std::max(s, std::fabs(b[i]));
        }
        return d / s;
    };

    constexpr double handoff = 1e-6;
    while (fit.iterations < opts.max_iter) {
        ++fit.iterations;
        Matrix filled(k, k);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
                filled(i, j) = obs[i * k + j] ? m(i, j) : fit.v[i] * fit.v[j];
        const SymmetricEigen eig = symmetric_eigen(filled);
        const double scale = std::sqrt(std::max(eig.values.front(), 0.0));
        std::vector<double> next(k);
        double dot = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            next[i] = scale * eig.vectors(i, 0);
            dot += next[i] * fit.v[i];
        }
        if (dot < 0.0)
            for (auto& x : next)
                x = -x;
        const double change = scaled_change(next, fit.v);
        fit.v = std::move(next);
        if (change <= opts.tol) {
            fit.converged = true;
            return fit;
        }
        if (change <= handoff)
            break;
    }

    const std::vector<char> all_free(k, 1);
    fit.converged = refine_block(m, obs, all_free, fit.v, opts, fit.iterations);
    return fit;
}

} // namespace detail

/// v minimizing sum over observed (i, j) of (M_ij - v_i v_j)^2. Each
/// connected block of observed entries is fitted independently and
/// normalized so its first nonzero component is positive; indices with no
/// observed entry get 0.
inline Rank1Factor rank1_factor(const MomentMatrix& mm, const Rank1Options& opts = {})
{
    if (mm.observed_count() == 0)
        throw NumericalError("moment matrix has no observed entries");
    Rank1Factor out;
    out.v.assign(mm.n, 0.0);
    out.converged = true;
    out.blocks = detail::observed_blocks(mm);
    for (const auto& block : out.blocks) {
        const std::size_t k = block.size();
        Matrix sub(k, k);
        std::vector<char> obs(k * k, 0);
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) {
                sub(a, b) = mm.values(block[a], block[b]);
                obs[a * k + b] = mm.is_observed(block[a], block[b]) ? 1 : 0;
            }
        detail::BlockFit fit = detail::fit_block(sub, obs, opts);
        const auto first = std::find_if(fit.v.begin(), fit.v.end(), [](double x) { return x != 0.0; });
        if (first != fit.v.end() && *first < 0.0)
            for (auto& x : fit.v)
                x = -x;
        for (std::size_t a = 0; a < k; ++a)
            out.v[block[a]] = fit.v[a];
        out.iterations += fit.iterations;
        out.converged = out.converged && fit.converged;
    }
    out.fit_residual = masked_rank1_residual(mm, out.v);
    return out;
}

using SseFunction = std::function<double(std::span<const double>)>;

/// Chooses +v or -v: smaller Euclidean disagreement with the available
/// readout components, then smaller sse (if given), then first nonzero
/// component positive.
inline std::vector<double> resolve_sign(std::span<const double> v, std::span<const std::optional<double>> readout,
                                        const SseFunction& sse = {})
{
    std::vector<double> plus(v.begin(), v.end());
    std::vector<double> minus(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        minus[i] = -v[i];

    double dp = 0.0, dm = 0.0;
    for (std::size_t i = 0; i < v.size() && i < readout.size(); ++i) {
        if (!readout[i])
            continue;
        dp += (plus[i] - *readout[i]) * (plus[i] - *readout[i]);
        dm += (minus[i] - *readout[i]) * (minus[i] - *readout[i]);
    }
    if (dp < dm)
        return plus;
    if (dm < dp)
        return minus;
    if (sse) {
        const double sp = sse(plus), sm = sse(minus);
        if (sp < sm)
            return plus;
        if (sm < sp)
            return minus;
    }
    const auto first = std::find_if(plus.begin(), plus.end(), [](double x) { return x != 0.0; });
    return (first == plus.end() || *first > 0.0) ? plus : minus;
}

inline std::vector<double> resolve_sign(std::span<const double> v, std::span<const std::optional<double>> readout,
                                        const CanonicalModel& model, const Dataset& data)
{
    const BoundProblem problem(model, data);
    return resolve_sign(v, readout, [&](std::span<const double> a) { return problem.sse(a); });
}

enum class RecoveryRoute { linear_readout, moment_factor, power_root, unidentifiable };

inline std::string_view route_name(RecoveryRoute r)
{
    switch (r) {
    case RecoveryRoute::linear_readout: return "linear-readout";
    case RecoveryRoute::moment_factor: return "moment-factor";
    case RecoveryRoute::power_root: return "power-root";
    case RecoveryRoute::unidentifiable: break;
    }
    return "unidentifiable";
}

inline constexpr std::string_view sign_convention_text =
    "linear readout fixes signs where present; otherwise the sign with smaller data sse; "
    "exact ties take the first nonzero component positive";

struct RecoveryOptions {
    bool polish = false;
    GaussNewtonOptions polish_options;
    Rank1Options rank1;
};

struct RecoveredParams {
    std::vector<double> a_hat;
    std::vector<RecoveryRoute> routes;
    std::string sign_convention;
    double consistency_residual = 0.0;  // max_j |z_j - monomial_j(a_hat)|
    double data_sse = 0.0;              // original model at a_hat

    bool moment_used = false;
    bool moment_converged = true;
    double moment_fit_residual = 0.0;

    bool polished = false;
    std::vector<double> a_unpolished;
    double sse_unpolished = 0.0;
    std::optional<FitResult> polish;

    double seconds = 0.0;  // wall time of the pipeline that produced it, if measured

    bool fully_identified() const
    {
        return std::none_of(routes.begin(), routes.end(),
                            [](RecoveryRoute r) { return r == RecoveryRoute::unidentifiable; });
    }
};

namespace detail {

/// Exponent d if the monomial is a_k^d alone, else 0.
inline unsigned pure_power_of(const ParamMonomial& m, std::size_t k)
{
    for (std::size_t i = 0; i < m.exponents.size(); ++i)
        if (i != k && m.exponents[i] != 0)
            return 0;
    return m.exponents[k];
}

} // namespace detail

inline RecoveredParams recover_parameters(std::span<const double> z, const LiftMap& map, const CanonicalModel& model,
                                          const Dataset& data, const RecoveryOptions& options = {})
{
    if (z.size() != map.column_count())
        throw ModelError("lifted vector length does not match the lift map");
    const std::size_t n = map.parameter_count();
    const BoundProblem problem(model, data);

    RecoveredParams out;
    out.sign_convention = std::string(sign_convention_text);
    out.a_hat.assign(n, 0.0);
    out.routes.assign(n, RecoveryRoute::unidentifiable);

    std::vector<std::optional<double>> readout(n);
    for (const auto& s : map.linear_slots()) {
        readout[s.param] = z[s.column];
        out.a_hat[s.param] = z[s.column];
        out.routes[s.param] = RecoveryRoute::linear_readout;
    }

    const MomentMatrix mm = build_moment_matrix(z, map);
    bool moment_needed = false;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j)
            moment_needed = moment_needed || (!readout[k] && mm.is_observed(k, j));

    if (moment_needed) {
        const Rank1Factor factor = rank1_factor(mm, options.rank1);
        out.moment_used = true;
        out.moment_converged = factor.converged;
        out.moment_fit_residual = factor.fit_residual;
        for (const auto& block : factor.blocks) {
            for (std::size_t k : block)
                if (!readout[k]) {
                    out.a_hat[k] = factor.v[k];
                    out.routes[k] = RecoveryRoute::moment_factor;
                }
        }
        for (const auto& block : factor.blocks) {
            std::vector<double> v_block;
            std::vector<std::optional<double>> readout_block;
            for (std::size_t k : block) {
                v_block.push_back(factor.v[k]);
                readout_block.push_back(readout[k]);
            }
            auto sse = [&](std::span<const double> candidate) {
                std::vector<double> a = out.a_hat;
                for (std::size_t b = 0; b < block.size(); ++b)
                    if (!readout[block[b]])
                        a[block[b]] = candidate[b];
                return detail::trial_sse(problem, a);
            };
            std::vector<double> chosen = resolve_sign(v_block, readout_block, sse);

            // Re-fit the free components with the readouts held fixed; the
            // readouts pin down any scale the observed entries leave open.
            const std::size_t k = block.size();
            Matrix sub(k, k);
            std::vector<char> obs(k * k, 0), free(k, 0);
            bool anchored = false;
            for (std::size_t b = 0; b < k; ++b) {
                free[b] = readout[block[b]] ? 0 : 1;
                anchored = anchored || !free[b];
                if (readout[block[b]])
                    chosen[b] = *readout[block[b]];
                for (std::size_t c = 0; c < k; ++c) {
                    sub(b, c) = mm.values(block[b], block[c]);
                    obs[b * k + c] = mm.is_observed(block[b], block[c]) ? 1 : 0;
                }
            }
            if (anchored) {
                std::size_t iterations = 0;
                out.moment_converged =
                    detail::refine_block(sub, obs, free, chosen, options.rank1, iterations) && out.moment_converged;
            }
            const std::vector<char> loose = detail::locally_undetermined(obs, free, chosen);
            for (std::size_t b = 0; b < k; ++b) {
                if (readout[block[b]])
                    continue;
                out.a_hat[block[b]] = chosen[b];
                if (loose[b])
                    out.routes[block[b]] = RecoveryRoute::unidentifiable;
            }
        }
    }

    for (std::size_t k = 0; k < n; ++k) {
        if (out.routes[k] != RecoveryRoute::unidentifiable)
            continue;
        // Prefer an odd power: it determines the sign.
        std::optional<std::pair<unsigned, double>> best;
        for (const auto& e : map.entries()) {
            const unsigned d = detail::pure_power_of(e.monomial, k);
            if (d < 3)
                continue;
            const bool better = !best || (d % 2 == 1 && best->first % 2 == 0) ||
                                ((d % 2) == (best->first % 2) && d < best->first);
            if (better)
                best = std::pair{d, z[e.column]};
        }
        if (!best)
            continue;
        const auto [d, value] = *best;
        out.routes[k] = RecoveryRoute::power_root;
        if (d % 2 == 1) {
            out.a_hat[k] = std::copysign(std::pow(std::fabs(value), 1.0 / d), value);
        } else {
            const double root = std::pow(std::max(value, 0.0), 1.0 / d);
            std::vector<double> a_plus = out.a_hat, a_minus = out.a_hat;
            a_plus[k] = root;
            a_minus[k] = -root;
            out.a_hat[k] = detail::trial_sse(problem, a_minus) < detail::trial_sse(problem, a_plus) ? -root : root;
        }
    }

    out.consistency_residual = consistency_residual(z, map, out.a_hat);
    out.data_sse = problem.sse(out.a_hat);
    out.a_unpolished = out.a_hat;
    out.sse_unpolished = out.data_sse;

    if (options.polish) {
        FitResult polish = gauss_newton_fit(model, data, out.a_hat, options.polish_options);
        if (polish.sse <= out.data_sse) {
            out.a_hat = polish.a_hat;
            out.data_sse = polish.sse;
        }
        out.polished = true;
        out.polish = std::move(polish);
    }
    return out;
}

inline RecoveredParams recover_parameters(const LiftedSolution& solution, const LiftMap& map,
                                          const CanonicalModel& model, const Dataset& data,
                                          const RecoveryOptions& options = {})
{
    return recover_parameters(solution.z, map, model, data, options);
}

} // namespace liftfit

#endif // LIFTFIT_RECOVERY_HPP
