#ifndef LIFTFIT_TESTS_SUPPORT_HPP
#define LIFTFIT_TESTS_SUPPORT_HPP

// Shared test helpers: random model text, random points, finite differences.

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "liftfit/model.hpp"

namespace liftfit::fixtures {

inline const std::vector<std::string> all_params = {"a1", "a2", "a3", "a4"};
inline const std::vector<std::string> all_data = {"x1", "x2", "x3"};

inline std::vector<std::string> param_names(std::size_t n)
{
    return {all_params.begin(), all_params.begin() + static_cast<std::ptrdiff_t>(n)};
}

struct RandomModel {
    std::string text;
    std::vector<std::string> params;
};

/// Random sum of up to `max_terms` terms; each term has a coefficient in
/// [-2, 2], a parameter monomial of total degree <= max_degree, a data
/// monomial of degree <= 3 and sometimes a sin/cos/exp factor.
inline RandomModel random_model(std::mt19937_64& rng, std::size_t n, unsigned max_degree = 4,
                                std::size_t max_terms = 10, bool functions = true)
{
    std::uniform_int_distribution<std::size_t> term_count(1, max_terms);
    std::uniform_int_distribution<unsigned> degree(0, max_degree);
    std::uniform_int_distribution<std::size_t> param(0, n - 1);
    std::uniform_int_distribution<unsigned> data_degree(0, 3);
    std::uniform_int_distribution<std::size_t> var(0, all_data.size() - 1);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    std::uniform_int_distribution<int> fn(0, 5);

    RandomModel m;
    m.params = param_names(n);
    const std::size_t terms = term_count(rng);
    for (std::size_t t = 0; t < terms; ++t) {
        const double c = std::round(coef(rng) * 1000.0) / 1000.0;
        std::string term = format_number(t ? std::fabs(c) : c);
        const unsigned d = degree(rng);
        for (unsigned k = 0; k < d; ++k)
            term += "*" + m.params[param(rng)];
        const unsigned dd = data_degree(rng);
        for (unsigned k = 0; k < dd; ++k)
            term += "*" + all_data[var(rng)];
        if (functions) {
            switch (fn(rng)) {
            case 0: term += "*sin(" + all_data[var(rng)] + ")"; break;
            case 1: term += "*cos(" + all_data[var(rng)] + " + 1)"; break;
            case 2: term += "*exp(0.5*" + all_data[var(rng)] + ")"; break;
            default: break;
            }
        }
        m.text += (t ? (c < 0 ? " - " : " + ") : "") + term;
    }
    return m;
}

inline CanonicalModel parse_random(const RandomModel& m)
{
    ParseOptions opts;
    opts.data_var_names = all_data;
    return parse_model(m.text, m.params, opts);
}

inline std::vector<double> uniform_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v)
        x = u(rng);
    return v;
}

/// Central difference of f along coordinate k.
template <class F>
double central_difference(F&& f, std::vector<double> a, std::size_t k, double h = 1e-6)
{
    const double a0 = a[k];
    a[k] = a0 + h;
    const double up = f(a);
    a[k] = a0 - h;
    const double down = f(a);
    return (up - down) / (2.0 * h);
}

} // namespace liftfit::fixtures

#endif // LIFTFIT_TESTS_SUPPORT_HPP
