#ifndef LIFTFIT_MODEL_HPP
#define LIFTFIT_MODEL_HPP

// Canonical sum-of-terms models: parsing, evaluation, parameter derivatives,
// and printing.
//
// A model is a sum of terms, each the product of a real coefficient, a
// monomial in the declared parameters, and a parameter-free data feature.
// Terms whose monomial has degree zero are known offsets.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <utility>
#include <vector>

#include "liftfit/error.hpp"

namespace liftfit {

enum class UnaryFunction { identity, sin, cos, exp, log };

inline std::string_view function_name(UnaryFunction f)
{
    switch (f) {
    case UnaryFunction::sin: return "sin";
    case UnaryFunction::cos: return "cos";
    case UnaryFunction::exp: return "exp";
    case UnaryFunction::log: return "log";
    case UnaryFunction::identity: break;
    }
    return "identity";
}

struct FeaturePolynomial;

/// x_var^power, power >= 1.
struct VarPower {
    std::size_t var = 0;
    unsigned power = 0;

    bool operator==(const VarPower&) const = default;
};

/// fn(argument)^power where the argument is parameter-free.
struct FunctionFactor {
    UnaryFunction function = UnaryFunction::identity;
    std::shared_ptr<const FeaturePolynomial> argument;
    unsigned power = 1;
};

/// Product of data-variable powers and function factors. Empty means the
/// constant feature 1.
struct DataFeature {
    std::vector<VarPower> vars;             // sorted by var index
    std::vector<FunctionFactor> functions;  // sorted canonically

    bool is_constant() const { return vars.empty() && functions.empty(); }
};

struct FeatureTerm {
    double coefficient = 0.0;
    DataFeature feature;
};

/// Parameter-free linear combination of data features.
struct FeaturePolynomial {
    std::vector<FeatureTerm> terms;
};

/// Exponents of each declared parameter, in declaration order.
struct ParamMonomial {
    std::vector<unsigned> exponents;

    unsigned degree() const
    {
        unsigned d = 0;
        for (unsigned e : exponents)
            d += e;
        return d;
    }

    bool operator==(const ParamMonomial&) const = default;
};

struct Term {
    double coefficient = 0.0;
    ParamMonomial monomial;
    DataFeature feature;
};

struct CanonicalModel {
    std::vector<std::string> param_names;
    std::vector<std::string> data_var_names;
    std::vector<Term> terms;         // monomial degree >= 1
    std::vector<Term> offset_terms;  // monomial degree 0

    std::size_t parameter_count() const { return param_names.size(); }
    std::size_t data_count() const { return data_var_names.size(); }
    bool empty() const { return terms.empty() && offset_terms.empty(); }
};

struct ParseOptions {
    /// Largest exponent any single parameter may carry after expansion.
    unsigned max_param_exponent = 4;
    /// Data variables to register even when the text does not mention them.
    std::vector<std::string> data_var_names;
};

// ---------------------------------------------------------------------------
// Ordering. All comparisons return <0 when the left operand prints first.

namespace detail {

inline int compare_desc(unsigned a, unsigned b) { return a == b ? 0 : (a > b ? -1 : 1); }

inline int compare_values(double a, double b) { return a == b ? 0 : (a < b ? -1 : 1); }

} // namespace detail

/// Lexicographic on exponents, larger exponents first.
inline int compare(const ParamMonomial& a, const ParamMonomial& b)
{
    const std::size_t n = std::max(a.exponents.size(), b.exponents.size());
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned ea = i < a.exponents.size() ? a.exponents[i] : 0;
        const unsigned eb = i < b.exponents.size() ? b.exponents[i] : 0;
        if (int c = detail::compare_desc(ea, eb))
            return c;
    }
    return 0;
}

int compare(const FeaturePolynomial& a, const FeaturePolynomial& b);

/// Identity of a function factor ignoring its power.
inline int compare_base(const FunctionFactor& a, const FunctionFactor& b)
{
    if (a.function != b.function)
        return a.function < b.function ? -1 : 1;
    return compare(*a.argument, *b.argument);
}

inline int compare(const FunctionFactor& a, const FunctionFactor& b)
{
    if (int c = compare_base(a, b))
        return c;
    return detail::compare_desc(a.power, b.power);
}

/// Dense exponent vectors compared lexicographically (larger first), then
/// function factors; longer factor lists print first.
inline int compare(const DataFeature& a, const DataFeature& b)
{
    std::size_t i = 0, j = 0;
    while (i < a.vars.size() || j < b.vars.size()) {
        if (j == b.vars.size())
            return -1;
        if (i == a.vars.size())
            return 1;
        if (a.vars[i].var != b.vars[j].var)
            return a.vars[i].var < b.vars[j].var ? -1 : 1;
        if (int c = detail::compare_desc(a.vars[i].power, b.vars[j].power))
            return c;
        ++i;
        ++j;
    }
    const std::size_t n = std::min(a.functions.size(), b.functions.size());
    for (std::size_t k = 0; k < n; ++k)
        if (int c = compare(a.functions[k], b.functions[k]))
            return c;
    if (a.functions.size() != b.functions.size())
        return a.functions.size() > b.functions.size() ? -1 : 1;
    return 0;
}

inline int compare(const FeaturePolynomial& a, const FeaturePolynomial& b)
{
    const std::size_t n = std::min(a.terms.size(), b.terms.size());
    for (std::size_t k = 0; k < n; ++k) {
        if (int c = compare(a.terms[k].feature, b.terms[k].feature))
            return c;
        if (int c = detail::compare_values(a.terms[k].coefficient, b.terms[k].coefficient))
            return c;
    }
    if (a.terms.size() != b.terms.size())
        return a.terms.size() < b.terms.size() ? -1 : 1;
    return 0;
}

inline bool operator==(const DataFeature& a, const DataFeature& b) { return compare(a, b) == 0; }

inline bool operator==(const FeaturePolynomial& a, const FeaturePolynomial& b)
{
    return compare(a, b) == 0;
}

inline bool operator==(const Term& a, const Term& b)
{
    return a.coefficient == b.coefficient && a.monomial == b.monomial && a.feature == b.feature;
}

/// Same names and identical term lists with exact coefficients.
inline bool identical(const CanonicalModel& a, const CanonicalModel& b)
{
    return a.param_names == b.param_names && a.data_var_names == b.data_var_names &&
           a.terms == b.terms && a.offset_terms == b.offset_terms;
}

// ---------------------------------------------------------------------------
// Canonicalization and algebra on features.

inline void canonicalize(FeaturePolynomial& p)
{
    std::stable_sort(p.terms.begin(), p.terms.end(), [](const FeatureTerm& a, const FeatureTerm& b) {
        return compare(a.feature, b.feature) < 0;
    });
    std::vector<FeatureTerm> merged;
    merged.reserve(p.terms.size());
    for (auto& t : p.terms) {
        if (!merged.empty() && merged.back().feature == t.feature)
            merged.back().coefficient += t.coefficient;
        else
            merged.push_back(std::move(t));
    }
    std::erase_if(merged, [](const FeatureTerm& t) { return t.coefficient == 0.0; });
    p.terms = std::move(merged);
}

inline DataFeature multiply(const DataFeature& a, const DataFeature& b)
{
    DataFeature out;
    std::size_t i = 0, j = 0;
    while (i < a.vars.size() || j < b.vars.size()) {
        if (j == b.vars.size() || (i < a.vars.size() && a.vars[i].var < b.vars[j].var)) {
            out.vars.push_back(a.vars[i++]);
        } else if (i == a.vars.size() || b.vars[j].var < a.vars[i].var) {
            out.vars.push_back(b.vars[j++]);
        } else {
            out.vars.push_back({a.vars[i].var, a.vars[i].power + b.vars[j].power});
            ++i;
            ++j;
        }
    }
    out.functions = a.functions;
    for (const auto& f : b.functions) {
        auto same = std::find_if(out.functions.begin(), out.functions.end(),
                                 [&](const FunctionFactor& g) { return compare_base(f, g) == 0; });
        if (same != out.functions.end())
            same->power += f.power;
        else
            out.functions.push_back(f);
    }
    std::sort(out.functions.begin(), out.functions.end(),
              [](const FunctionFactor& x, const FunctionFactor& y) { return compare(x, y) < 0; });
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation.

namespace detail {

inline double ipow(double x, unsigned e)
{
    double r = 1.0;
    for (unsigned k = 0; k < e; ++k)
        r *= x;
    return r;
}

inline double apply_function(UnaryFunction f, double v)
{
    switch (f) {
    case UnaryFunction::sin: return std::sin(v);
    case UnaryFunction::cos: return std::cos(v);
    case UnaryFunction::exp: return std::exp(v);
    case UnaryFunction::log:
        if (!(v > 0.0))
            throw DomainError("log of non-positive value " + std::to_string(v));
        return std::log(v);
    case UnaryFunction::identity: break;
    }
    return v;
}

} // namespace detail

/// Product of a_i^e_i, multiplied out in parameter order. embed() and the
/// consistency checks use this same routine so that products agree bitwise.
inline double monomial_value(const ParamMonomial& m, std::span<const double> params)
{
    double r = 1.0;
    for (std::size_t i = 0; i < m.exponents.size(); ++i)
        for (unsigned k = 0; k < m.exponents[i]; ++k)
            r *= params[i];
    return r;
}

double evaluate(const FeaturePolynomial& p, std::span<const double> point);

inline double evaluate(const DataFeature& f, std::span<const double> point)
{
    double r = 1.0;
    for (const auto& vp : f.vars)
        r *= detail::ipow(point[vp.var], vp.power);
    for (const auto& fn : f.functions)
        r *= detail::ipow(detail::apply_function(fn.function, evaluate(*fn.argument, point)), fn.power);
    return r;
}

inline double evaluate(const FeaturePolynomial& p, std::span<const double> point)
{
    double s = 0.0;
    for (const auto& t : p.terms)
        s += t.coefficient * evaluate(t.feature, point);
    return s;
}

/// f(params; point), summed in canonical term order followed by offsets.
inline double evaluate(const CanonicalModel& model, std::span<const double> params,
                       std::span<const double> point)
{
    if (params.size() != model.parameter_count())
        throw ModelError("expected " + std::to_string(model.parameter_count()) + " parameter values, got " +
                         std::to_string(params.size()));
    if (point.size() != model.data_count())
        throw ModelError("expected " + std::to_string(model.data_count()) + " data values, got " +
                         std::to_string(point.size()));
    double s = 0.0;
    for (const auto& t : model.terms)
        s += t.coefficient * monomial_value(t.monomial, params) * evaluate(t.feature, point);
    for (const auto& t : model.offset_terms)
        s += t.coefficient * evaluate(t.feature, point);
    if (!std::isfinite(s))
        throw DomainError("evaluation overflow: model value is not finite");
    return s;
}

// ---------------------------------------------------------------------------
// Printing.

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v)
{
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    return std::string(buf.data(), end);
}

namespace detail {

inline void append_term(std::string& out, double coefficient, const std::vector<std::string>& factors)
{
    const bool negative = coefficient < 0.0;
    const double magnitude = std::fabs(coefficient);
    if (out.empty())
        out += negative ? "-" : "";
    else
        out += negative ? " - " : " + ";
    bool need_star = false;
    if (magnitude != 1.0 || factors.empty()) {
        out += format_number(magnitude);
        need_star = true;
    }
    for (const auto& f : factors) {
        if (need_star)
            out += '*';
        out += f;
        need_star = true;
    }
}

inline std::string power_suffix(unsigned p) { return p == 1 ? std::string() : "^" + std::to_string(p); }

} // namespace detail

std::string to_string(const FeaturePolynomial& p, const std::vector<std::string>& data_names);

inline std::vector<std::string> factor_strings(const DataFeature& f, const std::vector<std::string>& data_names)
{
    std::vector<std::string> out;
    for (const auto& vp : f.vars)
        out.push_back(data_names.at(vp.var) + detail::power_suffix(vp.power));
    for (const auto& fn : f.functions)
        out.push_back(std::string(function_name(fn.function)) + "(" + to_string(*fn.argument, data_names) + ")" +
                      detail::power_suffix(fn.power));
    return out;
}

inline std::vector<std::string> factor_strings(const ParamMonomial& m, const std::vector<std::string>& param_names)
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < m.exponents.size(); ++i)
        if (m.exponents[i] > 0)
            out.push_back(param_names.at(i) + detail::power_suffix(m.exponents[i]));
    return out;
}

inline std::string to_string(const DataFeature& f, const std::vector<std::string>& data_names)
{
    std::string out;
    for (const auto& s : factor_strings(f, data_names)) {
        if (!out.empty())
            out += '*';
        out += s;
    }
    return out.empty() ? "1" : out;
}

inline std::string to_string(const ParamMonomial& m, const std::vector<std::string>& param_names)
{
    std::string out;
    for (const auto& s : factor_strings(m, param_names)) {
        if (!out.empty())
            out += '*';
        out += s;
    }
    return out.empty() ? "1" : out;
}

inline std::string to_string(const FeaturePolynomial& p, const std::vector<std::string>& data_names)
{
    std::string out;
    for (const auto& t : p.terms)
        detail::append_term(out, t.coefficient, factor_strings(t.feature, data_names));
    return out.empty() ? "0" : out;
}

/// Deterministic text in the model grammar; parses back to identical terms.
inline std::string print_canonical(const CanonicalModel& model)
{
    std::string out;
    auto emit = [&](const Term& t) {
        auto factors = factor_strings(t.monomial, model.param_names);
        auto data = factor_strings(t.feature, model.data_var_names);
        factors.insert(factors.end(), data.begin(), data.end());
        detail::append_term(out, t.coefficient, factors);
    };
    for (const auto& t : model.terms)
        emit(t);
    for (const auto& t : model.offset_terms)
        emit(t);
    return out.empty() ? "0" : out;
}

// ---------------------------------------------------------------------------
// Parsing.

namespace detail {

/// Natural order: alphabetic prefix, then trailing integer, so x2 < x10.
inline bool natural_less(const std::string& a, const std::string& b)
{
    auto split = [](const std::string& s) {
        std::size_t k = s.size();
        while (k > 0 && s[k - 1] >= '0' && s[k - 1] <= '9')
            --k;
        return std::pair<std::string_view, std::string_view>(std::string_view(s).substr(0, k),
                                                             std::string_view(s).substr(k));
    };
    auto [pa, na] = split(a);
    auto [pb, nb] = split(b);
    if (pa != pb)
        return pa < pb;
    auto strip = [](std::string_view d) {
        while (d.size() > 1 && d.front() == '0')
            d.remove_prefix(1);
        return d;
    };
    const auto da = strip(na), db = strip(nb);
    if (da.size() != db.size())
        return da.size() < db.size();
    if (da != db)
        return da < db;
    return a < b;
}

inline bool is_reserved(std::string_view id)
{
    return id == "sin" || id == "cos" || id == "exp" || id == "log";
}

inline bool is_identifier(std::string_view id)
{
    if (id.empty())
        return false;
    auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
    if (!alpha(id[0]))
        return false;
    return std::all_of(id.begin() + 1, id.end(), [&](char c) { return alpha(c) || (c >= '0' && c <= '9'); });
}

using Polynomial = std::vector<Term>;

inline void canonicalize(Polynomial& p)
{
    std::stable_sort(p.begin(), p.end(), [](const Term& a, const Term& b) {
        if (int c = compare(a.monomial, b.monomial))
            return c < 0;
        return compare(a.feature, b.feature) < 0;
    });
    Polynomial merged;
    merged.reserve(p.size());
    for (auto& t : p) {
        if (!merged.empty() && merged.back().monomial == t.monomial && merged.back().feature == t.feature)
            merged.back().coefficient += t.coefficient;
        else
            merged.push_back(std::move(t));
    }
    std::erase_if(merged, [](const Term& t) { return t.coefficient == 0.0; });
    p = std::move(merged);
}

inline constexpr std::size_t max_expansion_terms = 100000;
inline constexpr unsigned max_power_exponent = 64;

inline Polynomial multiply(const Polynomial& a, const Polynomial& b)
{
    if (a.size() * b.size() > max_expansion_terms)
        throw ModelError("expansion exceeds " + std::to_string(max_expansion_terms) + " terms");
    Polynomial out;
    out.reserve(a.size() * b.size());
    for (const auto& ta : a) {
        for (const auto& tb : b) {
            Term t;
            t.coefficient = ta.coefficient * tb.coefficient;
            t.monomial.exponents.resize(ta.monomial.exponents.size());
            for (std::size_t i = 0; i < t.monomial.exponents.size(); ++i)
                t.monomial.exponents[i] = ta.monomial.exponents[i] + tb.monomial.exponents[i];
            t.feature = liftfit::multiply(ta.feature, tb.feature);
            out.push_back(std::move(t));
        }
    }
    canonicalize(out);
    return out;
}

DataFeature remap(const DataFeature& f, const std::vector<std::size_t>& new_index);

inline FeaturePolynomial remap(const FeaturePolynomial& p, const std::vector<std::size_t>& new_index)
{
    FeaturePolynomial out;
    for (const auto& t : p.terms)
        out.terms.push_back({t.coefficient, remap(t.feature, new_index)});
    liftfit::canonicalize(out);
    return out;
}

inline DataFeature remap(const DataFeature& f, const std::vector<std::size_t>& new_index)
{
    DataFeature out;
    for (const auto& vp : f.vars)
        out.vars.push_back({new_index[vp.var], vp.power});
    std::sort(out.vars.begin(), out.vars.end(), [](const VarPower& a, const VarPower& b) { return a.var < b.var; });
    for (const auto& fn : f.functions)
        out.functions.push_back(
            {fn.function, std::make_shared<const FeaturePolynomial>(remap(*fn.argument, new_index)), fn.power});
    std::sort(out.functions.begin(), out.functions.end(),
              [](const FunctionFactor& x, const FunctionFactor& y) { return compare(x, y) < 0; });
    return out;
}

class Parser {
public:
    Parser(std::string_view text, const std::vector<std::string>& params, const ParseOptions& options)
        : text_(text), params_(params), options_(options)
    {
        for (std::size_t i = 0; i < params_.size(); ++i)
            param_index_.emplace(params_[i], i);
        for (const auto& name : options_.data_var_names)
            data_index(name);
    }

    Polynomial parse()
    {
        Polynomial p = expression();
        skip_space();
        if (pos_ != text_.size())
            fail("expected '+', '-', '*' or end of input");
        return p;
    }

    const std::vector<std::string>& data_names() const { return data_names_; }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(pos_, msg); }

    void skip_space()
    {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
                                       text_[pos_] == '\r'))
            ++pos_;
    }

    char peek()
    {
        skip_space();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    std::size_t data_index(const std::string& name)
    {
        auto [it, inserted] = data_map_.emplace(name, data_names_.size());
        if (inserted)
            data_names_.push_back(name);
        return it->second;
    }

    Polynomial constant(double c) const
    {
        Term t;
        t.coefficient = c;
        t.monomial.exponents.assign(params_.size(), 0);
        Polynomial p;
        if (c != 0.0)
            p.push_back(std::move(t));
        return p;
    }

    static void negate(Polynomial& p)
    {
        for (auto& t : p)
            t.coefficient = -t.coefficient;
    }

    static void add(Polynomial& into, Polynomial&& other)
    {
        for (auto& t : other)
            into.push_back(std::move(t));
        canonicalize(into);
    }

    Polynomial expression()
    {
        bool negative = false;
        if (char c = peek(); c == '+' || c == '-') {
            negative = c == '-';
            ++pos_;
        }
        Polynomial acc = term();
        if (negative)
            negate(acc);
        for (;;) {
            const char c = peek();
            if (c != '+' && c != '-')
                break;
            ++pos_;
            Polynomial rhs = term();
            if (c == '-')
                negate(rhs);
            add(acc, std::move(rhs));
        }
        return acc;
    }

    Polynomial term()
    {
        Polynomial acc = factor();
        while (peek() == '*') {
            ++pos_;
            acc = multiply(acc, factor());
        }
        return acc;
    }

    Polynomial factor()
    {
        Polynomial base = atom();
        if (peek() != '^')
            return base;
        ++pos_;
        skip_space();
        const std::size_t start = pos_;
        if (pos_ < text_.size() && text_[pos_] == '-')
            fail("exponent must be a non-negative integer");
        if (pos_ >= text_.size() || !(std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
            fail("expected integer exponent after '^'");
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E'))
            fail("non-integer exponent");
        unsigned e = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, e);
        if (ec != std::errc() || e > max_power_exponent) {
            pos_ = start;
            fail("exponent exceeds " + std::to_string(max_power_exponent));
        }
        Polynomial result = constant(1.0);
        for (unsigned k = 0; k < e; ++k)
            result = multiply(result, base);
        return result;
    }

    Polynomial number()
    {
        const std::size_t start = pos_;
        auto digit = [&](std::size_t i) {
            return i < text_.size() && std::isdigit(static_cast<unsigned char>(text_[i]));
        };
        std::size_t mantissa_digits = 0;
        while (digit(pos_)) {
            ++pos_;
            ++mantissa_digits;
        }
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (digit(pos_)) {
                ++pos_;
                ++mantissa_digits;
            }
        }
        if (mantissa_digits == 0) {
            pos_ = start;
            fail("malformed number");
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t k = pos_ + 1;
            if (k < text_.size() && (text_[k] == '+' || text_[k] == '-'))
                ++k;
            if (!digit(k)) {
                pos_ = k;
                fail("expected digits in number exponent");
            }
            while (digit(k))
                ++k;
            pos_ = k;
        }
        std::string literal(text_.substr(start, pos_ - start));
        if (literal.front() == '.')
            literal.insert(literal.begin(), '0');
        if (literal.back() == '.')
            literal.push_back('0');
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(literal.data(), literal.data() + literal.size(), value);
        if (ec != std::errc() || ptr != literal.data() + literal.size() || !std::isfinite(value)) {
            pos_ = start;
            fail("numeric literal out of range");
        }
        return constant(value);
    }

    std::string identifier()
    {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }

    Polynomial function_call(UnaryFunction fn, std::size_t at)
    {
        if (peek() != '(')
            fail("expected '(' after function name");
        ++pos_;
        Polynomial arg = expression();
        if (peek() != ')')
            fail("expected ')'");
        ++pos_;
        FeaturePolynomial feature_arg;
        for (const auto& t : arg) {
            if (t.monomial.degree() != 0) {
                std::size_t k = 0;
                while (t.monomial.exponents[k] == 0)
                    ++k;
                throw ParseError(at, "parameter '" + params_[k] + "' inside " + std::string(function_name(fn)) +
                                         "(...) cannot be lifted");
            }
            feature_arg.terms.push_back({t.coefficient, t.feature});
        }
        liftfit::canonicalize(feature_arg);
        if (feature_arg.terms.empty() ||
            (feature_arg.terms.size() == 1 && feature_arg.terms[0].feature.is_constant())) {
            const double c = feature_arg.terms.empty() ? 0.0 : feature_arg.terms[0].coefficient;
            double v = 0.0;
            try {
                v = apply_function(fn, c);
            } catch (const DomainError& e) {
                throw ParseError(at, e.what());
            }
            if (!std::isfinite(v))
                throw ParseError(at, "constant function value is not finite");
            return constant(v);
        }
        Term t;
        t.coefficient = 1.0;
        t.monomial.exponents.assign(params_.size(), 0);
        t.feature.functions.push_back({fn, std::make_shared<const FeaturePolynomial>(std::move(feature_arg)), 1});
        return Polynomial{std::move(t)};
    }

    Polynomial atom()
    {
        const char c = peek();
        const std::size_t at = pos_;
        if (c == '(') {
            ++pos_;
            Polynomial inner = expression();
            if (peek() != ')')
                fail("expected ')'");
            ++pos_;
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::string id = identifier();
            if (id == "sin")
                return function_call(UnaryFunction::sin, at);
            if (id == "cos")
                return function_call(UnaryFunction::cos, at);
            if (id == "exp")
                return function_call(UnaryFunction::exp, at);
            if (id == "log")
                return function_call(UnaryFunction::log, at);
            Term t;
            t.coefficient = 1.0;
            t.monomial.exponents.assign(params_.size(), 0);
            if (auto it = param_index_.find(id); it != param_index_.end())
                t.monomial.exponents[it->second] = 1;
            else
                t.feature.vars.push_back({data_index(id), 1});
            return Polynomial{std::move(t)};
        }
        if (c == '\0')
            fail("unexpected end of input, expected number, identifier or '('");
        fail(std::string("unexpected character '") + c + "', expected number, identifier or '('");
    }

    std::string_view text_;
    const std::vector<std::string>& params_;
    const ParseOptions& options_;
    std::unordered_map<std::string, std::size_t> param_index_;
    std::unordered_map<std::string, std::size_t> data_map_;
    std::vector<std::string> data_names_;
    std::size_t pos_ = 0;
};

} // namespace detail

/// Parses `text` into canonical form. Identifiers not listed in
/// `param_names` become data variables, ordered naturally (x2 before x10).
inline CanonicalModel parse_model(std::string_view text, const std::vector<std::string>& param_names,
                                  const ParseOptions& options = {})
{
    if (param_names.empty())
        throw ModelError("at least one parameter name is required");
    for (std::size_t i = 0; i < param_names.size(); ++i) {
        if (!detail::is_identifier(param_names[i]))
            throw ModelError("invalid parameter name '" + param_names[i] + "'");
        if (detail::is_reserved(param_names[i]))
            throw ModelError("parameter name '" + param_names[i] + "' is a reserved function name");
        for (std::size_t j = 0; j < i; ++j)
            if (param_names[j] == param_names[i])
                throw ModelError("duplicate parameter name '" + param_names[i] + "'");
    }
    for (const auto& d : options.data_var_names) {
        if (!detail::is_identifier(d) || detail::is_reserved(d))
            throw ModelError("invalid data variable name '" + d + "'");
        if (std::find(param_names.begin(), param_names.end(), d) != param_names.end())
            throw ModelError("'" + d + "' declared as both parameter and data variable");
    }

    detail::Parser parser(text, param_names, options);
    detail::Polynomial poly = parser.parse();

    // Renumber data variables into natural name order.
    std::vector<std::string> names = parser.data_names();
    std::vector<std::string> sorted = names;
    std::sort(sorted.begin(), sorted.end(), detail::natural_less);
    std::vector<std::size_t> new_index(names.size());
    for (std::size_t i = 0; i < names.size(); ++i)
        new_index[i] = static_cast<std::size_t>(std::find(sorted.begin(), sorted.end(), names[i]) - sorted.begin());
    for (auto& t : poly)
        t.feature = detail::remap(t.feature, new_index);
    detail::canonicalize(poly);

    CanonicalModel model;
    model.param_names = param_names;
    model.data_var_names = std::move(sorted);
    for (auto& t : poly) {
        if (!std::isfinite(t.coefficient))
            throw ModelError("coefficient overflow during expansion");
        for (std::size_t i = 0; i < t.monomial.exponents.size(); ++i)
            if (t.monomial.exponents[i] > options.max_param_exponent)
                throw ModelError("exponent " + std::to_string(t.monomial.exponents[i]) + " on parameter '" +
                                 param_names[i] + "' exceeds cap " + std::to_string(options.max_param_exponent));
        if (t.monomial.degree() == 0)
            model.offset_terms.push_back(std::move(t));
        else
            model.terms.push_back(std::move(t));
    }
    return model;
}

/// Partial derivative with respect to parameter `k` (power rule on exponents).
inline CanonicalModel differentiate_param(const CanonicalModel& model, std::size_t k)
{
    if (k >= model.parameter_count())
        throw ModelError("parameter index " + std::to_string(k) + " out of range");
    CanonicalModel out;
    out.param_names = model.param_names;
    out.data_var_names = model.data_var_names;
    detail::Polynomial poly;
    for (const auto& t : model.terms) {
        const unsigned e = t.monomial.exponents[k];
        if (e == 0)
            continue;
        Term d = t;
        d.coefficient *= static_cast<double>(e);
        d.monomial.exponents[k] = e - 1;
        poly.push_back(std::move(d));
    }
    detail::canonicalize(poly);
    for (auto& t : poly) {
        if (t.monomial.degree() == 0)
            out.offset_terms.push_back(std::move(t));
        else
            out.terms.push_back(std::move(t));
    }
    return out;
}

} // namespace liftfit

#endif // LIFTFIT_MODEL_HPP
