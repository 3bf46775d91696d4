#ifndef LIFTFIT_LIFTING_HPP
#define LIFTFIT_LIFTING_HPP

// Generalized linearization of a model that is polynomial in its parameters.
//
// Every distinct parameter monomial of degree >= 2 becomes an independent
// lifted unknown (a1^2 -> b1, a1*a2 -> b2, ...). Parameters that occur at
// degree 1 keep a direct linear slot. The resulting model is linear in the
// column unknowns z = (b_1..b_m, a_k...), so it can be fitted by ordinary
// linear least squares.
//
// Column order: lifted entries first (monomials in descending lexicographic
// exponent order), then linear slots in parameter declaration order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "liftfit/error.hpp"
#include "liftfit/model.hpp"

namespace liftfit {

struct ParamMonomials {
    std::vector<ParamMonomial> linear;     // degree 1, declaration order
    std::vector<ParamMonomial> nonlinear;  // degree >= 2, lexicographic
};

/// Distinct parameter monomials of the model split by degree.
inline ParamMonomials extract_param_monomials(const CanonicalModel& model)
{
    ParamMonomials out;
    for (const auto& t : model.terms) {
        auto& bucket = t.monomial.degree() == 1 ? out.linear : out.nonlinear;
        if (std::find(bucket.begin(), bucket.end(), t.monomial) == bucket.end())
            bucket.push_back(t.monomial);
    }
    // Descending lexicographic order puts a1 before a2 for degree-1 monomials.
    auto by_order = [](const ParamMonomial& a, const ParamMonomial& b) { return compare(a, b) < 0; };
    std::sort(out.linear.begin(), out.linear.end(), by_order);
    std::sort(out.nonlinear.begin(), out.nonlinear.end(), by_order);
    return out;
}

struct LiftEntry {
    ParamMonomial monomial;
    std::size_t column = 0;
};

struct LinearSlot {
    std::size_t param = 0;
    std::size_t column = 0;
};

class LiftMap {
public:
    LiftMap() = default;
    LiftMap(std::size_t n, std::vector<LiftEntry> entries, std::vector<LinearSlot> slots)
        : n_(n), entries_(std::move(entries)), slots_(std::move(slots))
    {
    }

    std::size_t parameter_count() const { return n_; }
    const std::vector<LiftEntry>& entries() const { return entries_; }
    const std::vector<LinearSlot>& linear_slots() const { return slots_; }
    std::size_t column_count() const { return entries_.size() + slots_.size(); }

    /// Column holding the given monomial, or column_count() if absent.
    std::size_t column_of(const ParamMonomial& m) const
    {
        if (m.degree() == 1) {
            const auto k = static_cast<std::size_t>(
                std::find(m.exponents.begin(), m.exponents.end(), 1u) - m.exponents.begin());
            if (auto slot = linear_slot_of(k))
                return *slot;
            return column_count();
        }
        for (const auto& e : entries_)
            if (e.monomial == m)
                return e.column;
        return column_count();
    }

    /// Column of parameter k's linear slot, if it has one.
    std::optional<std::size_t> linear_slot_of(std::size_t param) const
    {
        for (const auto& s : slots_)
            if (s.param == param)
                return s.column;
        return std::nullopt;
    }

    /// Human-readable monomial per column, e.g. "a1^2", "a1*a2", "a1".
    std::vector<std::string> column_labels(const std::vector<std::string>& param_names) const
    {
        std::vector<std::string> labels(column_count());
        for (const auto& e : entries_)
            labels[e.column] = to_string(e.monomial, param_names);
        for (const auto& s : slots_)
            labels[s.column] = param_names.at(s.param);
        return labels;
    }

    bool operator==(const LiftMap& o) const
    {
        if (n_ != o.n_ || slots_.size() != o.slots_.size() || entries_.size() != o.entries_.size())
            return false;
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (!(entries_[i].monomial == o.entries_[i].monomial) || entries_[i].column != o.entries_[i].column)
                return false;
        for (std::size_t i = 0; i < slots_.size(); ++i)
            if (slots_[i].param != o.slots_[i].param || slots_[i].column != o.slots_[i].column)
                return false;
        return true;
    }

private:
    std::size_t n_ = 0;
    std::vector<LiftEntry> entries_;
    std::vector<LinearSlot> slots_;
};

inline LiftMap build_lift_map(const CanonicalModel& model)
{
    ParamMonomials monos = extract_param_monomials(model);
    std::vector<LiftEntry> entries;
    std::size_t column = 0;
    for (auto& m : monos.nonlinear)
        entries.push_back({std::move(m), column++});
    std::vector<LinearSlot> slots;
    for (const auto& m : monos.linear) {
        const auto k =
            static_cast<std::size_t>(std::find(m.exponents.begin(), m.exponents.end(), 1u) - m.exponents.begin());
        slots.push_back({k, column++});
    }
    return LiftMap(model.parameter_count(), std::move(entries), std::move(slots));
}

/// Number of distinct degree-2 monomials in n parameters: n(n+1)/2.
inline std::size_t lifted_dimension_bound(std::size_t n)
{
    if (n == 0)
        throw ModelError("dimension bound needs at least one parameter");
    return n * (n + 1) / 2;
}

enum class ColumnKind { lifted_monomial, linear_parameter };

struct LiftedColumn {
    ColumnKind kind = ColumnKind::lifted_monomial;
    std::size_t source = 0;  // lift entry index or parameter index
    FeaturePolynomial feature;
};

struct LiftedModel {
    CanonicalModel base;
    LiftMap map;
    std::vector<LiftedColumn> columns;
    FeaturePolynomial offset;
};

inline LiftedModel lift_model(const CanonicalModel& model, const LiftMap& map)
{
    if (map.parameter_count() != model.parameter_count())
        throw ModelError("lift map was built for a different parameter count");
    LiftedModel out;
    out.base = model;
    out.map = map;
    out.columns.resize(map.column_count());
    for (std::size_t i = 0; i < map.entries().size(); ++i) {
        const auto& e = map.entries()[i];
        out.columns[e.column].kind = ColumnKind::lifted_monomial;
        out.columns[e.column].source = i;
    }
    for (const auto& s : map.linear_slots()) {
        out.columns[s.column].kind = ColumnKind::linear_parameter;
        out.columns[s.column].source = s.param;
    }
    for (const auto& t : model.terms) {
        const std::size_t c = map.column_of(t.monomial);
        if (c == map.column_count())
            throw ModelError("monomial " + to_string(t.monomial, model.param_names) + " missing from lift map");
        out.columns[c].feature.terms.push_back({t.coefficient, t.feature});
    }
    for (auto& col : out.columns)
        canonicalize(col.feature);
    for (const auto& t : model.offset_terms)
        out.offset.terms.push_back({t.coefficient, t.feature});
    canonicalize(out.offset);
    return out;
}

/// Sum over columns of z_j * feature_j(point), plus the offset.
inline double evaluate_lifted(const LiftedModel& lifted, std::span<const double> z, std::span<const double> point)
{
    if (z.size() != lifted.columns.size())
        throw ModelError("lifted vector has " + std::to_string(z.size()) + " entries, expected " +
                         std::to_string(lifted.columns.size()));
    if (point.size() != lifted.base.data_count())
        throw ModelError("expected " + std::to_string(lifted.base.data_count()) + " data values");
    double s = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j)
        s += z[j] * evaluate(lifted.columns[j].feature, point);
    s += evaluate(lifted.offset, point);
    return s;
}

/// Lifted coordinates of a parameter vector, in column order.
inline std::vector<double> embed(std::span<const double> params, const LiftMap& map)
{
    if (params.size() != map.parameter_count())
        throw ModelError("expected " + std::to_string(map.parameter_count()) + " parameter values");
    std::vector<double> z(map.column_count());
    for (const auto& e : map.entries())
        z[e.column] = monomial_value(e.monomial, params);
    for (const auto& s : map.linear_slots())
        z[s.column] = params[s.param];
    return z;
}

struct ConsistencyReport {
    double residual = 0.0;
    std::vector<std::size_t> uncheckable;  // lift entry indices
};

/// Max |z_entry - monomial(a)| where a is read from the linear slots.
/// Entries involving a parameter without a slot are listed as uncheckable.
inline ConsistencyReport consistency_residual(std::span<const double> z, const LiftMap& map)
{
    if (z.size() != map.column_count())
        throw ModelError("lifted vector length does not match the lift map");
    std::vector<double> a(map.parameter_count(), 0.0);
    std::vector<bool> known(map.parameter_count(), false);
    for (const auto& s : map.linear_slots()) {
        a[s.param] = z[s.column];
        known[s.param] = true;
    }
    ConsistencyReport report;
    for (std::size_t i = 0; i < map.entries().size(); ++i) {
        const auto& e = map.entries()[i];
        bool checkable = true;
        for (std::size_t k = 0; k < e.monomial.exponents.size(); ++k)
            if (e.monomial.exponents[k] > 0 && !known[k])
                checkable = false;
        if (!checkable) {
            report.uncheckable.push_back(i);
            continue;
        }
        report.residual = std::max(report.residual, std::fabs(z[e.column] - monomial_value(e.monomial, a)));
    }
    return report;
}

/// Max |z_j - monomial_j(params)| over every column, lifted and linear.
inline double consistency_residual(std::span<const double> z, const LiftMap& map, std::span<const double> params)
{
    const std::vector<double> expected = embed(params, map);
    double r = 0.0;
    for (std::size_t j = 0; j < expected.size(); ++j)
        r = std::max(r, std::fabs(z[j] - expected[j]));
    return r;
}

} // namespace liftfit

#endif // LIFTFIT_LIFTING_HPP
