#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "liftfit/linsolve.hpp"
#include "liftfit/recovery.hpp"
#include "support.hpp"

using namespace liftfit;

namespace {

const std::string quad = "a1^2*x1^2 + a1*a2*x1*x2 + 3*a1*x1 + 2*a2*x2 + 2";
const std::vector<std::string> a12 = {"a1", "a2"};

MomentMatrix moment(std::vector<std::vector<std::optional<double>>> entries)
{
    MomentMatrix mm;
    mm.n = entries.size();
    mm.values = Matrix(mm.n, mm.n);
    mm.observed.assign(mm.n * mm.n, 0);
    for (std::size_t i = 0; i < mm.n; ++i)
        for (std::size_t j = 0; j < mm.n; ++j)
            if (entries[i][j]) {
                mm.values(i, j) = *entries[i][j];
                mm.observed[i * mm.n + j] = 1;
            }
    return mm;
}

Dataset noiseless(const CanonicalModel& model, const std::vector<double>& a, std::size_t m, std::mt19937_64& rng)
{
    Dataset data;
    data.data_var_names = model.data_var_names;
    for (std::size_t i = 0; i < m; ++i) {
        Sample s;
        s.point = fixtures::uniform_vector(rng, model.data_count(), -1, 1);
        s.response = evaluate(model, a, s.point);
        data.rows.push_back(std::move(s));
    }
    return data;
}

// Masked loss recomputed independently of masked_rank1_residual.
double masked_loss(const MomentMatrix& mm, const std::vector<double>& v)
{
    double s = 0.0;
    for (std::size_t i = 0; i < mm.n; ++i)
        for (std::size_t j = 0; j < mm.n; ++j)
            if (mm.observed[i * mm.n + j])
                s += std::pow(mm.values(i, j) - v[i] * v[j], 2);
    return std::sqrt(s);
}

} // namespace

TEST(BuildMomentMatrix, QuadMasksMissingSquare)
{
    const LiftMap map = build_lift_map(parse_model(quad, a12));
    const MomentMatrix mm = build_moment_matrix(std::vector<double>{4, -2, 2, -1}, map);
    ASSERT_EQ(mm.n, 2u);
    EXPECT_TRUE(mm.is_observed(0, 0));
    EXPECT_TRUE(mm.is_observed(0, 1));
    EXPECT_TRUE(mm.is_observed(1, 0));
    EXPECT_FALSE(mm.is_observed(1, 1));
    EXPECT_EQ(mm.values(0, 0), 4.0);
    EXPECT_EQ(mm.values(0, 1), -2.0);
    EXPECT_EQ(mm.values(1, 0), -2.0);
}

TEST(BuildMomentMatrix, FullQuadratic)
{
    const CanonicalModel m = parse_model("a1^2*x1 + a1*a2*x2 + a2^2*x1*x2", a12);
    const LiftMap map = build_lift_map(m);
    const MomentMatrix mm = build_moment_matrix(embed(std::vector<double>{2, -1}, map), map);
    EXPECT_EQ(mm.observed_count(), 4u);
    EXPECT_EQ(mm.values(0, 0), 4.0);
    EXPECT_EQ(mm.values(0, 1), -2.0);
    EXPECT_EQ(mm.values(1, 0), -2.0);
    EXPECT_EQ(mm.values(1, 1), 1.0);
}

TEST(BuildMomentMatrix, LinearModelIsFullyMasked)
{
    const LiftMap map = build_lift_map(parse_model("a1*x1 + a2*x2", a12));
    EXPECT_EQ(build_moment_matrix(std::vector<double>{1, 2}, map).observed_count(), 0u);
}

TEST(BuildMomentMatrix, HigherDegreeEntriesAreSetAside)
{
    const LiftMap map = build_lift_map(parse_model("a1^3*x1 + a1*a2*x2", a12));
    const MomentMatrix mm = build_moment_matrix(std::vector<double>{8, 3}, map);
    EXPECT_EQ(mm.higher_degree_entries.size(), 1u);
    EXPECT_EQ(mm.observed_count(), 2u);
}

TEST(Rank1Factor, ExactRankOne)
{
    const auto f = rank1_factor(moment({{4.0, -2.0}, {-2.0, 1.0}}));
    ASSERT_EQ(f.v.size(), 2u);
    EXPECT_NEAR(f.v[0], 2.0, 1e-12);
    EXPECT_NEAR(f.v[1], -1.0, 1e-12);
    EXPECT_LE(f.fit_residual, 1e-12);
    EXPECT_TRUE(f.converged);
}

TEST(Rank1Factor, ForcedByDiagonal)
{
    const auto f = rank1_factor(moment({{1.0, std::nullopt}, {std::nullopt, 0.0}}));
    EXPECT_NEAR(std::fabs(f.v[0]), 1.0, 1e-12);
    EXPECT_NEAR(f.v[1], 0.0, 1e-12);
    EXPECT_LE(f.fit_residual, 1e-12);
}

TEST(Rank1Factor, MaskedEntryImposesNoConstraint)
{
    const auto f = rank1_factor(moment({{4.0, -2.0}, {-2.0, std::nullopt}}));
    EXPECT_NEAR(f.v[0], 2.0, 1e-10);
    EXPECT_NEAR(f.v[1], -1.0, 1e-10);
    EXPECT_LE(f.fit_residual, 1e-10);
}

TEST(Rank1Factor, AllMaskedIsAnError)
{
    EXPECT_THROW(rank1_factor(moment({{std::nullopt, std::nullopt}, {std::nullopt, std::nullopt}})),
                 NumericalError);
}

TEST(Rank1Factor, NotRankOneGivesLeastSquaresFit)
{
    // diag(2, 1): best rank-1 approximation is the top eigenpair, loss 1.
    const auto f = rank1_factor(moment({{2.0, 0.0}, {0.0, 1.0}}));
    EXPECT_NEAR(std::fabs(f.v[0]), std::sqrt(2.0), 1e-9);
    EXPECT_NEAR(f.v[1], 0.0, 1e-9);
    EXPECT_NEAR(f.fit_residual, 1.0, 1e-9);
}

TEST(ResolveSign, ReadoutDictatesSign)
{
    const std::vector<std::optional<double>> readout = {2.0, -1.0};
    EXPECT_EQ(resolve_sign(std::vector<double>{-2, 1}, readout), (std::vector<double>{2, -1}));
}

TEST(ResolveSign, TieBreakFirstNonzeroPositive)
{
    const std::vector<std::optional<double>> none(2);
    auto even = [](std::span<const double> a) { return a[0] * a[0] + a[1] * a[1]; };
    EXPECT_EQ(resolve_sign(std::vector<double>{2, -1}, none, even), (std::vector<double>{2, -1}));
    EXPECT_EQ(resolve_sign(std::vector<double>{0, -3}, none), (std::vector<double>{0, 3}));
}

TEST(ResolveSign, PartialReadout)
{
    const std::vector<std::optional<double>> readout = {-1.0, std::nullopt};
    EXPECT_EQ(resolve_sign(std::vector<double>{1, 1}, readout), (std::vector<double>{-1, -1}));
}

TEST(ResolveSign, SseDecidesWithoutReadout)
{
    const std::vector<std::optional<double>> none(1);
    auto odd = [](std::span<const double> a) { return (a[0] + 3.0) * (a[0] + 3.0); };
    EXPECT_EQ(resolve_sign(std::vector<double>{3}, none, odd), (std::vector<double>{-3}));
}

TEST(RecoverParameters, QuadNoiseless)
{
    std::mt19937_64 rng(3);
    const CanonicalModel m = parse_model(quad, a12);
    const Dataset data = noiseless(m, {1.5, -0.7}, 50, rng);
    const LiftMap map = build_lift_map(m);
    const LiftedSolution sol = solve_least_squares(assemble_design(lift_model(m, map), data));
    const RecoveredParams rec = recover_parameters(sol, map, m, data);
    EXPECT_NEAR(rec.a_hat[0], 1.5, 1e-8);
    EXPECT_NEAR(rec.a_hat[1], -0.7, 1e-8);
    EXPECT_EQ(rec.routes, (std::vector<RecoveryRoute>{RecoveryRoute::linear_readout, RecoveryRoute::linear_readout}));
    EXPECT_LE(rec.consistency_residual, 1e-8);
    EXPECT_FALSE(rec.moment_used);
    EXPECT_TRUE(rec.fully_identified());
}

TEST(RecoverParameters, EvenModelTakesPositiveRoot)
{
    std::mt19937_64 rng(5);
    const CanonicalModel m = parse_model("a1^2*x1", {"a1"});
    const Dataset data = noiseless(m, {3.0}, 20, rng);
    const LiftMap map = build_lift_map(m);
    const LiftedSolution sol = solve_least_squares(assemble_design(lift_model(m, map), data));
    const RecoveredParams rec = recover_parameters(sol, map, m, data);
    EXPECT_NEAR(rec.a_hat[0], 3.0, 1e-10);
    EXPECT_EQ(rec.routes[0], RecoveryRoute::moment_factor);
    EXPECT_TRUE(rec.moment_used);
}

TEST(RecoverParameters, LinearModelSkipsMoment)
{
    std::mt19937_64 rng(7);
    const CanonicalModel m = parse_model("a1*x1", {"a1"});
    const Dataset data = noiseless(m, {-0.25}, 10, rng);
    const LiftMap map = build_lift_map(m);
    const RecoveredParams rec = recover_parameters(std::vector<double>{-0.25}, map, m, data);
    EXPECT_EQ(rec.routes[0], RecoveryRoute::linear_readout);
    EXPECT_FALSE(rec.moment_used);
    EXPECT_EQ(rec.a_hat[0], -0.25);
}

TEST(RecoverParameters, PowerRootAndUnidentifiable)
{
    std::mt19937_64 rng(9);
    const CanonicalModel cubic = parse_model("a1^3*x1 + a2*x2", a12);
    const Dataset d1 = noiseless(cubic, {-1.5, 0.5}, 10, rng);
    const LiftMap m1 = build_lift_map(cubic);
    const RecoveredParams r1 = recover_parameters(embed(std::vector<double>{-1.5, 0.5}, m1), m1, cubic, d1);
    EXPECT_EQ(r1.routes[0], RecoveryRoute::power_root);
    EXPECT_NEAR(r1.a_hat[0], -1.5, 1e-12);

    const CanonicalModel mixed = parse_model("a1^2*a2*x1 + a1*x2", a12);
    const Dataset d2 = noiseless(mixed, {1.0, 2.0}, 10, rng);
    const LiftMap m2 = build_lift_map(mixed);
    const RecoveredParams r2 = recover_parameters(embed(std::vector<double>{1.0, 2.0}, m2), m2, mixed, d2);
    EXPECT_EQ(r2.routes[1], RecoveryRoute::unidentifiable);
    EXPECT_FALSE(r2.fully_identified());
}

TEST(RecoverParameters, ReadoutFixesScaleOfChainedProducts)
{
    // Only a1*a2 and a2*a3 are observed; a2's readout fixes the scale.
    std::mt19937_64 rng(11);
    const std::vector<std::string> p3 = {"a1", "a2", "a3"};
    const CanonicalModel m = parse_model("a1*a2*x1 + a2*a3*x2 + a2*x3", p3);
    const std::vector<double> a = {1.2, -0.8, 0.6};
    const Dataset data = noiseless(m, a, 20, rng);
    const LiftMap map = build_lift_map(m);
    const RecoveredParams rec = recover_parameters(embed(a, map), map, m, data);
    for (std::size_t k = 0; k < 3; ++k)
        EXPECT_NEAR(rec.a_hat[k], a[k], 1e-10);
    EXPECT_EQ(rec.routes[0], RecoveryRoute::moment_factor);
    EXPECT_EQ(rec.routes[1], RecoveryRoute::linear_readout);
    EXPECT_TRUE(rec.fully_identified());
}

TEST(RecoverParameters, BareProductIsUnidentifiable)
{
    std::mt19937_64 rng(13);
    const CanonicalModel m = parse_model("a1*a2*x1", a12);
    const Dataset data = noiseless(m, {2.0, 3.0}, 10, rng);
    const LiftMap map = build_lift_map(m);
    const RecoveredParams rec = recover_parameters(embed(std::vector<double>{2.0, 3.0}, map), map, m, data);
    EXPECT_EQ(rec.routes[0], RecoveryRoute::unidentifiable);
    EXPECT_EQ(rec.routes[1], RecoveryRoute::unidentifiable);
    EXPECT_NEAR(rec.a_hat[0] * rec.a_hat[1], 6.0, 1e-10);
}

// ---------------------------------------------------------------------------

TEST(RecoveryProperties, ExactInversion)
{
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> mag(0.5, 2.0);
    std::bernoulli_distribution flip(0.5);
    int with_readout = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + trial % 4;
        const CanonicalModel m = fixtures::parse_random(fixtures::random_model(rng, n, 2, 10, false));
        std::vector<double> a(n);
        for (auto& x : a)
            x = flip(rng) ? -mag(rng) : mag(rng);
        const Dataset data = noiseless(m, a, 30, rng);
        const LiftMap map = build_lift_map(m);
        const RecoveredParams rec = recover_parameters(embed(a, map), map, m, data);
        for (std::size_t k = 0; k < n; ++k) {
            if (rec.routes[k] == RecoveryRoute::unidentifiable)
                continue;
            ASSERT_LE(std::min(std::fabs(rec.a_hat[k] - a[k]), std::fabs(rec.a_hat[k] + a[k])), 1e-10)
                << print_canonical(m) << " k=" << k;
            if (rec.routes[k] == RecoveryRoute::linear_readout) {
                ++with_readout;
                ASSERT_EQ(rec.a_hat[k], a[k]);
            }
        }
        ASSERT_LE(rec.consistency_residual, 1e-10) << print_canonical(m);
    }
    EXPECT_GT(with_readout, 100);
}

TEST(RecoveryProperties, SignFixedByReadoutIsExact)
{
    // Every parameter appears linearly and quadratically, so the sign class
    // collapses to the true vector.
    std::mt19937_64 rng(103);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + trial % 4;
        auto rm = fixtures::random_model(rng, n, 2, 6, false);
        for (std::size_t k = 0; k < n; ++k)
            rm.text += " + " + rm.params[k] + "*x" + std::to_string(1 + k % 3) + " + " + rm.params[k] + "^2*x1*x2";
        const CanonicalModel m = fixtures::parse_random(rm);
        const auto a = fixtures::uniform_vector(rng, n, -2, 2);
        const Dataset data = noiseless(m, a, 30, rng);
        const LiftMap map = build_lift_map(m);
        const RecoveredParams rec = recover_parameters(embed(a, map), map, m, data);
        for (std::size_t k = 0; k < n; ++k)
            ASSERT_NEAR(rec.a_hat[k], a[k], 1e-10);
    }
}

TEST(RecoveryProperties, Rank1ResidualIsRecomputedLoss)
{
    std::mt19937_64 rng(107);
    std::bernoulli_distribution keep(0.7);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + trial % 5;
        std::vector<std::vector<std::optional<double>>> e(n, std::vector<std::optional<double>>(n));
        bool any = false;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j)
                if (keep(rng)) {
                    const double v = std::uniform_real_distribution<double>(-3, 3)(rng);
                    e[i][j] = e[j][i] = v;
                    any = true;
                }
        if (!any)
            continue;
        const MomentMatrix mm = moment(e);
        const auto f = rank1_factor(mm);
        ASSERT_NEAR(f.fit_residual, masked_loss(mm, f.v), 1e-12);
    }
}

TEST(RecoveryProperties, SignResolutionIsDeterministic)
{
    std::mt19937_64 rng(109);
    for (int trial = 0; trial < 200; ++trial) {
        const auto v = fixtures::uniform_vector(rng, 3, -1, 1);
        std::vector<std::optional<double>> readout(3);
        if (trial % 2)
            readout[trial % 3] = v[trial % 3] * (trial % 4 == 1 ? -1.0 : 1.0);
        auto sse = [](std::span<const double> a) { return std::pow(a[0] - 0.1, 2) + a[1] * a[1]; };
        ASSERT_EQ(resolve_sign(v, readout, sse), resolve_sign(v, readout, sse));
    }
}

TEST(RecoveryProperties, PolishNeverWorsensSse)
{
    std::mt19937_64 rng(113);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 1 + trial % 3;
        const CanonicalModel m = fixtures::parse_random(fixtures::random_model(rng, n, 2, 8, false));
        const auto a = fixtures::uniform_vector(rng, n, -1.5, 1.5);
        Dataset data = noiseless(m, a, 40, rng);
        for (auto& row : data.rows)
            row.response += noise(rng);
        const LiftMap map = build_lift_map(m);
        if (map.column_count() == 0)
            continue;
        const LiftedSolution sol = solve_least_squares(assemble_design(lift_model(m, map), data));
        RecoveryOptions opts;
        opts.polish = true;
        const RecoveredParams rec = recover_parameters(sol, map, m, data, opts);
        ASSERT_TRUE(rec.polished);
        ASSERT_LE(rec.data_sse, rec.sse_unpolished) << print_canonical(m);
        const double recomputed = BoundProblem(m, data).sse(rec.a_hat);
        ASSERT_NEAR(rec.data_sse, recomputed, 1e-10 * std::max(1.0, recomputed));
    }
}
