#include <gtest/gtest.h>

#include <cmath>

#include "fracholtz/asymptotics.hpp"
#include "fracholtz/scenarios.hpp"

using namespace fracholtz;

namespace {

const ConfiguredProblem& problem() {
    static const ConfiguredProblem p = build_problem(default_config());
    return p;
}

}  // namespace

TEST(GeometricGrid, EndpointsExactAndAscending) {
    const auto w = geometric_grid(1e-3, 1e-1, 5);
    ASSERT_EQ(w.size(), 5u);
    EXPECT_EQ(w.front(), 1e-3);
    EXPECT_EQ(w.back(), 1e-1);
    EXPECT_NEAR(w[2], 1e-2, 1e-15);
    EXPECT_TRUE(std::is_sorted(w.begin(), w.end()));
    EXPECT_THROW(geometric_grid(0.0, 1.0, 4), ContractError);
    EXPECT_THROW(geometric_grid(1.0, 0.5, 4), ContractError);
}

TEST(Sweep, MatchesIndividualSolvesBitForBit) {
    const auto& p = problem();
    const auto omegas = geometric_grid(1e-3, 1e-1, 6);
    const auto recs = sweep(p.scenario, p.excitations[1], omegas, 1);
    ASSERT_EQ(recs.size(), omegas.size());
    for (std::size_t k = 0; k < omegas.size(); ++k) {
        EXPECT_EQ(recs[k].excitation_id, 1);
        EXPECT_EQ(recs[k].omega, omegas[k]);
        EXPECT_EQ((recs[k].measurement - dtn(p.scenario, omegas[k], p.excitations[1], 1).measurement).norm(), 0.0);
    }
}

TEST(Constants, DefaultProblem) {
    const EstimateConstants c = estimate_constants(problem().scenario);
    EXPECT_TRUE(c.chain_valid);
    EXPECT_GT(c.c0, 0.0);
    EXPECT_GT(c.c1, 0.0);
    EXPECT_DOUBLE_EQ(c.alpha0, 0.5 * c.alpha_upper);
    EXPECT_NEAR(c.alpha_upper, 2.0 * c.c0 * c.c0 * c.c1 / ((1.0 + c.c0) * (1.0 + c.c0)), 1e-15);
    EXPECT_GT(c.d_nodes, problem().grid().omega_nodes().size());
}

TEST(Constants, WiderMarginShrinksTheFarField) {
    const SystemPtr sys = problem().scenario.system;
    const EstimateConstants near = estimate_constants(*sys, 10.0);
    const EstimateConstants far = estimate_constants(*sys, 40.0);
    EXPECT_LT(far.d_nodes, near.d_nodes);
    EXPECT_LT(far.c0, near.c0);
}

TEST(Report, BoundHoldsAndRateIsLinearForTaylorSource) {
    const auto& p = problem();
    const AsymptoticsReport rep = low_freq_report(p.scenario, p.excitations[1], geometric_grid(1e-3, 1e-1, 8));
    EXPECT_EQ(rep.usable_count(), 8u);
    EXPECT_TRUE(rep.bound_holds());
    EXPECT_NEAR(rep.slope, 1.0, 0.1);
    // the Gaussian peak falls between nodes at +-h/2
    EXPECT_NEAR(rep.q_sup, 0.3 + 0.2 * std::exp(-0.025 * 0.025 / 0.25), 1e-12);
}

TEST(Report, ZeroPotentialConstantSourceHasNoGap) {
    const auto& p = problem();
    const Scenario sc = make_scenario(p.scenario.system, Eigen::VectorXd::Zero(p.scenario.system->interior_size()),
                                      FreqSource::constant(p.scenario.source.p0, 1.0), 1.0);
    const AsymptoticsReport rep = low_freq_report(sc, p.excitations[1], {0.01, 0.1});
    EXPECT_EQ(rep.gap[0], 0.0);
    EXPECT_EQ(rep.gap[1], 0.0);
}

TEST(Report, RejectsFrequenciesAboveOmega0) {
    const auto& p = problem();
    EXPECT_THROW(low_freq_report(p.scenario, p.excitations[0], {0.5, 2.0}), ContractError);
}

TEST(Slope, LogLog) {
    EXPECT_NEAR(loglog_slope({1, 10, 100}, {2, 200, 20000}), 2.0, 1e-12);
    EXPECT_TRUE(std::isnan(loglog_slope({1}, {1})));
}

TEST(TaylorFit, RecoversPolynomialCoefficients) {
    const Eigen::VectorXcd a = Eigen::VectorXcd::Random(5);
    const Eigen::VectorXcd b = Eigen::VectorXcd::Random(5);
    const Eigen::VectorXcd c = Eigen::VectorXcd::Random(5);
    std::vector<DtnRecord> recs;
    for (double w : geometric_grid(1e-3, 1e-1, 7)) recs.push_back({2, w, a + w * b + w * w * c});
    std::reverse(recs.begin(), recs.end());
    const TaylorCoefficients t = taylor_fit(recs, 2);
    EXPECT_TRUE(std::is_sorted(t.omegas.begin(), t.omegas.end()));
    EXPECT_LT((t.d0() - a).norm(), 1e-12);
    EXPECT_LT((t.d1() - b).norm(), 1e-9);
    EXPECT_LT((t.d2() - c).norm(), 1e-6);
    EXPECT_EQ(t.d(3).norm(), 0.0);
    EXPECT_LT(t.residual, 1e-13);
}

TEST(TaylorFit, ValidatesRecords) {
    const Eigen::VectorXcd v = Eigen::VectorXcd::Ones(3);
    std::vector<DtnRecord> few{{0, 0.1, v}, {0, 0.2, v}, {0, 0.3, v}};
    EXPECT_THROW(taylor_fit(few, 2), ContractError);
    std::vector<DtnRecord> mixed{{0, 0.1, v}, {1, 0.2, v}, {0, 0.3, v}, {0, 0.4, v}};
    EXPECT_THROW(taylor_fit(mixed, 2), ContractError);
    std::vector<DtnRecord> dup{{0, 0.1, v}, {0, 0.2, v}, {0, 0.2, v}, {0, 0.4, v}};
    EXPECT_THROW(taylor_fit(dup, 2), ContractError);
}
