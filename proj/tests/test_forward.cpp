#include <gtest/gtest.h>

#include <atomic>
#include <random>

#include "fracholtz/acceptance.hpp"
#include "fracholtz/forward.hpp"
#include "fracholtz/parallel.hpp"
#include "fracholtz/scenarios.hpp"

using namespace fracholtz;

namespace {

const ConfiguredProblem& problem() {
    static const ConfiguredProblem p = build_problem(default_config());
    return p;
}

}  // namespace

TEST(System, OrderMustBeFractional) {
    const GridPtr g = acceptance::geometry::line60();
    EXPECT_THROW(make_system(g, EllipticTensor::identity(1), 1.0), ContractError);
    EXPECT_THROW(make_system(g, EllipticTensor::identity(1), 0.0), ContractError);
    const SystemPtr sys = make_system(g, EllipticTensor::identity(1), 0.4);
    EXPECT_EQ(sys->block_ii.rows(), 20);
    EXPECT_EQ(sys->block_oi.rows(), static_cast<Index>(g->o2_nodes().size()));
}

TEST(Solver, ResonantPotentialRaises) {
    const SystemPtr sys = problem().scenario.system;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sys->block_ii, Eigen::EigenvaluesOnly);
    const double mu = es.eigenvalues()(0);
    const double omega = 0.8;
    const Eigen::VectorXd q = Eigen::VectorXd::Constant(sys->interior_size(), -mu / (omega * omega));
    EXPECT_THROW(InteriorSolver(*sys, q, omega), ResonanceError);
    EXPECT_NO_THROW(InteriorSolver(*sys, 0.5 * q, omega));
}

TEST(Solver, SolutionMatchesExteriorDataAndResidualIsSmall) {
    const auto& p = problem();
    const double omega = 0.7;
    const GridFunction& psi = p.excitations[1];
    const Eigen::VectorXcd src = eval_source(p.scenario.source, omega);
    const GridFunction u = solve_exterior_dirichlet(p.scenario, omega, psi, src);
    for (Index i : p.grid().exterior_nodes()) EXPECT_EQ(u(i), psi(i));
    EXPECT_LT(solve_residual(p.scenario, omega, u, src), 1e-12);
}

TEST(Solver, InteriorSupportedDataRejected) {
    const auto& p = problem();
    const GridFunction bad = GridFunction::from_interior(p.scenario.grid_ptr(),
                                                         Eigen::VectorXcd::Ones(p.scenario.system->interior_size()));
    EXPECT_THROW(exterior_values(bad), ContractError);
}

TEST(Dtn, LinearInExteriorDataWhenSourceVanishes) {
    const auto& p = problem();
    const Scenario sc = make_scenario(p.scenario.system, p.scenario.q,
                                      FreqSource::constant(Eigen::VectorXcd::Zero(p.scenario.system->interior_size()), 1.0),
                                      1.0);
    const GridFunction& a = p.excitations[1];
    const GridFunction& b = p.excitations[2];
    const GridFunction sum(a.grid_ptr(), a.values() + Complex(0.0, 2.0) * b.values());
    const Eigen::VectorXcd lhs = dtn(sc, 0.5, sum).measurement;
    const Eigen::VectorXcd rhs = dtn(sc, 0.5, a).measurement + Complex(0.0, 2.0) * dtn(sc, 0.5, b).measurement;
    EXPECT_LT((lhs - rhs).norm(), 1e-12 * lhs.norm());
}

TEST(Dtn, SymmetricPairing) {
    const auto& p = problem();
    const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(p.scenario.system->interior_size());
    const SymmetryCheck c = dtn_symmetry_check(p.scenario, 0.9, p.excitations[1], p.excitations[2], zero);
    EXPECT_GT(std::abs(c.lhs), 0.0);
    EXPECT_LT(c.gap, 1e-10);
}

TEST(Dtn, ZeroPotentialMakesFrequencyIrrelevant) {
    const auto& p = problem();
    const Scenario sc = p.scenario.with_q(Eigen::VectorXd::Zero(p.scenario.system->interior_size()));
    const Scenario flat = make_scenario(sc.system, sc.q, FreqSource::constant(sc.source.p0, 1.0), 1.0);
    const Eigen::VectorXcd a = dtn(flat, 0.1, p.excitations[1]).measurement;
    const Eigen::VectorXcd b = dtn(flat, 0.9, p.excitations[1]).measurement;
    EXPECT_EQ((a - b).norm(), 0.0);
}

TEST(Probes, DeterministicBySeedAndSupportedOnO1) {
    const GridPtr g = problem().scenario.grid_ptr();
    std::mt19937_64 r1(7), r2(7);
    const GridFunction a = random_exterior_data(g, r1, 0.3);
    const GridFunction b = random_exterior_data(g, r2, 0.3);
    EXPECT_EQ((a.values() - b.values()).norm(), 0.0);
    for (Index i = 0; i < g->size(); ++i)
        if (!g->o1_mask()[static_cast<std::size_t>(i)]) { EXPECT_EQ(a(i), Complex(0.0)); }
    EXPECT_GT(a.values().norm(), 0.0);
}

TEST(Probes, StabilityRatioFiniteAndPositive) {
    const StabilityProbe probe = stability_ratio(problem().scenario, 0.5, 5, 3);
    EXPECT_EQ(probe.ratios.size(), 5u);
    EXPECT_TRUE(std::isfinite(probe.max_ratio));
    EXPECT_GT(probe.max_ratio, 0.0);
}

TEST(Parallel, EveryIndexOnceAndExceptionsPropagate) {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                     if (i == 7) throw NumericalError("boom");
                 }),
                 NumericalError);
}
