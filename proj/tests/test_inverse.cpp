#include <gtest/gtest.h>

#include <random>

#include "fracholtz/acceptance.hpp"
#include "fracholtz/inverse.hpp"
#include "fracholtz/scenarios.hpp"

using namespace fracholtz;

namespace {

const ConfiguredProblem& problem() {
    static const ConfiguredProblem p = build_problem(default_config());
    return p;
}

}  // namespace

TEST(Tikhonov, ExactOnWellConditionedSquareSystem) {
    Eigen::MatrixXd a(3, 3);
    a << 4, 1, 0, 1, 3, 1, 0, 1, 2;
    const Eigen::VectorXcd x(Eigen::Vector3cd(Complex(1, 2), Complex(-1, 0), Complex(0.5, -0.5)));
    const TikhonovSvd t(a);
    EXPECT_LT((t.solve(a * x, 0.0) - x).norm(), 1e-13);
    EXPECT_EQ(t.rank(1e-12), 3);
    // larger reg shrinks the solution
    EXPECT_LT(t.solve(a * x, 1.0).norm(), t.solve(a * x, 1e-3).norm());
    EXPECT_TRUE(std::isfinite(t.gcv(a * x, 1e-3)));
}

TEST(Tikhonov, RankDeficientGivesMinimumNorm) {
    Eigen::MatrixXd a(2, 3);
    a << 1, 0, 0, 0, 1, 0;
    const TikhonovSvd t(a);
    const Eigen::VectorXcd x = t.solve(Eigen::Vector2cd(2.0, 3.0), 0.0);
    EXPECT_NEAR(std::abs(x(2)), 0.0, 1e-15);
    EXPECT_EQ(t.rank(1e-12), 2);
}

TEST(RegSweep, DescendingWithExactEnds) {
    const auto r = reg_sweep(1e-12, 1e-4, 9);
    EXPECT_EQ(r.front(), 1e-4);
    EXPECT_EQ(r.back(), 1e-12);
    EXPECT_TRUE(std::is_sorted(r.rbegin(), r.rend()));
    EXPECT_THROW(reg_sweep(0.0, 1.0, 3), ContractError);
}

TEST(SourceRecovery, ClosedLoopOnDefaultConfig) {
    const auto& p = problem();
    const auto& cfg = p.config;
    const SourceForwardMap map = build_source_map(p.scenario, p.excitations[1], 1);
    EXPECT_EQ(map.matrix.rows(), static_cast<Index>(p.grid().o2_nodes().size()));
    const auto records = sweep(p.scenario, p.excitations[1], p.frequencies(), 1);
    const SourceTruth truth{p.scenario.source.p0, p.scenario.source.p1};
    const SourceRecovery rec =
        recover_source(records, map, reg_sweep(cfg.reg.min, cfg.reg.max, cfg.reg.points), cfg.fit_degree, truth);
    EXPECT_EQ(rec.selection, "truth");
    EXPECT_EQ(rec.sweep.size(), static_cast<std::size_t>(cfg.reg.points));
    EXPECT_LT(rec.error0(), 1e-2);
    EXPECT_LT(rec.error1(), 1e-2);

    const SourceRecovery blind = recover_source(records, map, reg_sweep(cfg.reg.min, cfg.reg.max, cfg.reg.points),
                                                cfg.fit_degree);
    EXPECT_EQ(blind.selection, "gcv");
    EXPECT_TRUE(std::isnan(blind.error0()));

    const SourceRecovery fixed = recover_source(records, map, 1e-8, cfg.fit_degree);
    EXPECT_EQ(fixed.selection, "fixed");
    EXPECT_EQ(fixed.reg0, 1e-8);
}

TEST(SourceRecovery, MismatchedExcitationRejected) {
    const auto& p = problem();
    const SourceForwardMap map = build_source_map(p.scenario, p.excitations[1], 1);
    const auto records = sweep(p.scenario, p.excitations[2], p.frequencies(), 2);
    EXPECT_THROW(recover_source(records, map, 1e-8, 3), ContractError);
}

TEST(Runge, InRangeTargetAndMonotoneSweep) {
    const auto& p = problem();
    const RungeOperator op = build_runge_operator(p.scenario);
    EXPECT_EQ(op.matrix.rows(), p.scenario.system->interior_size());
    EXPECT_EQ(op.matrix.cols(), static_cast<Index>(p.grid().o1_nodes().size()));
    std::mt19937_64 rng(11);
    const GridFunction star = random_exterior_data(p.scenario.grid_ptr(), rng, 0.3);
    const Eigen::VectorXcd target = op.matrix * star.restrict_to(p.grid().o1_nodes());
    const auto sweep = runge_sweep(op, target, reg_sweep(1e-24, 1e-2, 23));
    for (std::size_t k = 1; k < sweep.size(); ++k) EXPECT_LE(sweep[k].residual, sweep[k - 1].residual);
    EXPECT_LT(sweep.back().relative, 1e-8);
    // the control only lives on O1
    const RungeResult r = sweep.back();
    for (Index i = 0; i < p.grid().size(); ++i)
        if (!p.grid().o1_mask()[static_cast<std::size_t>(i)]) { EXPECT_EQ(r.psi(i), Complex(0.0)); }
}

TEST(Potential, JacobianAndNormalEquationsAgree) {
    const GridPtr g = acceptance::geometry::line60();
    const SystemPtr sys = make_system(g, EllipticTensor::identity(1), 0.5);
    const Eigen::VectorXd q = Eigen::VectorXd::Constant(sys->interior_size(), 0.3);
    const Eigen::VectorXcd p = Eigen::VectorXcd::Constant(sys->interior_size(), Complex(1.0, 0.2));
    auto psis = make_excitations(g, 3, 0.3);
    psis.erase(psis.begin());
    const PotentialModel model(sys, FreqSource::constant(p, 1.0), {0.4, 0.9}, psis);
    EXPECT_LT(acceptance::jacobian_fd_error(model, q, 5), 1e-6);

    const auto data = model.predict(0.8 * q);
    const auto lin = model.linearize(q, data);
    const Eigen::MatrixXd j = model.jacobian(q);
    const Eigen::VectorXd r = model.stacked(q) - model.stack(data);
    EXPECT_LT((lin.normal - j.transpose() * j).norm(), 1e-10 * lin.normal.norm());
    EXPECT_LT((lin.gradient - j.transpose() * r).norm(), 1e-10 * lin.gradient.norm());
    EXPECT_NEAR(lin.misfit, r.squaredNorm(), 1e-12 * lin.misfit);
}

TEST(Potential, RecoversSmoothPotentialFromCleanData) {
    const GridPtr g = acceptance::geometry::line60();
    const SystemPtr sys = make_system(g, EllipticTensor::identity(1), 0.5);
    const Eigen::VectorXd truth =
        acceptance::field_values(*g, [](const Point& x) { return 0.4 + 0.3 * std::exp(-2.0 * x[0] * x[0]); });
    const Eigen::VectorXcd p = acceptance::field_values(*g, [](const Point& x) { return std::cos(x[0]); }).cast<Complex>();
    auto psis = make_excitations(g, 6, 0.3);
    psis.erase(psis.begin());
    const std::vector<double> omegas{0.2, 0.4, 0.6, 0.8, 1.0};
    const PotentialModel model(sys, FreqSource::constant(p, 1.0), omegas, psis);
    const PotentialRecovery rec = recover_potential(model, model.predict(truth), {}, truth);
    EXPECT_FALSE(rec.aborted) << rec.diagnostics;
    EXPECT_EQ(rec.stages.size(), 7u);
    EXPECT_LT(rec.error(), 5e-2);
}

TEST(Potential, ArrangeRecordsNeedsEveryPair) {
    const Eigen::VectorXcd v = Eigen::VectorXcd::Ones(2);
    const std::vector<DtnRecord> recs{{1, 0.5, v}, {2, 0.5, v}};
    EXPECT_EQ(arrange_records(recs, {1, 2}, {0.5}).size(), 1u);
    EXPECT_THROW(arrange_records(recs, {1, 3}, {0.5}), ContractError);
}

TEST(Injectivity, ReportFieldsConsistent) {
    const auto& p = problem();
    const InjectivityReport rep = injectivity_check(p.scenario);
    EXPECT_EQ(rep.interior_dim, p.scenario.system->interior_size());
    EXPECT_EQ(rep.rows, static_cast<Index>(p.grid().o2_nodes().size()));
    EXPECT_TRUE(rep.conclusive);
    EXPECT_LE(rep.rank, rep.interior_dim);
    EXPECT_GT(rep.rank, 0);
    EXPECT_EQ(rep.full_rank, rep.rank == rep.interior_dim);
    // the stacked ω = 0 map ignores ψ: more excitations add rows, not rank
    const InjectivityReport more = injectivity_check(p.scenario, p.excitations);
    EXPECT_EQ(more.rank, rep.rank);
    EXPECT_EQ(more.rows, 3 * rep.rows);
}

TEST(Noise, SeededAndScaled) {
    const std::vector<DtnRecord> clean{{0, 0.1, Eigen::VectorXcd::Constant(400, Complex(1.0, 1.0))}};
    auto a = clean, b = clean, c = clean;
    add_noise(a, 0.01, 3);
    add_noise(b, 0.01, 3);
    add_noise(c, 0.01, 4);
    EXPECT_EQ((a[0].measurement - b[0].measurement).norm(), 0.0);
    EXPECT_GT((a[0].measurement - c[0].measurement).norm(), 0.0);
    EXPECT_NEAR(relative_error(a[0].measurement, clean[0].measurement), 0.01, 0.002);
    EXPECT_THROW(add_noise(a, -1.0, 1), ContractError);
}
