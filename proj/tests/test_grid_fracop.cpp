#include <gtest/gtest.h>

#include <cmath>

#include "fracholtz/acceptance.hpp"
#include "fracholtz/fracop.hpp"
#include "fracholtz/grid.hpp"
#include "fracholtz/source.hpp"

using namespace fracholtz;

namespace {

GridPtr line60() { return acceptance::geometry::line60(); }

const Region kOmega1{Rect{{-1.0}, {1.0}}};
const Region kOuter1{Rect{{-2.5}, {-1.0}}, Rect{{1.0}, {2.5}}};

}  // namespace

TEST(Grid, LineCountsAndMasks) {
    const GridPtr g = line60();
    EXPECT_EQ(g->size(), 60);
    EXPECT_EQ(g->omega_nodes().size(), 20u);  // -0.95 ... 0.95
    EXPECT_EQ(g->o1_nodes().size(), 30u);
    EXPECT_EQ(g->omega_nodes().size() + g->exterior_nodes().size(), 60u);
    for (Index i : g->omega_nodes()) {
        EXPECT_LT(std::abs(g->node(i)[0]), 1.0);
        EXPECT_EQ(g->omega_nodes()[static_cast<std::size_t>(g->omega_position(i))], i);
    }
    for (Index i : g->o1_nodes()) EXPECT_FALSE(g->omega_mask()[static_cast<std::size_t>(i)]);
    EXPECT_DOUBLE_EQ(g->cell_volume(), 0.1);
}

TEST(Grid, SquareHasSixteenSquaredInterior) {
    const GridPtr g = acceptance::geometry::square24();
    EXPECT_EQ(g->per_axis(), 24);
    EXPECT_EQ(g->omega_nodes().size(), 256u);
    EXPECT_EQ(g->o1_nodes().size(), g->exterior_nodes().size());
    EXPECT_NEAR(g->cell_volume(), 0.01, 1e-15);
}

TEST(Grid, RejectsBadGeometry) {
    EXPECT_THROW(make_grid(1, 1.05, 0.1, kOmega1, kOuter1, kOuter1), GeometryError);         // Ω within 2h of box
    EXPECT_THROW(make_grid(1, 2.93, 0.1, kOmega1, kOuter1, kOuter1), GeometryError);         // 2L/h not integral
    EXPECT_THROW(make_grid(3, 2.95, 0.1, kOmega1, kOuter1, kOuter1), GeometryError);         // dim
    EXPECT_THROW(make_grid(1, 2.95, 0.1, kOmega1, Region{Rect{{-0.5}, {0.5}}}, kOuter1),
                 GeometryError);                                                              // O1 inside Ω
    EXPECT_THROW(make_grid(1, 2.95, 0.1, kOmega1, Region{Rect{{5.0}, {6.0}}}, kOuter1),
                 GeometryError);                                                              // O1 empty
    EXPECT_THROW(make_grid(1, 2.95, -0.1, kOmega1, kOuter1, kOuter1), GeometryError);
}

TEST(Grid, DiscRegions) {
    const GridPtr g = make_grid(2, 1.5, 0.1, Region{Disc{{0.0, 0.0}, 0.6}},
                                Region{Disc{{1.0, 1.0}, 0.3}}, Region{Disc{{-1.0, -1.0}, 0.3}});
    for (Index i : g->omega_nodes()) EXPECT_LT(std::hypot(g->node(i)[0], g->node(i)[1]), 0.6);
    EXPECT_FALSE(g->o1_nodes().empty());
    EXPECT_FALSE(g->o2_nodes().empty());
}

TEST(GridFunction, InteriorAndExteriorSupport) {
    const GridPtr g = line60();
    Eigen::VectorXcd in = Eigen::VectorXcd::LinSpaced(20, 1.0, 20.0);
    const GridFunction f = GridFunction::from_interior(g, in);
    EXPECT_TRUE(f.is_interior_supported());
    EXPECT_FALSE(f.is_exterior_supported());
    EXPECT_EQ((f.interior() - in).norm(), 0.0);
    EXPECT_TRUE(GridFunction::zeros(g).is_exterior_supported());
}

TEST(EllipticTensor, ParsesPresets) {
    EXPECT_EQ(EllipticTensor::parse("identity", 2).at({0.3, 0.1})(1, 1), 1.0);
    EXPECT_EQ(EllipticTensor::parse("scalar(2)", 1).at({0.0, 0.0})(0, 0), 2.0);
    const auto d = EllipticTensor::parse("diag(1,3)", 2).at({0.0, 0.0});
    EXPECT_EQ(d(0, 0), 1.0);
    EXPECT_EQ(d(1, 1), 3.0);
    EXPECT_GT(EllipticTensor::parse("smooth-bump", 2).at({0.0, 0.0})(0, 0), 1.0);
    EXPECT_THROW(EllipticTensor::parse("diag(1,2,3)", 2), AssemblyError);
    EXPECT_THROW(EllipticTensor::parse("banana", 1), AssemblyError);
}

TEST(Assembly, NonEllipticSigmaRejected) {
    const GridPtr g = line60();
    EXPECT_THROW(assemble_elliptic(*g, EllipticTensor::scalar(1, -1.0)), AssemblyError);
    EXPECT_THROW(assemble_elliptic(*g, EllipticTensor::identity(2)), AssemblyError);
}

TEST(Assembly, LaplacianStencil) {
    const GridPtr g = line60();
    const Eigen::MatrixXd a = assemble_elliptic(*g, EllipticTensor::identity(1));
    EXPECT_EQ((a - a.transpose()).norm(), 0.0);
    EXPECT_NEAR(a(10, 10), 200.0, 1e-9);
    EXPECT_NEAR(a(10, 11), -100.0, 1e-9);
    EXPECT_NEAR(a.row(10).sum(), 0.0, 1e-9);
    EXPECT_EQ(a(10, 12), 0.0);
}

TEST(Spectral, PowersComposeAndSOneIsExact) {
    const GridPtr g = line60();
    const Eigen::MatrixXd a = assemble_elliptic(*g, EllipticTensor::parse("smooth-bump", 1));
    const SpectralOperator op = spectral_decompose(a, g->cell_volume());
    EXPECT_GT(op.eigenvalues().minCoeff(), 0.0);
    EXPECT_LT(op.reconstruction_error(), 1e-12);
    EXPECT_TRUE((op.power(1.0).array() == a.array()).all());
    const Eigen::MatrixXd half = op.power(0.5);
    EXPECT_LT((half * half - a).norm() / a.norm(), 1e-12);
    EXPECT_LT((half - half.transpose()).norm() / half.norm(), 1e-13);
    const Eigen::VectorXcd v = Eigen::VectorXcd::Random(g->size());
    EXPECT_LT((op.apply(0.3, v) - op.power(0.3) * v).norm(), 1e-10 * v.norm() * op.power(0.3).norm());
    EXPECT_THROW(op.power(0.0), std::invalid_argument);
    EXPECT_THROW(op.power(1.5), std::invalid_argument);
}

TEST(Kernel, PositiveSymmetricOffDiagonal) {
    const GridPtr g = line60();
    const SpectralOperator op = spectral_decompose(assemble_elliptic(*g, EllipticTensor::identity(1)), g->cell_volume());
    const KernelMatrix k = effective_kernel(op, *g, 0.5);
    for (Index i = 0; i < g->size(); i += 7)
        for (Index j = 0; j < g->size(); j += 5)
            if (i != j) { EXPECT_GT(k.values(i, j), 0.0); }
    EXPECT_LT((k.values - k.values.transpose()).norm() / k.values.norm(), 1e-12);
}

TEST(Norms, ConstantsAndScaling) {
    const GridPtr g = line60();
    const Eigen::VectorXcd one = Eigen::VectorXcd::Ones(g->size());
    EXPECT_NEAR(hs_seminorm(*g, one, 0.5, NormRegion::Box), 0.0, 1e-14);
    EXPECT_NEAR(l2_norm(*g, one, g->omega_nodes()), std::sqrt(2.0), 1e-12);
    const Eigen::VectorXcd v = Eigen::VectorXcd::Random(g->size());
    EXPECT_NEAR(hs_norm(*g, 3.0 * v, 0.5, NormRegion::Box), 3.0 * hs_norm(*g, v, 0.5, NormRegion::Box), 1e-10);
}

TEST(Bilinear, LinearInSecondArgumentWithoutConjugation) {
    const GridPtr g = line60();
    const SpectralOperator op = spectral_decompose(assemble_elliptic(*g, EllipticTensor::identity(1)), g->cell_volume());
    const Eigen::MatrixXd as = op.power(0.5);
    const Eigen::VectorXd q = Eigen::VectorXd::Constant(20, 0.4);
    const Eigen::VectorXcd u = Eigen::VectorXcd::Random(g->size());
    const Eigen::VectorXcd v = GridFunction::from_interior(g, Eigen::VectorXcd::Random(20)).values();
    const Eigen::VectorXcd w = GridFunction::from_interior(g, Eigen::VectorXcd::Random(20)).values();
    const Complex c(0.3, -1.2);
    const Complex lhs = bilinear(as, *g, q, 0.7, u, v + c * w);
    const Complex rhs = bilinear(as, *g, q, 0.7, u, v) + c * bilinear(as, *g, q, 0.7, u, w);
    EXPECT_LT(std::abs(lhs - rhs), 1e-10 * std::abs(lhs));
}

TEST(Source, EvaluationAndIncrement) {
    const Eigen::VectorXcd p0 = Eigen::VectorXcd::Constant(4, 1.0);
    const Eigen::VectorXcd p1 = Eigen::VectorXcd::Constant(4, Complex(0.0, 2.0));
    const FreqSource s = FreqSource::affine(p0, p1, 1.0);
    EXPECT_EQ((eval_source(s, 0.0) - p0).norm(), 0.0);
    EXPECT_LT((source_increment(s, 0.5) - 0.5 * p1).norm(), 1e-15);
    EXPECT_THROW(eval_source(s, 1.5), ContractError);
    EXPECT_THROW(FreqSource::affine(p0, Eigen::VectorXcd::Zero(3), 1.0), ContractError);
}
