#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fracholtz/errors.hpp"
#include "fracholtz/fracop.hpp"
#include "fracholtz/grid.hpp"
#include "fracholtz/source.hpp"

namespace fracholtz {

// ---------------------------------------------------------------------------
// Assembled fractional system
// ---------------------------------------------------------------------------

/// Grid, σ, s and the dense A^s with the blocks the exterior-value problem uses.
/// Immutable after construction and shared between scenarios that differ only
/// in q or the source.
struct FractionalSystem {
    GridPtr grid;
    EllipticTensor sigma;
    double s = 0.5;
    std::shared_ptr<const SpectralOperator> op;
    Eigen::MatrixXd power;       // A^s on all box nodes
    Eigen::MatrixXd block_ii;    // Ω × Ω
    Eigen::MatrixXd block_ie;    // Ω × exterior
    Eigen::MatrixXd block_oi;    // O2 × Ω
    Eigen::MatrixXd block_oe;    // O2 × exterior

    [[nodiscard]] const Grid& mesh() const { return *grid; }
    [[nodiscard]] Index interior_size() const { return block_ii.rows(); }
};

using SystemPtr = std::shared_ptr<const FractionalSystem>;

inline SystemPtr make_system(GridPtr grid, const EllipticTensor& sigma, double s,
                             std::shared_ptr<const SpectralOperator> op = nullptr) {
    if (!(s > 0.0 && s < 1.0)) throw ContractError("fractional order s must lie in (0, 1)");
    if (!op) op = std::make_shared<const SpectralOperator>(
                 spectral_decompose(assemble_elliptic(*grid, sigma), grid->cell_volume()));
    auto sys = std::make_shared<FractionalSystem>(FractionalSystem{grid, sigma, s, op, {}, {}, {}, {}, {}});
    sys->power = op->power(s);
    const auto& in = grid->omega_nodes();
    const auto& ex = grid->exterior_nodes();
    const auto& o2 = grid->o2_nodes();
    sys->block_ii = detail::submatrix(sys->power, in, in);
    sys->block_ie = detail::submatrix(sys->power, in, ex);
    sys->block_oi = detail::submatrix(sys->power, o2, in);
    sys->block_oe = detail::submatrix(sys->power, o2, ex);
    return sys;
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// One problem instance (σ, q, p, s, ω0) on a grid.
struct Scenario {
    SystemPtr system;
    Eigen::VectorXd q;   // real, ordered as omega_nodes()
    FreqSource source;
    double omega0 = 1.0;
    std::string label;

    [[nodiscard]] const Grid& grid() const { return *system->grid; }
    [[nodiscard]] const GridPtr& grid_ptr() const { return system->grid; }
    [[nodiscard]] double s() const { return system->s; }
    [[nodiscard]] double q_sup() const { return q.size() ? q.cwiseAbs().maxCoeff() : 0.0; }

    [[nodiscard]] Scenario with_q(Eigen::VectorXd new_q) const {
        Scenario copy = *this;
        copy.q = std::move(new_q);
        copy.validate();
        return copy;
    }

    void validate() const {
        if (!system) throw ContractError("scenario without an assembled system");
        if (q.size() != system->interior_size()) throw ContractError("q must have one value per omega node");
        if (!q.allFinite()) throw ContractError("q must be bounded");
        if (source.size() != system->interior_size()) throw ContractError("source size must match omega nodes");
        source.validate();
        if (!(omega0 > 0.0)) throw ContractError("omega0 must be positive");
    }
};

inline Scenario make_scenario(SystemPtr system, Eigen::VectorXd q, FreqSource source, double omega0,
                              std::string label = {}) {
    Scenario sc{std::move(system), std::move(q), std::move(source), omega0, std::move(label)};
    sc.validate();
    return sc;
}

// ---------------------------------------------------------------------------
// Interior solves
// ---------------------------------------------------------------------------

inline Eigen::MatrixXd interior_operator(const FractionalSystem& sys, const Eigen::VectorXd& q, double omega) {
    Eigen::MatrixXd k = sys.block_ii;
    k.diagonal() += (omega * omega) * q;
    return k;
}

/// Minimum |eigenvalue| of (A^s)_II + ω² diag(q). Zero (up to 1e-12·‖block‖)
/// means the homogeneous exterior-value problem has a nontrivial solution.
inline double check_eigen_condition(const FractionalSystem& sys, const Eigen::VectorXd& q, double omega) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(interior_operator(sys, q, omega), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().minCoeff();
}

inline double check_eigen_condition(const Scenario& sc, double omega) {
    return check_eigen_condition(*sc.system, sc.q, omega);
}

inline bool eigen_condition_holds(double min_modulus, double block_norm) {
    return min_modulus > 1e-12 * block_norm;
}

/// Factorized interior system for one (q, ω); reusable across many ψ and p.
class InteriorSolver {
public:
    InteriorSolver(const FractionalSystem& sys, const Eigen::VectorXd& q, double omega) : sys_(&sys), omega_(omega) {
        if (q.size() != sys.interior_size()) throw ContractError("q must have one value per omega node");
        Eigen::MatrixXd k = interior_operator(sys, q, omega);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
        min_modulus_ = es.eigenvalues().cwiseAbs().minCoeff();
        const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
        if (!eigen_condition_holds(min_modulus_, scale))
            throw ResonanceError("interior operator is singular at omega = " + std::to_string(omega) +
                                 " (eigenvalue condition violated)");
        lu_.compute(k);
        k_ = std::move(k);
    }

    [[nodiscard]] double omega() const { return omega_; }
    [[nodiscard]] double min_eigen_modulus() const { return min_modulus_; }
    [[nodiscard]] const Eigen::MatrixXd& matrix() const { return k_; }

    [[nodiscard]] Eigen::VectorXcd solve(const Eigen::VectorXcd& rhs) const {
        Eigen::VectorXcd x(rhs.size());
        x.real() = lu_.solve(Eigen::VectorXd(rhs.real()));
        x.imag() = lu_.solve(Eigen::VectorXd(rhs.imag()));
        return x;
    }
    [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return lu_.solve(rhs); }

    /// Interior values of the solution with exterior data psi_ext (ordered as
    /// exterior_nodes()) and interior source p.
    [[nodiscard]] Eigen::VectorXcd interior_solution(const Eigen::VectorXcd& psi_ext, const Eigen::VectorXcd& p) const {
        if (p.size() != sys_->interior_size()) throw ContractError("source length must equal the omega node count");
        Eigen::VectorXcd rhs = p;
        if (psi_ext.size() != 0) rhs -= sys_->block_ie * psi_ext;
        return solve(rhs);
    }

    /// (A^s u)|_{O2} for u = u_I on Ω and psi_ext outside.
    [[nodiscard]] Eigen::VectorXcd measurement(const Eigen::VectorXcd& u_interior, const Eigen::VectorXcd& psi_ext) const {
        Eigen::VectorXcd m = sys_->block_oi * u_interior;
        if (psi_ext.size() != 0) m += sys_->block_oe * psi_ext;
        return m;
    }

private:
    const FractionalSystem* sys_;
    double omega_;
    double min_modulus_ = 0.0;
    Eigen::MatrixXd k_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

inline Eigen::VectorXcd exterior_values(const GridFunction& psi) {
    if (!psi.is_exterior_supported()) throw ContractError("exterior data must vanish on omega nodes");
    return psi.restrict_to(psi.grid().exterior_nodes());
}

inline GridFunction assemble_solution(const GridFunction& psi, const Eigen::VectorXcd& u_interior) {
    Eigen::VectorXcd u = psi.values();
    const auto& in = psi.grid().omega_nodes();
    for (std::size_t k = 0; k < in.size(); ++k) u(in[k]) = u_interior(static_cast<Index>(k));
    return GridFunction(psi.grid_ptr(), std::move(u));
}

/// Solves (A^s u)_I + ω² q u_I = p_I with u = ψ on every exterior node.
inline GridFunction solve_exterior_dirichlet(const Scenario& sc, double omega, const GridFunction& psi,
                                             const Eigen::VectorXcd& p) {
    const InteriorSolver solver(*sc.system, sc.q, omega);
    return assemble_solution(psi, solver.interior_solution(exterior_values(psi), p));
}

/// Relative residual ‖(A^s u)_I + ω² q u_I − p‖ / (‖(A^s u)_I‖ + ω²‖q u_I‖ + ‖p‖).
inline double solve_residual(const Scenario& sc, double omega, const GridFunction& u, const Eigen::VectorXcd& p) {
    const auto& in = sc.grid().omega_nodes();
    const Eigen::VectorXcd au = detail::gather(Eigen::VectorXcd(sc.system->power * u.values()), in);
    const Eigen::VectorXcd ui = u.interior();
    const Eigen::VectorXcd mass = (omega * omega) * (sc.q.array() * ui.array()).matrix();
    const double denom = au.norm() + mass.norm() + p.norm();
    if (denom == 0.0) return 0.0;
    return (au + mass - p).norm() / denom;
}

// ---------------------------------------------------------------------------
// DtN data
// ---------------------------------------------------------------------------

/// Raw nodal values of (A^s u) on the O2 nodes for one (excitation, ω).
struct DtnRecord {
    int excitation_id = 0;
    double omega = 0.0;
    Eigen::VectorXcd measurement;
};

inline DtnRecord dtn(const Scenario& sc, double omega, const GridFunction& psi, int excitation_id = 0) {
    const Eigen::VectorXcd p = eval_source(sc.source, omega);
    const InteriorSolver solver(*sc.system, sc.q, omega);
    const Eigen::VectorXcd ext = exterior_values(psi);
    return DtnRecord{excitation_id, omega, solver.measurement(solver.interior_solution(ext, p), ext)};
}

/// Same measurement with an explicit interior source.
inline DtnRecord dtn_with_source(const Scenario& sc, double omega, const GridFunction& psi, const Eigen::VectorXcd& p,
                                 int excitation_id = 0) {
    const InteriorSolver solver(*sc.system, sc.q, omega);
    const Eigen::VectorXcd ext = exterior_values(psi);
    return DtnRecord{excitation_id, omega, solver.measurement(solver.interior_solution(ext, p), ext)};
}

struct SymmetryCheck {
    Complex lhs;
    Complex rhs;
    double gap = 0.0;  // relative
};

/// Pairings ℬ_{ω,q}(u_ψ, h) and ℬ_{ω,q}(u_h, ψ) with u_ψ, u_h solving with source p.
inline SymmetryCheck dtn_symmetry_check(const Scenario& sc, double omega, const GridFunction& psi,
                                        const GridFunction& h, const Eigen::VectorXcd& p) {
    const InteriorSolver solver(*sc.system, sc.q, omega);
    const Eigen::VectorXcd psi_e = exterior_values(psi);
    const Eigen::VectorXcd h_e = exterior_values(h);
    const GridFunction u_psi = assemble_solution(psi, solver.interior_solution(psi_e, p));
    const GridFunction u_h = assemble_solution(h, solver.interior_solution(h_e, p));
    SymmetryCheck out;
    out.lhs = bilinear(sc.system->power, sc.grid(), sc.q, omega, u_psi.values(), h.values());
    out.rhs = bilinear(sc.system->power, sc.grid(), sc.q, omega, u_h.values(), psi.values());
    const double scale = std::max(std::abs(out.lhs), std::abs(out.rhs));
    out.gap = scale > 0.0 ? std::abs(out.lhs - out.rhs) / scale : 0.0;
    return out;
}

inline SymmetryCheck dtn_symmetry_check(const Scenario& sc, double omega, const GridFunction& psi,
                                        const GridFunction& h) {
    return dtn_symmetry_check(sc, omega, psi, h, eval_source(sc.source, omega));
}

// ---------------------------------------------------------------------------
// Random smooth probes
// ---------------------------------------------------------------------------

/// C_c^∞ bump exp(1 − 1/(1 − (r/w)²)) for r < w (peak value 1).
inline double smooth_bump(double r, double width) {
    const double t = r / width;
    if (t >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - t * t));
}

/// Bump centered at `center`, restricted to the nodes of `support` (other nodes zero).
inline GridFunction bump_on(GridPtr grid, const Point& center, double width, const std::vector<bool>& support,
                            Complex amplitude = 1.0) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(grid->size());
    for (Index i = 0; i < grid->size(); ++i) {
        if (!support[static_cast<std::size_t>(i)]) continue;
        const auto& x = grid->node(i);
        double r2 = 0.0;
        for (int k = 0; k < grid->dim(); ++k) r2 += (x[k] - center[k]) * (x[k] - center[k]);
        v(i) = amplitude * smooth_bump(std::sqrt(r2), width);
    }
    return GridFunction(std::move(grid), std::move(v));
}

/// Random exterior data: a normal-weighted sum of three bumps centered at random O1 nodes.
inline GridFunction random_exterior_data(const GridPtr& grid, std::mt19937_64& rng, double width) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto& o1 = grid->o1_nodes();
    std::uniform_int_distribution<std::size_t> pick(0, o1.size() - 1);
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(grid->size());
    for (int k = 0; k < 3; ++k) {
        const Point c = grid->node(o1[pick(rng)]);
        const Complex a(normal(rng), normal(rng));
        v += bump_on(grid, c, width, grid->o1_mask(), a).values();
    }
    return GridFunction(grid, std::move(v));
}

/// Random smooth interior source: sum of four plane waves with random phases.
inline Eigen::VectorXcd random_interior_source(const Grid& grid, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto& in = grid.omega_nodes();
    Eigen::VectorXcd p = Eigen::VectorXcd::Zero(static_cast<Index>(in.size()));
    for (int k = 0; k < 4; ++k) {
        const Complex a(normal(rng), normal(rng));
        std::array<double, 2> wave{3.0 * unif(rng), 3.0 * unif(rng)};
        const double phase = 6.283185307179586 * unif(rng);
        for (std::size_t j = 0; j < in.size(); ++j) {
            const auto& x = grid.node(in[j]);
            double arg = phase;
            for (int d = 0; d < grid.dim(); ++d) arg += wave[static_cast<std::size_t>(d)] * x[d];
            p(static_cast<Index>(j)) += a * std::cos(arg);
        }
    }
    return p;
}

struct StabilityProbe {
    double max_ratio = 0.0;
    std::vector<double> ratios;
};

/// max over seeded trials of ‖u‖_{H^s(box)} / (‖p‖_{L²(Ω)} + ‖ψ‖_{H^s(box)}).
inline StabilityProbe stability_ratio(const Scenario& sc, double omega, int trials, std::uint64_t seed,
                                      double bump_width = 0.3) {
    const InteriorSolver solver(*sc.system, sc.q, omega);
    std::mt19937_64 rng(seed);
    const Grid& g = sc.grid();
    StabilityProbe out;
    for (int t = 0; t < trials; ++t) {
        const GridFunction psi = random_exterior_data(sc.grid_ptr(), rng, bump_width);
        const Eigen::VectorXcd p = random_interior_source(g, rng);
        const GridFunction u = assemble_solution(psi, solver.interior_solution(exterior_values(psi), p));
        const double denom = l2_norm(g, GridFunction::from_interior(sc.grid_ptr(), p).values(), g.omega_nodes()) +
                             hs_norm(g, psi.values(), sc.s(), NormRegion::Box);
        if (denom == 0.0) continue;
        const double ratio = hs_norm(g, u.values(), sc.s(), NormRegion::Box) / denom;
        out.ratios.push_back(ratio);
        out.max_ratio = std::max(out.max_ratio, ratio);
    }
    return out;
}

}  // namespace fracholtz
