#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracholtz/errors.hpp"
#include "fracholtz/forward.hpp"
#include "fracholtz/parallel.hpp"
#include "fracholtz/source.hpp"

namespace fracholtz {

// ---------------------------------------------------------------------------
// Frequency grids and sweeps
// ---------------------------------------------------------------------------

/// n geometrically spaced points in [lo, hi] (endpoints included).
inline std::vector<double> geometric_grid(double lo, double hi, int n) {
    if (n < 1 || !(lo > 0.0) || !(hi >= lo)) throw ContractError("geometric_grid needs 0 < lo <= hi and n >= 1");
    std::vector<double> out(static_cast<std::size_t>(n));
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    const double step = std::log(hi / lo) / (n - 1);
    for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = lo * std::exp(step * k);
    out.back() = hi;
    return out;
}

/// DtN records for one excitation over a frequency list, in the given order.
inline std::vector<DtnRecord> sweep(const Scenario& sc, const GridFunction& psi, const std::vector<double>& omegas,
                                    int excitation_id = 0) {
    std::vector<DtnRecord> out(omegas.size());
    parallel_for(omegas.size(), [&](std::size_t k) { out[k] = dtn(sc, omegas[k], psi, excitation_id); });
    return out;
}

// ---------------------------------------------------------------------------
// Zero-frequency problem and the constants of the low-frequency estimate
// ---------------------------------------------------------------------------

/// u(·,0): (A^s u)_I = p0, u = ψ outside Ω. q drops out.
inline GridFunction solve_zero_frequency(const Scenario& sc, const GridFunction& psi) {
    const InteriorSolver solver(*sc.system, sc.q, 0.0);
    return assemble_solution(psi, solver.interior_solution(exterior_values(psi), sc.source.p0));
}

struct EstimateConstants {
    double c0 = 0.0;
    double c1 = 0.0;
    double alpha0 = 0.0;
    double alpha_upper = 0.0;   // 2 c0² c1 / (1 + c0)²
    double margin = 10.0;       // D = Ω ∪ {nodes ≥ margin·h from the box edge}
    std::size_t d_nodes = 0;
    /// Off-diagonal A^s ≤ 0 and nonnegative row sums on D: the sign conditions
    /// under which ⟨A^s v, v⟩h^dim dominates c1 times the discrete seminorm.
    bool chain_valid = false;
};

/// c0, c1, α0 for the scenario's operator.
///
/// c1 is the smallest kernel value K̂/2 · |x−y|^{n+2s} over pairs (x ∈ Ω, y ∈ D).
/// c0 is the discrete embedding constant: c0² = min over interior-supported v of
/// |v|²_{H^s(D)} / ‖v‖²_{L²}, a generalized eigenproblem of the seminorm form.
/// Seminorms over Ω alone vanish on constants, so D extends Ω by the far-field nodes.
inline EstimateConstants estimate_constants(const FractionalSystem& sys, double margin = 10.0) {
    const Grid& g = *sys.grid;
    const auto& in = g.omega_nodes();
    if (in.size() < 2) throw GeometryError("estimate_constants needs at least two omega nodes");
    const double h = g.spacing();
    const double vol = g.cell_volume();
    const double expo = g.dim() + 2.0 * sys.s;

    std::vector<Index> d_nodes;
    for (Index i = 0; i < g.size(); ++i)
        if (g.omega_mask()[static_cast<std::size_t>(i)] || g.distance_to_box(i) >= margin * h - 1e-9 * h)
            d_nodes.push_back(i);
    if (d_nodes.size() == in.size())
        throw NumericalError("no exterior node lies at least margin*h from the box edge; enlarge the box");

    EstimateConstants out;
    out.margin = margin;
    out.d_nodes = d_nodes.size();

    // c1 and the sign conditions
    double c1 = std::numeric_limits<double>::infinity();
    bool signs = true;
    for (Index i : in) {
        for (Index j : d_nodes) {
            if (i == j) continue;
            const double k = -sys.power(i, j) / (2.0 * vol);
            c1 = std::min(c1, k * std::pow(g.distance(i, j), expo));
        }
    }
    for (Index i : d_nodes) {
        double row = 0.0;
        for (Index j = 0; j < g.size(); ++j) {
            row += sys.power(i, j);
            if (j != i && sys.power(i, j) > 1e-14 * sys.power(i, i)) signs = false;
        }
        if (row < -1e-12 * sys.power(i, i)) signs = false;
    }

    // seminorm form over D restricted to interior-supported vectors:
    // |v|² = Σ_{i,j∈D, i≠j} |v_i − v_j|² w_ij = vᵀ G v with G = 2(diag(Σ_j w_ij) − W)
    const auto n_in = static_cast<Index>(in.size());
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n_in, n_in);
    for (Index a = 0; a < n_in; ++a) {
        const Index i = in[static_cast<std::size_t>(a)];
        double rowsum = 0.0;
        for (Index j : d_nodes) {
            if (j == i) continue;
            const double w = vol * vol / std::pow(g.distance(i, j), expo);
            rowsum += w;
            const Index b = g.omega_position(j);
            if (b >= 0) gram(a, b) -= 2.0 * w;
        }
        gram(a, a) += 2.0 * rowsum;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
    const double lam = es.eigenvalues().minCoeff();
    if (!(lam > 0.0)) throw NumericalError("embedding constant is not positive");

    out.c0 = std::sqrt(lam / vol);
    out.c1 = c1;
    out.alpha_upper = 2.0 * out.c0 * out.c0 * c1 / ((1.0 + out.c0) * (1.0 + out.c0));
    out.alpha0 = 0.5 * out.alpha_upper;
    out.chain_valid = signs && c1 > 0.0;
    return out;
}

inline EstimateConstants estimate_constants(const Scenario& sc, double margin = 10.0) {
    return estimate_constants(*sc.system, margin);
}

// ---------------------------------------------------------------------------
// Low-frequency report
// ---------------------------------------------------------------------------

struct AsymptoticsReport {
    std::vector<double> omegas;
    std::vector<double> gap;
    std::vector<double> bound;      // NaN where the radicand is not positive
    std::vector<double> radicand;
    std::vector<bool> usable;
    EstimateConstants constants;
    double q_sup = 0.0;
    double slope = std::numeric_limits<double>::quiet_NaN();
    /// gap at the smallest ω divided by gap at the largest ω.
    double decay_ratio = std::numeric_limits<double>::quiet_NaN();

    [[nodiscard]] bool bound_holds() const {
        for (std::size_t k = 0; k < omegas.size(); ++k)
            if (usable[k] && !(gap[k] <= bound[k])) return false;
        return true;
    }
    [[nodiscard]] std::size_t usable_count() const {
        return static_cast<std::size_t>(std::count(usable.begin(), usable.end(), true));
    }
};

/// Least-squares slope of log y against log x over entries with x, y > 0.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!(x[k] > 0.0 && y[k] > 0.0)) continue;
        const double lx = std::log(x[k]);
        const double ly = std::log(y[k]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    const double den = n * sxx - sx * sx;
    if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (n * sxy - sx * sy) / den;
}

/// gap(ω) = ‖u(·,ω) − u(·,0)‖_{H^s(Ω)} against the explicit bound
///   C̃(ω) (‖p̃‖²/α0 + ω²‖q‖_∞‖u(·,0)‖²)^{1/2},  C̃(ω) = (2c0²c1/(1+c0)² − α0 − 3ω²‖q‖_∞)^{−1/2}.
inline AsymptoticsReport low_freq_report(const Scenario& sc, const GridFunction& psi, std::vector<double> omegas,
                                         std::optional<EstimateConstants> constants = std::nullopt) {
    if (omegas.empty()) throw ContractError("low_freq_report needs at least one frequency");
    std::sort(omegas.begin(), omegas.end());
    for (double w : omegas)
        if (!(w > 0.0 && w <= sc.omega0)) throw ContractError("frequencies must lie in (0, omega0]");

    const Grid& g = sc.grid();
    const auto& in = g.omega_nodes();
    AsymptoticsReport rep;
    rep.constants = constants ? *constants : estimate_constants(sc);
    rep.q_sup = sc.q_sup();
    rep.omegas = omegas;
    const std::size_t n = omegas.size();
    rep.gap.assign(n, 0.0);
    rep.bound.assign(n, std::numeric_limits<double>::quiet_NaN());
    rep.radicand.assign(n, 0.0);
    rep.usable.assign(n, false);

    const GridFunction u0 = solve_zero_frequency(sc, psi);
    const double u0_l2 = l2_norm(g, u0.values(), in);
    const Eigen::VectorXcd ext = exterior_values(psi);
    const auto& c = rep.constants;

    std::vector<double> increment(n, 0.0);
    parallel_for(n, [&](std::size_t k) {
        const double w = omegas[k];
        const InteriorSolver solver(*sc.system, sc.q, w);
        const GridFunction u = assemble_solution(psi, solver.interior_solution(ext, eval_source(sc.source, w)));
        rep.gap[k] = hs_norm(g, u.values() - u0.values(), sc.s(), NormRegion::Omega);
        increment[k] = source_increment(sc.source, w).norm() * std::sqrt(g.cell_volume());
    });
    for (std::size_t k = 0; k < n; ++k) {
        const double w = omegas[k];
        const double rad = c.alpha_upper - (c.alpha0 + 3.0 * w * w * rep.q_sup);
        rep.radicand[k] = rad;
        if (rad > 0.0 && c.alpha0 > 0.0) {
            rep.usable[k] = true;
            const double pt = increment[k];
            rep.bound[k] = std::sqrt(pt * pt / c.alpha0 + w * w * rep.q_sup * u0_l2 * u0_l2) / std::sqrt(rad);
        }
    }

    rep.slope = loglog_slope(rep.omegas, rep.gap);
    if (rep.gap.back() > 0.0) rep.decay_ratio = rep.gap.front() / rep.gap.back();
    else if (rep.gap.front() == 0.0) rep.decay_ratio = 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Taylor fit of DtN data in ω
// ---------------------------------------------------------------------------

struct TaylorCoefficients {
    int degree = 2;
    std::vector<double> omegas;              // sorted
    std::vector<Eigen::VectorXcd> coeffs;    // coeffs[k] multiplies ω^k, k = 0..degree
    double residual = 0.0;                   // relative LS residual

    [[nodiscard]] Eigen::VectorXcd d(int k) const {
        if (k <= degree) return coeffs[static_cast<std::size_t>(k)];
        return Eigen::VectorXcd::Zero(coeffs.front().size());
    }
    [[nodiscard]] Eigen::VectorXcd d0() const { return d(0); }
    [[nodiscard]] Eigen::VectorXcd d1() const { return d(1); }
    [[nodiscard]] Eigen::VectorXcd d2() const { return d(2); }
};

/// Least-squares polynomial fit of every measurement channel in ω. Frequencies
/// are scaled by their maximum before building the Vandermonde matrix.
inline TaylorCoefficients taylor_fit(std::vector<DtnRecord> records, int degree = 2) {
    if (degree < 1) throw ContractError("taylor_fit degree must be >= 1");
    if (static_cast<int>(records.size()) < degree + 2)
        throw ContractError("taylor_fit needs at least degree+2 frequencies");
    std::sort(records.begin(), records.end(), [](const DtnRecord& a, const DtnRecord& b) { return a.omega < b.omega; });
    const int id = records.front().excitation_id;
    const Index m = records.front().measurement.size();
    for (std::size_t k = 0; k < records.size(); ++k) {
        if (records[k].excitation_id != id) throw ContractError("taylor_fit records must share one excitation");
        if (records[k].measurement.size() != m) throw ContractError("taylor_fit records differ in length");
        if (!(records[k].omega > 0.0)) throw ContractError("taylor_fit frequencies must be positive");
        if (k > 0 && records[k].omega == records[k - 1].omega) throw ContractError("taylor_fit: duplicate frequency");
    }
    const auto nf = static_cast<Index>(records.size());
    const double scale = records.back().omega;
    Eigen::MatrixXd vander(nf, degree + 1);
    Eigen::MatrixXd re(nf, m), im(nf, m);
    TaylorCoefficients out;
    out.degree = degree;
    for (Index k = 0; k < nf; ++k) {
        const auto& r = records[static_cast<std::size_t>(k)];
        out.omegas.push_back(r.omega);
        double t = 1.0;
        for (int j = 0; j <= degree; ++j, t *= r.omega / scale) vander(k, j) = t;
        re.row(k) = r.measurement.real().transpose();
        im.row(k) = r.measurement.imag().transpose();
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(vander);
    const Eigen::MatrixXd cr = qr.solve(re);
    const Eigen::MatrixXd ci = qr.solve(im);
    double fit_err = (vander * cr - re).squaredNorm() + (vander * ci - im).squaredNorm();
    double data_norm = re.squaredNorm() + im.squaredNorm();
    out.residual = data_norm > 0.0 ? std::sqrt(fit_err / data_norm) : 0.0;
    double unscale = 1.0;
    for (int j = 0; j <= degree; ++j, unscale /= scale) {
        Eigen::VectorXcd c(m);
        c.real() = cr.row(j).transpose() * unscale;
        c.imag() = ci.row(j).transpose() * unscale;
        out.coeffs.push_back(std::move(c));
    }
    return out;
}

}  // namespace fracholtz
