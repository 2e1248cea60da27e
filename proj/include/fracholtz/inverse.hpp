#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fracholtz/asymptotics.hpp"
#include "fracholtz/errors.hpp"
#include "fracholtz/forward.hpp"
#include "fracholtz/parallel.hpp"

namespace fracholtz {

// ---------------------------------------------------------------------------
// Tikhonov least squares through one SVD
// ---------------------------------------------------------------------------

/// argmin ‖A x − b‖² + reg‖x‖² for many (b, reg). Singular values below the
/// numerical rank cutoff are dropped, so reg = 0 gives the minimum-norm solution.
class TikhonovSvd {
public:
    explicit TikhonovSvd(const Eigen::MatrixXd& a) : rows_(a.rows()) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        u_ = svd.matrixU();
        v_ = svd.matrixV();
        sigma_ = svd.singularValues();
        const double top = sigma_.size() ? sigma_(0) : 0.0;
        cutoff_ = top * std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(a.rows(), a.cols()));
    }

    [[nodiscard]] const Eigen::VectorXd& singular_values() const { return sigma_; }
    [[nodiscard]] double sigma_max() const { return sigma_.size() ? sigma_(0) : 0.0; }
    [[nodiscard]] double sigma_min() const { return sigma_.size() ? sigma_(sigma_.size() - 1) : 0.0; }

    [[nodiscard]] Index rank(double relative_tol) const {
        Index r = 0;
        for (Index k = 0; k < sigma_.size(); ++k)
            if (sigma_(k) > relative_tol * sigma_max()) ++r;
        return r;
    }

    [[nodiscard]] Eigen::VectorXcd solve(const Eigen::VectorXcd& rhs, double reg) const {
        Eigen::VectorXcd c = u_.transpose() * rhs;
        for (Index k = 0; k < sigma_.size(); ++k) c(k) *= filter(k, reg);
        return v_ * c;
    }

    /// Generalized cross-validation score ‖A x_reg − b‖² / (m − trace of the influence matrix)².
    [[nodiscard]] double gcv(const Eigen::VectorXcd& rhs, double reg) const {
        const Eigen::VectorXcd c = u_.transpose() * rhs;
        double resid = (rhs - u_ * c).squaredNorm();  // part outside range(A)
        double trace = 0.0;
        for (Index k = 0; k < sigma_.size(); ++k) {
            const double f = filter(k, reg) * sigma_(k);
            resid += (1.0 - f) * (1.0 - f) * std::norm(c(k));
            trace += f;
        }
        const double dof = static_cast<double>(rows_) - trace;
        return dof > 0.0 ? resid / (dof * dof) : std::numeric_limits<double>::infinity();
    }

private:
    [[nodiscard]] double filter(Index k, double reg) const {
        const double s = sigma_(k);
        if (s <= cutoff_) return 0.0;
        return s / (s * s + reg);
    }

    Index rows_;
    Eigen::MatrixXd u_, v_;
    Eigen::VectorXd sigma_;
    double cutoff_ = 0.0;
};

/// n logarithmically spaced values from hi down to lo (both included).
inline std::vector<double> reg_sweep(double lo, double hi, int n) {
    if (!(lo > 0.0 && hi >= lo) || n < 1) throw ContractError("reg sweep needs 0 < min <= max and at least one point");
    std::vector<double> g = geometric_grid(lo, hi, n);
    std::reverse(g.begin(), g.end());
    return g;
}

inline double relative_error(const Eigen::VectorXcd& estimate, const Eigen::VectorXcd& truth) {
    const double t = truth.norm();
    const double d = (estimate - truth).norm();
    return t > 0.0 ? d / t : d;
}

// ---------------------------------------------------------------------------
// Source recovery
// ---------------------------------------------------------------------------

/// ω = 0 measurement operator for one excitation: dtn(0, ψ) = M p + b.
struct SourceForwardMap {
    int excitation_id = 0;
    Eigen::MatrixXd matrix;   // |O2| × |Ω|
    Eigen::VectorXcd offset;  // zero-source response to ψ
};

inline SourceForwardMap build_source_map(const Scenario& sc, const GridFunction& psi, int excitation_id = 0) {
    const FractionalSystem& sys = *sc.system;
    const InteriorSolver solver(sys, sc.q, 0.0);
    SourceForwardMap map;
    map.excitation_id = excitation_id;
    // M = A_OI K⁻¹ with K symmetric
    map.matrix = solver.solve(Eigen::MatrixXd(sys.block_oi.transpose())).transpose();
    const Eigen::VectorXcd ext = exterior_values(psi);
    const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(sys.interior_size());
    map.offset = solver.measurement(solver.interior_solution(ext, zero), ext);
    return map;
}

struct SourceTruth {
    Eigen::VectorXcd p0;
    Eigen::VectorXcd p1;
};

struct RegSweepRow {
    double reg = 0.0;
    double residual0 = 0.0;  // relative ‖M p̂0 + b − d0‖ / ‖d0 − b‖ (absolute if that is zero)
    double residual1 = 0.0;  // relative ‖M p̂1 − d1‖ / ‖d1‖
    double error0 = std::numeric_limits<double>::quiet_NaN();
    double error1 = std::numeric_limits<double>::quiet_NaN();
    double gcv0 = 0.0;
    double gcv1 = 0.0;
};

struct SourceRecovery {
    int excitation_id = 0;
    int fit_degree = 2;
    double fit_residual = 0.0;
    Eigen::VectorXcd p0_hat;
    Eigen::VectorXcd p1_hat;
    Eigen::VectorXcd d2;   // stored for diagnostics only
    double reg0 = 0.0;
    double reg1 = 0.0;
    double residual0 = 0.0;
    double residual1 = 0.0;
    double sigma_max = 0.0;
    double sigma_min = 0.0;
    bool rank_deficient = false;
    std::string selection = "fixed";  // "fixed", "truth" (min error) or "gcv"
    std::vector<RegSweepRow> sweep;
    std::optional<SourceTruth> truth;

    [[nodiscard]] double error0() const { return truth ? relative_error(p0_hat, truth->p0) : std::nan(""); }
    [[nodiscard]] double error1() const { return truth ? relative_error(p1_hat, truth->p1) : std::nan(""); }
};

namespace detail {

inline double relative_residual(const Eigen::VectorXcd& r, const Eigen::VectorXcd& scale) {
    const double s = scale.norm();
    return s > 0.0 ? r.norm() / s : r.norm();
}

}  // namespace detail

/// p̂0, p̂1 from the ω⁰ and ω¹ Taylor coefficients of the DtN data of one
/// excitation. Every reg in `regs` is evaluated; the reported estimate is the
/// minimum-error reg when the truth is supplied, otherwise the GCV minimizer
/// (a single reg is used as given). p̂0 and p̂1 select their reg independently.
inline SourceRecovery recover_source(const std::vector<DtnRecord>& records, const SourceForwardMap& map,
                                     const std::vector<double>& regs, int degree = 2,
                                     std::optional<SourceTruth> truth = std::nullopt) {
    if (regs.empty()) throw ContractError("recover_source needs at least one reg value");
    for (double r : regs)
        if (!(r >= 0.0)) throw ContractError("reg must be nonnegative");
    if (records.size() < 4) throw ContractError("recover_source needs at least four frequencies");
    for (const auto& r : records)
        if (r.excitation_id != map.excitation_id) throw ContractError("records and source map use different excitations");
    if (records.front().measurement.size() != map.matrix.rows())
        throw ContractError("record length does not match the source map");

    const TaylorCoefficients fit = taylor_fit(records, degree);
    const Eigen::VectorXcd rhs0 = fit.d0() - map.offset;
    const Eigen::VectorXcd rhs1 = fit.d1();
    const TikhonovSvd tik(map.matrix);

    SourceRecovery out;
    out.excitation_id = map.excitation_id;
    out.fit_degree = degree;
    out.fit_residual = fit.residual;
    out.d2 = fit.d2();
    out.sigma_max = tik.sigma_max();
    out.sigma_min = tik.sigma_min();
    out.rank_deficient = out.sigma_min < 1e-12 * out.sigma_max;
    out.truth = truth;

    std::vector<Eigen::VectorXcd> est0, est1;
    for (double reg : regs) {
        RegSweepRow row;
        row.reg = reg;
        est0.push_back(tik.solve(rhs0, reg));
        est1.push_back(tik.solve(rhs1, reg));
        row.residual0 = detail::relative_residual(map.matrix * est0.back() - rhs0, rhs0);
        row.residual1 = detail::relative_residual(map.matrix * est1.back() - rhs1, rhs1);
        row.gcv0 = tik.gcv(rhs0, reg);
        row.gcv1 = tik.gcv(rhs1, reg);
        if (truth) {
            row.error0 = relative_error(est0.back(), truth->p0);
            row.error1 = relative_error(est1.back(), truth->p1);
        }
        out.sweep.push_back(row);
    }

    auto pick = [&](auto key) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < out.sweep.size(); ++k)
            if (key(out.sweep[k]) < key(out.sweep[best])) best = k;
        return best;
    };
    std::size_t k0 = 0, k1 = 0;
    if (regs.size() == 1) {
        out.selection = "fixed";
    } else if (truth) {
        out.selection = "truth";
        k0 = pick([](const RegSweepRow& r) { return r.error0; });
        k1 = pick([](const RegSweepRow& r) { return r.error1; });
    } else {
        out.selection = "gcv";
        k0 = pick([](const RegSweepRow& r) { return r.gcv0; });
        k1 = pick([](const RegSweepRow& r) { return r.gcv1; });
    }
    out.p0_hat = est0[k0];
    out.p1_hat = est1[k1];
    out.reg0 = regs[k0];
    out.reg1 = regs[k1];
    out.residual0 = out.sweep[k0].residual0;
    out.residual1 = out.sweep[k1].residual1;
    return out;
}

inline SourceRecovery recover_source(const std::vector<DtnRecord>& records, const SourceForwardMap& map, double reg,
                                     int degree = 2) {
    return recover_source(records, map, std::vector<double>{reg}, degree);
}

// ---------------------------------------------------------------------------
// Runge approximation
// ---------------------------------------------------------------------------

/// S: exterior data on O1 ↦ interior values of the solution of
/// (A^s u)_I + ω² q u_I = 0, u = ψ on O1, u = 0 on the rest of the exterior.
struct RungeOperator {
    GridPtr grid;
    Eigen::MatrixXd matrix;   // |Ω| × |O1|
    TikhonovSvd svd;
};

inline RungeOperator build_runge_operator(const Scenario& sc, double omega = 0.0) {
    const FractionalSystem& sys = *sc.system;
    const Grid& g = sc.grid();
    const InteriorSolver solver(sys, sc.q, omega);
    const Eigen::MatrixXd a_io = detail::submatrix(sys.power, g.omega_nodes(), g.o1_nodes());
    Eigen::MatrixXd s = -solver.solve(a_io);
    TikhonovSvd svd(s);
    return RungeOperator{sc.grid_ptr(), std::move(s), std::move(svd)};
}

struct RungeResult {
    double reg = 0.0;
    GridFunction psi;
    Eigen::VectorXcd u_eps;  // interior values
    double residual = 0.0;   // ‖u_eps − f‖_{L²(Ω)}
    double relative = 0.0;   // residual / ‖f‖_{L²(Ω)}
};

/// ψ = argmin ‖S ψ − f‖² + reg‖ψ‖² (nodal Euclidean norms).
inline RungeResult runge_approximate(const RungeOperator& op, const Eigen::VectorXcd& target, double reg) {
    const Grid& g = *op.grid;
    if (target.size() != op.matrix.rows()) throw ContractError("Runge target must have one value per omega node");
    const Eigen::VectorXcd coeff = op.svd.solve(target, reg);
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(g.size());
    const auto& o1 = g.o1_nodes();
    for (std::size_t k = 0; k < o1.size(); ++k) psi(o1[k]) = coeff(static_cast<Index>(k));
    Eigen::VectorXcd u = op.matrix * coeff;
    const double w = std::sqrt(g.cell_volume());
    const double res = (u - target).norm() * w;
    const double fn = target.norm() * w;
    return RungeResult{reg, GridFunction(op.grid, std::move(psi)), std::move(u), res, fn > 0.0 ? res / fn : res};
}

inline RungeResult runge_approximate(const Scenario& sc, const Eigen::VectorXcd& target, double reg) {
    return runge_approximate(build_runge_operator(sc), target, reg);
}

/// One result per reg, in the given order.
inline std::vector<RungeResult> runge_sweep(const RungeOperator& op, const Eigen::VectorXcd& target,
                                            const std::vector<double>& regs) {
    std::vector<RungeResult> out;
    out.reserve(regs.size());
    for (double r : regs) out.push_back(runge_approximate(op, target, r));
    return out;
}

// ---------------------------------------------------------------------------
// Potential recovery
// ---------------------------------------------------------------------------

/// Forward model q ↦ DtN data over a fixed (ω, ψ) design with a known source.
/// Predictions are stacked per (ω, ψ) block as [Re(m); Im(m)], ω-major.
class PotentialModel {
public:
    PotentialModel(SystemPtr system, FreqSource source, std::vector<double> omegas, std::vector<GridFunction> psis)
        : sys_(std::move(system)), source_(std::move(source)), omegas_(std::move(omegas)) {
        if (omegas_.empty() || psis.empty()) throw ContractError("potential model needs frequencies and excitations");
        for (const auto& p : psis) ext_.push_back(exterior_values(p));
        for (double w : omegas_) sources_.push_back(eval_source(source_, w));
    }

    [[nodiscard]] const FractionalSystem& system() const { return *sys_; }
    [[nodiscard]] const std::vector<double>& omegas() const { return omegas_; }
    [[nodiscard]] std::size_t excitation_count() const { return ext_.size(); }
    [[nodiscard]] Index block_size() const { return sys_->block_oi.rows(); }
    [[nodiscard]] Index data_size() const {
        return 2 * block_size() * static_cast<Index>(omegas_.size() * ext_.size());
    }

    /// Complex predictions [ω][ψ]; throws ResonanceError if q is resonant at some ω.
    [[nodiscard]] std::vector<std::vector<Eigen::VectorXcd>> predict(const Eigen::VectorXd& q) const {
        std::vector<std::vector<Eigen::VectorXcd>> out(omegas_.size());
        parallel_for(omegas_.size(), [&](std::size_t k) {
            const InteriorSolver solver(*sys_, q, omegas_[k]);
            for (const auto& ext : ext_)
                out[k].push_back(solver.measurement(solver.interior_solution(ext, sources_[k]), ext));
        });
        return out;
    }

    [[nodiscard]] Eigen::VectorXd stack(const std::vector<std::vector<Eigen::VectorXcd>>& blocks) const {
        Eigen::VectorXd v(data_size());
        const Index m = block_size();
        Index at = 0;
        for (const auto& per_omega : blocks)
            for (const auto& b : per_omega) {
                v.segment(at, m) = b.real();
                v.segment(at + m, m) = b.imag();
                at += 2 * m;
            }
        return v;
    }

    [[nodiscard]] Eigen::VectorXd stacked(const Eigen::VectorXd& q) const { return stack(predict(q)); }

    /// Materialized real Jacobian of stacked(q); ∂u_I/∂q_j = K⁻¹(−ω² e_j u_j).
    [[nodiscard]] Eigen::MatrixXd jacobian(const Eigen::VectorXd& q) const {
        const Index m = block_size();
        const Index n = sys_->interior_size();
        Eigen::MatrixXd jac(data_size(), n);
        Index at = 0;
        for (std::size_t k = 0; k < omegas_.size(); ++k) {
            const double w = omegas_[k];
            const InteriorSolver solver(*sys_, q, w);
            const Eigen::MatrixXd x = solver.solve(Eigen::MatrixXd(sys_->block_oi.transpose())).transpose();
            for (const auto& ext : ext_) {
                const Eigen::VectorXcd u = solver.interior_solution(ext, sources_[k]);
                for (Index j = 0; j < n; ++j) {
                    const Complex c = -w * w * u(j);
                    jac.block(at, j, m, 1) = x.col(j) * c.real();
                    jac.block(at + m, j, m, 1) = x.col(j) * c.imag();
                }
                at += 2 * m;
            }
        }
        return jac;
    }

    struct Linearization {
        double misfit = 0.0;      // ‖prediction − data‖²
        Eigen::MatrixXd normal;   // JᵀJ
        Eigen::VectorXd gradient; // Jᵀ r
    };

    /// JᵀJ and Jᵀr without forming J: per ω, JᵀJ = (XᵀX) ∘ Σ_ψ Re(c̄ cᵀ) with
    /// X = A_OI K⁻¹ and c = −ω² u_I; Jᵀr = Σ_ψ Re(c̄ ∘ Xᵀ r).
    [[nodiscard]] Linearization linearize(const Eigen::VectorXd& q,
                                          const std::vector<std::vector<Eigen::VectorXcd>>& data) const {
        const Index n = sys_->interior_size();
        std::vector<Linearization> parts(omegas_.size());
        parallel_for(omegas_.size(), [&](std::size_t k) {
            const double w = omegas_[k];
            const InteriorSolver solver(*sys_, q, w);
            const Eigen::MatrixXd x = solver.solve(Eigen::MatrixXd(sys_->block_oi.transpose())).transpose();
            Eigen::MatrixXd cc = Eigen::MatrixXd::Zero(n, n);
            Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
            double misfit = 0.0;
            for (std::size_t j = 0; j < ext_.size(); ++j) {
                const Eigen::VectorXcd u = solver.interior_solution(ext_[j], sources_[k]);
                const Eigen::VectorXcd r = solver.measurement(u, ext_[j]) - data[k][j];
                misfit += r.squaredNorm();
                const Eigen::VectorXcd c = (-w * w) * u;
                cc.noalias() += (c.conjugate() * c.transpose()).real();
                const Eigen::VectorXcd xr = x.transpose() * r;
                grad += (c.conjugate().array() * xr.array()).real().matrix();
            }
            parts[k].misfit = misfit;
            parts[k].normal = (x.transpose() * x).cwiseProduct(cc);
            parts[k].gradient = std::move(grad);
        });
        Linearization out{0.0, Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
        for (const auto& p : parts) {
            out.misfit += p.misfit;
            out.normal += p.normal;
            out.gradient += p.gradient;
        }
        return out;
    }

    [[nodiscard]] double misfit(const Eigen::VectorXd& q, const std::vector<std::vector<Eigen::VectorXcd>>& data) const {
        const auto pred = predict(q);
        double total = 0.0;
        for (std::size_t k = 0; k < pred.size(); ++k)
            for (std::size_t j = 0; j < pred[k].size(); ++j) total += (pred[k][j] - data[k][j]).squaredNorm();
        return total;
    }

private:
    SystemPtr sys_;
    FreqSource source_;
    std::vector<double> omegas_;
    std::vector<Eigen::VectorXcd> ext_;
    std::vector<Eigen::VectorXcd> sources_;
};

struct PotentialOptions {
    std::vector<double> regs{1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-10, 1e-12};  // continuation order
    int max_iterations = 50;
    double step_tol = 1e-8;
    double min_step_fraction = 1e-10;
};

struct PotentialStage {
    double reg = 0.0;
    int iterations = 0;
    double objective = 0.0;
    double misfit = 0.0;
    double last_step = 0.0;
    int rejected_resonant = 0;
    std::string status;  // "converged", "max-iterations" or "stalled"
    double error = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd q;
};

struct PotentialRecovery {
    Eigen::VectorXd q_hat;
    std::vector<PotentialStage> stages;
    std::optional<Eigen::VectorXd> truth;
    bool aborted = false;
    std::string diagnostics;
    /// Objective values of accepted steps across all stages, per stage.
    std::vector<std::vector<double>> objective_history;

    [[nodiscard]] double error() const {
        if (!truth) return std::nan("");
        return relative_error(Eigen::VectorXcd(q_hat.cast<Complex>()), Eigen::VectorXcd(truth->cast<Complex>()));
    }
};

/// Arranges records into the model's [ω][ψ] layout, matching (excitation id, ω) exactly.
inline std::vector<std::vector<Eigen::VectorXcd>> arrange_records(const std::vector<DtnRecord>& records,
                                                                  const std::vector<int>& excitation_ids,
                                                                  const std::vector<double>& omegas) {
    std::map<std::pair<int, double>, const DtnRecord*> index;
    for (const auto& r : records) index[{r.excitation_id, r.omega}] = &r;
    std::vector<std::vector<Eigen::VectorXcd>> out(omegas.size());
    for (std::size_t k = 0; k < omegas.size(); ++k)
        for (int id : excitation_ids) {
            const auto it = index.find({id, omegas[k]});
            if (it == index.end())
                throw ContractError("dataset has no record for excitation " + std::to_string(id) + " at omega " +
                                    std::to_string(omegas[k]));
            out[k].push_back(it->second->measurement);
        }
    return out;
}

/// Regularized Gauss–Newton fit of q, continued from the largest reg to the
/// smallest with warm starts; q_ref = 0. The reported q̂ is the last stage.
inline PotentialRecovery recover_potential(const PotentialModel& model,
                                           const std::vector<std::vector<Eigen::VectorXcd>>& data,
                                           const PotentialOptions& opts = {},
                                           std::optional<Eigen::VectorXd> truth = std::nullopt,
                                           std::optional<Eigen::VectorXd> q_init = std::nullopt) {
    const Index n = model.system().interior_size();
    if (opts.regs.empty()) throw ContractError("recover_potential needs at least one reg value");
    Eigen::VectorXd q = q_init ? *q_init : Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd q_ref = Eigen::VectorXd::Zero(n);
    PotentialRecovery out;
    out.truth = truth;

    auto objective = [&](const Eigen::VectorXd& v, double reg, double& misfit) {
        misfit = model.misfit(v, data);
        return misfit + reg * (v - q_ref).squaredNorm();
    };

    for (double reg : opts.regs) {
        PotentialStage st;
        st.reg = reg;
        std::vector<double> history;
        double misfit = 0.0;
        double f = objective(q, reg, misfit);
        history.push_back(f);
        int failures = 0;
        st.status = "max-iterations";
        for (int it = 0; it < opts.max_iterations; ++it) {
            st.iterations = it + 1;
            const auto lin = model.linearize(q, data);
            Eigen::MatrixXd hess = lin.normal;
            hess.diagonal().array() += reg;
            const Eigen::VectorXd grad = lin.gradient + reg * (q - q_ref);
            Eigen::VectorXd step;
            if (failures == 0) {
                Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
                step = -ldlt.solve(grad);
                if (ldlt.info() != Eigen::Success || !step.allFinite()) step = -grad;
            } else {
                // second attempt after a failed Gauss–Newton line search: steepest descent
                step = -grad / std::max(hess.diagonal().maxCoeff(), 1e-300);
            }
            if (step.norm() < opts.step_tol) {
                Eigen::VectorXd trial = q + step;
                double m2 = 0.0;
                try {
                    const double f2 = objective(trial, reg, m2);
                    if (f2 <= f) {
                        q = trial;
                        f = f2;
                        misfit = m2;
                        history.push_back(f);
                    }
                } catch (const ResonanceError&) {
                }
                st.last_step = step.norm();
                st.status = "converged";
                break;
            }
            double t = 1.0;
            bool accepted = false;
            while (t >= opts.min_step_fraction) {
                const Eigen::VectorXd trial = q + t * step;
                try {
                    double m2 = 0.0;
                    const double f2 = objective(trial, reg, m2);
                    if (f2 < f) {
                        q = trial;
                        f = f2;
                        misfit = m2;
                        accepted = true;
                        break;
                    }
                } catch (const ResonanceError&) {
                    ++st.rejected_resonant;
                }
                t *= 0.5;
            }
            if (!accepted) {
                if (++failures >= 2) {
                    st.status = "stalled";
                    break;
                }
                continue;
            }
            failures = 0;
            history.push_back(f);
            st.last_step = t * step.norm();
            if (st.last_step < opts.step_tol) {
                st.status = "converged";
                break;
            }
        }
        if (!q.allFinite()) throw NumericalError("potential recovery produced non-finite values");
        st.objective = f;
        st.misfit = misfit;
        st.q = q;
        if (truth)
            st.error = relative_error(Eigen::VectorXcd(q.cast<Complex>()), Eigen::VectorXcd(truth->cast<Complex>()));
        out.objective_history.push_back(std::move(history));
        out.stages.push_back(st);
        if (st.status == "stalled") {
            out.aborted = true;
            out.diagnostics = "objective did not decrease in two consecutive attempts at reg " + std::to_string(reg) +
                              " (iteration " + std::to_string(st.iterations) + ", objective " +
                              std::to_string(f) + ")";
            break;
        }
    }
    out.q_hat = q;
    return out;
}

// ---------------------------------------------------------------------------
// Discrete injectivity
// ---------------------------------------------------------------------------

struct InjectivityReport {
    Index rank = 0;
    Index interior_dim = 0;
    Index rows = 0;
    bool conclusive = false;
    bool full_rank = false;
    double tolerance = 1e-10;
    Eigen::VectorXd singular_values;
};

/// Rank of the source-to-measurement operator stacked over excitations. The ω = 0
/// source map does not depend on ψ, so extra excitations add rows but not rank.
inline InjectivityReport injectivity_check(const Scenario& sc, const std::vector<GridFunction>& excitations,
                                           double tolerance = 1e-10) {
    if (excitations.empty()) throw ContractError("injectivity_check needs at least one excitation");
    std::vector<Eigen::MatrixXd> blocks;
    Index rows = 0;
    for (const auto& psi : excitations) {
        blocks.push_back(build_source_map(sc, psi).matrix);
        rows += blocks.back().rows();
    }
    const Index n = sc.system->interior_size();
    Eigen::MatrixXd stacked(rows, n);
    Index at = 0;
    for (const auto& b : blocks) {
        stacked.middleRows(at, b.rows()) = b;
        at += b.rows();
    }
    InjectivityReport rep;
    rep.tolerance = tolerance;
    rep.interior_dim = n;
    rep.rows = rows;
    rep.conclusive = rows >= n;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(stacked);
    rep.singular_values = svd.singularValues();
    const double top = rep.singular_values.size() ? rep.singular_values(0) : 0.0;
    for (Index k = 0; k < rep.singular_values.size(); ++k)
        if (rep.singular_values(k) > tolerance * top) ++rep.rank;
    rep.full_rank = rep.rank == n;
    return rep;
}

inline InjectivityReport injectivity_check(const Scenario& sc, double tolerance = 1e-10) {
    return injectivity_check(sc, {GridFunction::zeros(sc.grid_ptr())}, tolerance);
}

// ---------------------------------------------------------------------------
// Measurement noise
// ---------------------------------------------------------------------------

/// Adds seeded Gaussian noise with per-record standard deviation
/// level·‖m‖/√(2·len) on each real component (so ‖noise‖ ≈ level·‖m‖).
inline void add_noise(std::vector<DtnRecord>& records, double level, std::uint64_t seed) {
    if (level < 0.0) throw ContractError("noise level must be nonnegative");
    if (level == 0.0) return;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& r : records) {
        const double sd = level * r.measurement.norm() / std::sqrt(2.0 * static_cast<double>(r.measurement.size()));
        for (Index k = 0; k < r.measurement.size(); ++k) {
            const double a = normal(rng);
            const double b = normal(rng);
            r.measurement(k) += Complex(sd * a, sd * b);
        }
    }
}

}  // namespace fracholtz
