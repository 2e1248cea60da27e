#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <functional>
#include <numbers>
#include <optional>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fracholtz/errors.hpp"
#include "fracholtz/grid.hpp"

namespace fracholtz {

// ---------------------------------------------------------------------------
// Elliptic tensor σ(x)
// ---------------------------------------------------------------------------

/// Symmetric positive-definite coefficient field of L_σ = -∇·(σ∇).
/// Only the leading dim×dim block of the returned matrix is used.
class EllipticTensor {
public:
    using Field = std::function<Eigen::Matrix2d(const Point&)>;

    EllipticTensor(std::string name, int dim, Field field)
        : name_(std::move(name)), dim_(dim), field_(std::move(field)) {}

    [[nodiscard]] const std::string& name() const { return name_; }
    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] Eigen::Matrix2d at(const Point& x) const { return field_(x); }

    static EllipticTensor identity(int dim) { return scalar(dim, 1.0, "identity"); }

    static EllipticTensor scalar(int dim, double c, std::string name = {}) {
        if (name.empty()) name = "scalar(" + format_number(c) + ")";
        return EllipticTensor(std::move(name), dim, [c](const Point&) {
            return Eigen::Matrix2d((Eigen::Matrix2d() << c, 0.0, 0.0, c).finished());
        });
    }

    static EllipticTensor diagonal(int dim, std::vector<double> d) {
        if (static_cast<int>(d.size()) != dim) throw AssemblyError("diag(...) needs one entry per dimension");
        std::string name = "diag(";
        for (std::size_t k = 0; k < d.size(); ++k) name += (k ? "," : "") + format_number(d[k]);
        name += ")";
        const double a = d[0];
        const double b = dim == 2 ? d[1] : 1.0;
        return EllipticTensor(std::move(name), dim, [a, b](const Point&) {
            return Eigen::Matrix2d((Eigen::Matrix2d() << a, 0.0, 0.0, b).finished());
        });
    }

    /// σ(x) = (1 + 0.5 exp(-|x|²)) I
    static EllipticTensor smooth_bump(int dim) {
        return EllipticTensor("smooth-bump", dim, [dim](const Point& x) {
            double r2 = 0.0;
            for (int k = 0; k < dim; ++k) r2 += x[k] * x[k];
            const double c = 1.0 + 0.5 * std::exp(-r2);
            return Eigen::Matrix2d((Eigen::Matrix2d() << c, 0.0, 0.0, c).finished());
        });
    }

    /// Parses "identity", "scalar(c)", "diag(a[,b])" or "smooth-bump".
    static EllipticTensor parse(const std::string& text, int dim) {
        static const std::regex scalar_re(R"(^\s*scalar\(\s*([^)]+?)\s*\)\s*$)");
        static const std::regex diag_re(R"(^\s*diag\(\s*([^)]*?)\s*\)\s*$)");
        std::smatch m;
        if (text == "identity") return identity(dim);
        if (text == "smooth-bump") return smooth_bump(dim);
        if (std::regex_match(text, m, scalar_re)) return scalar(dim, parse_number(m[1].str(), text));
        if (std::regex_match(text, m, diag_re)) {
            std::vector<double> entries;
            std::string body = m[1].str();
            std::size_t start = 0;
            while (start <= body.size()) {
                const auto comma = body.find(',', start);
                entries.push_back(parse_number(body.substr(start, comma - start), text));
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
            return diagonal(dim, std::move(entries));
        }
        throw AssemblyError("unknown sigma preset '" + text + "'");
    }

private:
    static std::string format_number(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", v);
        return buf;
    }
    static double parse_number(const std::string& s, const std::string& ctx) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size() && s.find_first_not_of(" \t", used) != std::string::npos) throw 0;
            return v;
        } catch (...) {
            throw AssemblyError("bad number in sigma preset '" + ctx + "'");
        }
    }

    std::string name_;
    int dim_;
    Field field_;
};

/// Largest λ ≤ 1 with λ|ξ|² ≤ ξᵀσξ ≤ λ⁻¹|ξ|² at every node. Throws AssemblyError
/// if some local matrix is not symmetric positive definite.
inline double ellipticity_bound(const Grid& grid, const EllipticTensor& sigma) {
    if (sigma.dim() != grid.dim()) throw AssemblyError("sigma dimension does not match the grid");
    const int d = grid.dim();
    double lambda = 1.0;
    for (const auto& x : grid.nodes()) {
        const Eigen::MatrixXd local = sigma.at(x).topLeftCorner(d, d);
        if ((local - local.transpose()).norm() > 1e-12 * local.norm())
            throw AssemblyError("sigma is not symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(local, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        if (!(lo > 0.0) || !std::isfinite(hi)) throw AssemblyError("sigma violates ellipticity (non-positive eigenvalue)");
        lambda = std::min({lambda, lo, 1.0 / hi});
    }
    return lambda;
}

/// Conservative finite-difference discretization of -∇·(σ∇) on every box node
/// with zero values beyond the box. σ is sampled at face midpoints; for σ = I this
/// is the (2·dim+1)-point Laplacian divided by h².
inline Eigen::MatrixXd assemble_elliptic(const Grid& grid, const EllipticTensor& sigma) {
    ellipticity_bound(grid, sigma);
    const int d = grid.dim();
    const Index m = grid.per_axis();
    const Index n = grid.size();
    const double h2 = grid.spacing() * grid.spacing();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);

    auto axis_index = [&](Index i, int axis) { return d == 1 ? i : (axis == 0 ? i / m : i % m); };
    auto stride = [&](int axis) { return d == 1 ? Index{1} : (axis == 0 ? m : Index{1}); };

    for (Index i = 0; i < n; ++i) {
        const Point& x = grid.node(i);
        for (int axis = 0; axis < d; ++axis) {
            for (int dir : {-1, 1}) {
                Point mid = x;
                mid[axis] += 0.5 * dir * grid.spacing();
                const Eigen::Matrix2d s = sigma.at(mid);
                if (d == 2 && (s(0, 1) != 0.0 || s(1, 0) != 0.0))
                    throw AssemblyError("sigma with mixed (off-diagonal) entries is not supported by the stencil");
                if (!(s(axis, axis) > 0.0)) throw AssemblyError("sigma violates ellipticity at a face midpoint");
                const double c = s(axis, axis) / h2;
                a(i, i) += c;
                const Index k = axis_index(i, axis) + dir;
                if (k >= 0 && k < m) a(i, i + dir * stride(axis)) -= c;
            }
        }
    }
    return a;
}

// ---------------------------------------------------------------------------
// Spectral operator and fractional powers
// ---------------------------------------------------------------------------

/// Full eigendecomposition A = V diag(λ) Vᵀ of the box-truncated operator.
class SpectralOperator {
public:
    SpectralOperator(Eigen::MatrixXd matrix, Eigen::VectorXd eigenvalues, Eigen::MatrixXd eigenvectors, double weight)
        : matrix_(std::move(matrix)),
          eigenvalues_(std::move(eigenvalues)),
          eigenvectors_(std::move(eigenvectors)),
          weight_(weight) {}

    [[nodiscard]] const Eigen::MatrixXd& matrix() const { return matrix_; }
    [[nodiscard]] const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
    [[nodiscard]] const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }
    [[nodiscard]] double weight() const { return weight_; }
    [[nodiscard]] Index size() const { return matrix_.rows(); }

    /// Dense A^s. s = 1 returns the assembled matrix itself.
    [[nodiscard]] Eigen::MatrixXd power(double s) const {
        check_order(s);
        if (s == 1.0) return matrix_;
        const Eigen::VectorXd ls = powered(s);
        return eigenvectors_ * ls.asDiagonal() * eigenvectors_.transpose();
    }

    [[nodiscard]] Eigen::VectorXcd apply(double s, const Eigen::VectorXcd& v) const {
        check_order(s);
        if (v.size() != size()) throw ContractError("vector length does not match the operator");
        if (s == 1.0) return matrix_ * v;
        const Eigen::VectorXd ls = powered(s);
        Eigen::VectorXcd coeff = eigenvectors_.transpose() * v;
        coeff.array() *= ls.array();
        return eigenvectors_ * coeff;
    }

    /// ‖V diag(λ) Vᵀ − A‖_F / ‖A‖_F
    [[nodiscard]] double reconstruction_error() const {
        const Eigen::MatrixXd r = eigenvectors_ * eigenvalues_.asDiagonal() * eigenvectors_.transpose();
        return (r - matrix_).norm() / matrix_.norm();
    }

private:
    static void check_order(double s) {
        if (!(s > 0.0 && s <= 1.0)) throw ContractError("fractional order s must lie in (0, 1]");
    }
    [[nodiscard]] Eigen::VectorXd powered(double s) const {
        const double floor = -1e-12 * std::abs(eigenvalues_.maxCoeff());
        Eigen::VectorXd ls(eigenvalues_.size());
        for (Index k = 0; k < ls.size(); ++k) {
            const double lam = eigenvalues_(k);
            if (lam < floor) throw ContractError("fractional power of an operator with a negative eigenvalue");
            ls(k) = lam > 0.0 ? std::pow(lam, s) : 0.0;
        }
        return ls;
    }

    Eigen::MatrixXd matrix_;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd eigenvectors_;
    double weight_;
};

inline SpectralOperator spectral_decompose(const Eigen::MatrixXd& matrix, double weight = 1.0) {
    if (matrix.rows() != matrix.cols()) throw ContractError("spectral_decompose needs a square matrix");
    const double scale = std::max(matrix.norm(), std::numeric_limits<double>::min());
    if ((matrix - matrix.transpose()).norm() > 1e-12 * scale)
        throw ContractError("spectral_decompose needs a symmetric matrix");
    const Eigen::MatrixXd sym = 0.5 * (matrix + matrix.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    return SpectralOperator(matrix, es.eigenvalues(), es.eigenvectors(), weight);
}

inline GridFunction apply_fractional(const SpectralOperator& op, double s, const GridFunction& v) {
    return GridFunction(v.grid_ptr(), op.apply(s, v.values()));
}

// ---------------------------------------------------------------------------
// Effective kernel
// ---------------------------------------------------------------------------

/// C(n,s) = 4^s Γ(n/2+s) / (π^{n/2} |Γ(-s)|), the constant of the standard
/// integral fractional Laplacian on ℝⁿ.
inline double fractional_laplacian_constant(int n, double s) {
    const double half_n = 0.5 * n;
    return std::pow(4.0, s) * std::tgamma(half_n + s) /
           (std::pow(std::numbers::pi, half_n) * std::abs(std::tgamma(-s)));
}

/// Off-diagonal kernel K̂(x_i, x_j) = -(A^s)_ij / h^dim (diagonal zeroed).
struct KernelMatrix {
    Eigen::MatrixXd values;
    double s = 0.5;
    int dim = 1;
    double reference_constant = 0.0;
};

inline KernelMatrix effective_kernel(const Eigen::MatrixXd& fractional_power, const Grid& grid, double s) {
    if (!(s > 0.0 && s < 1.0)) throw ContractError("effective_kernel needs s in (0, 1)");
    KernelMatrix k;
    k.values = -fractional_power / grid.cell_volume();
    k.values.diagonal().setZero();
    k.s = s;
    k.dim = grid.dim();
    k.reference_constant = fractional_laplacian_constant(grid.dim(), s);
    return k;
}

inline KernelMatrix effective_kernel(const SpectralOperator& op, const Grid& grid, double s) {
    if (!(s > 0.0 && s < 1.0)) throw ContractError("effective_kernel needs s in (0, 1)");
    return effective_kernel(op.power(s), grid, s);
}

struct KernelComparison {
    std::size_t pairs = 0;
    double min_ratio = std::numeric_limits<double>::infinity();
    double max_ratio = -std::numeric_limits<double>::infinity();
    double min_kernel = std::numeric_limits<double>::infinity();
    /// min over tested pairs of K̂ |x-y|^{n+2s}: empirical lower constant.
    double lower_constant = std::numeric_limits<double>::infinity();
    double upper_constant = 0.0;
};

/// Compares K̂ against C(n,s)|x-y|^{-n-2s} over pairs with
/// min_sep·h ≤ |x-y| ≤ max_sep·h whose nodes are both at least margin·h from the box.
inline KernelComparison compare_kernel(const KernelMatrix& kernel, const Grid& grid, double min_sep = 3.0,
                                       double max_sep = 10.0, double margin = 10.0) {
    const double h = grid.spacing();
    const double tol = 1e-9 * h;
    const double expo = kernel.dim + 2.0 * kernel.s;
    std::vector<Index> far;
    for (Index i = 0; i < grid.size(); ++i)
        if (grid.distance_to_box(i) >= margin * h - tol) far.push_back(i);
    KernelComparison out;
    for (Index i : far) {
        for (Index j : far) {
            if (i == j) continue;
            const double r = grid.distance(i, j);
            if (r < min_sep * h - tol || r > max_sep * h + tol) continue;
            const double kv = kernel.values(i, j);
            const double scaled = kv * std::pow(r, expo);
            const double ratio = scaled / kernel.reference_constant;
            ++out.pairs;
            out.min_ratio = std::min(out.min_ratio, ratio);
            out.max_ratio = std::max(out.max_ratio, ratio);
            out.min_kernel = std::min(out.min_kernel, kv);
            out.lower_constant = std::min(out.lower_constant, scaled);
            out.upper_constant = std::max(out.upper_constant, scaled);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bilinear form and fractional Sobolev norms
// ---------------------------------------------------------------------------

/// ℬ_{ω,q}(v,w) = ⟨A^s v, w⟩ h^dim + ω² Σ_Ω q v w h^dim (bilinear, no conjugation).
/// q is ordered as grid.omega_nodes().
inline Complex bilinear(const Eigen::MatrixXd& fractional_power, const Grid& grid, const Eigen::VectorXd& q,
                        double omega, const Eigen::VectorXcd& v, const Eigen::VectorXcd& w) {
    const auto& idx = grid.omega_nodes();
    if (q.size() != static_cast<Index>(idx.size())) throw ContractError("q must have one value per omega node");
    if (v.size() != grid.size() || w.size() != grid.size()) throw ContractError("bilinear: vector length mismatch");
    const double vol = grid.cell_volume();
    const Eigen::VectorXcd av = fractional_power * v;
    Complex total = (av.array() * w.array()).sum() * vol;
    Complex mass = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) mass += q(static_cast<Index>(k)) * v(idx[k]) * w(idx[k]);
    return total + omega * omega * mass * vol;
}

/// Same form with q given as a grid function; q must vanish on exterior nodes.
inline Complex bilinear(const Eigen::MatrixXd& fractional_power, const GridFunction& q, double omega,
                        const GridFunction& v, const GridFunction& w) {
    if (!q.is_interior_supported()) throw ContractError("q must be supported on omega nodes");
    const Eigen::VectorXd qi = q.interior().real();
    return bilinear(fractional_power, q.grid(), qi, omega, v.values(), w.values());
}

enum class NormRegion { Omega, Box };

inline const std::vector<Index>& region_nodes(const Grid& grid, NormRegion region, std::vector<Index>& scratch) {
    if (region == NormRegion::Omega) return grid.omega_nodes();
    scratch.resize(static_cast<std::size_t>(grid.size()));
    for (Index i = 0; i < grid.size(); ++i) scratch[static_cast<std::size_t>(i)] = i;
    return scratch;
}

/// Discrete Gagliardo seminorm over an explicit node set:
/// |v|² = Σ_{i≠j} |v_i - v_j|² / |x_i - x_j|^{dim+2s} · h^{2·dim}.
inline double hs_seminorm(const Grid& grid, const Eigen::VectorXcd& v, double s, const std::vector<Index>& nodes) {
    if (v.size() != grid.size()) throw ContractError("hs_seminorm: vector length mismatch");
    const double expo = grid.dim() + 2.0 * s;
    double sum = 0.0;
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        const Index i = nodes[a];
        for (std::size_t b = a + 1; b < nodes.size(); ++b) {
            const Index j = nodes[b];
            const double diff = std::norm(v(i) - v(j));
            if (diff == 0.0) continue;
            sum += diff / std::pow(grid.distance(i, j), expo);
        }
    }
    const double vol = grid.cell_volume();
    return std::sqrt(2.0 * sum * vol * vol);
}

inline double hs_seminorm(const Grid& grid, const Eigen::VectorXcd& v, double s, NormRegion region) {
    std::vector<Index> scratch;
    return hs_seminorm(grid, v, s, region_nodes(grid, region, scratch));
}

inline double l2_norm(const Grid& grid, const Eigen::VectorXcd& v, const std::vector<Index>& nodes) {
    double sum = 0.0;
    for (Index i : nodes) sum += std::norm(v(i));
    return std::sqrt(sum * grid.cell_volume());
}

/// ‖v‖ = ‖v‖_{L²} + |v|_{H^s} over the region.
inline double hs_norm(const Grid& grid, const Eigen::VectorXcd& v, double s, NormRegion region) {
    std::vector<Index> scratch;
    const auto& nodes = region_nodes(grid, region, scratch);
    return l2_norm(grid, v, nodes) + hs_seminorm(grid, v, s, nodes);
}

}  // namespace fracholtz
