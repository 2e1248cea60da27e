#pragma once

#include <functional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "fracholtz/errors.hpp"
#include "fracholtz/grid.hpp"

namespace fracholtz {

/// Frequency-dependent interior source
///   p(x, ω) = p0(x) + p1(x) ω + p2(x) ω² + r(x, ω),   ω ∈ [0, ω0].
///
/// p1 and p2 already include the 1/n! Taylor factors, i.e. p1 = ∂_ω p|₀ and
/// p2 = ½ ∂²_ω p|₀. The remainder r satisfies ‖r(·,ω)‖_{L²(Ω)} ≤ R₃ ω³.
/// All vectors are ordered as Grid::omega_nodes().
struct FreqSource {
    std::string name = "source";
    Eigen::VectorXcd p0;
    Eigen::VectorXcd p1;
    Eigen::VectorXcd p2;
    std::function<Eigen::VectorXcd(double)> remainder;  // empty means r ≡ 0
    double remainder_bound = 0.0;                       // R₃
    double omega0 = 1.0;

    [[nodiscard]] Index size() const { return p0.size(); }

    /// ω-independent source p(x, ω) = p0(x).
    static FreqSource constant(Eigen::VectorXcd p0, double omega0, std::string name = "constant") {
        FreqSource src;
        src.name = std::move(name);
        src.p1 = Eigen::VectorXcd::Zero(p0.size());
        src.p2 = Eigen::VectorXcd::Zero(p0.size());
        src.p0 = std::move(p0);
        src.omega0 = omega0;
        return src;
    }

    /// p(x, ω) = ζ(x) + η(x) ω.
    static FreqSource affine(Eigen::VectorXcd zeta, Eigen::VectorXcd eta, double omega0,
                             std::string name = "affine") {
        if (zeta.size() != eta.size()) throw ContractError("affine source: size mismatch");
        FreqSource src;
        src.name = std::move(name);
        src.p2 = Eigen::VectorXcd::Zero(zeta.size());
        src.p0 = std::move(zeta);
        src.p1 = std::move(eta);
        src.omega0 = omega0;
        return src;
    }

    void validate() const {
        if (p1.size() != p0.size() || p2.size() != p0.size()) throw ContractError("source coefficient size mismatch");
        if (!(omega0 > 0.0)) throw ContractError("source omega0 must be positive");
        if (remainder_bound < 0.0) throw ContractError("remainder bound must be nonnegative");
    }
};

/// p(·, ω); ω = 0 returns p0 exactly.
inline Eigen::VectorXcd eval_source(const FreqSource& source, double omega) {
    if (!(omega >= 0.0 && omega <= source.omega0))
        throw ContractError("eval_source: omega outside [0, omega0]");
    if (omega == 0.0) return source.p0;
    Eigen::VectorXcd p = source.p0 + omega * source.p1 + (omega * omega) * source.p2;
    if (source.remainder) p += source.remainder(omega);
    return p;
}

/// p̃(·, ω) = p(·, ω) − p(·, 0).
inline Eigen::VectorXcd source_increment(const FreqSource& source, double omega) {
    return eval_source(source, omega) - source.p0;
}

}  // namespace fracholtz
