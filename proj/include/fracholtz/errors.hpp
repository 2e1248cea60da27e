#pragma once

#include <stdexcept>
#include <string>

namespace fracholtz {

/// Invalid geometry: Ω touching the box, empty measurement sets, bad spacing.
class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation's precondition (wrong support, wrong size, bad order s).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The elliptic tensor fails the ellipticity bound or cannot be discretized.
class AssemblyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The interior operator (A^s)_II + ω² diag(q) is singular at the requested frequency.
class ResonanceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative or least-squares procedure could not produce a usable answer.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or schema-invalid configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace fracholtz
