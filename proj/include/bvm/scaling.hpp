#pragma once

#include <cstdint>
#include <string_view>

namespace bvm {

/// Parameters of one member of the rescaled model sequence.
///
/// L demes per unit length, M cells per deme, selection scale R, voter rate
/// r and selection strength theta. Type-0 cells reproduce at rate 2*M*r and
/// type-1 cells at rate 2*M*(r + theta/R).
struct ScalingFamily {
    double L = 1.0;
    double M = 1.0;
    double R = 1.0;
    double r = 1.0;
    double theta = 0.0;

    /// Throws std::invalid_argument unless L, M are positive integers,
    /// R, r positive and finite, theta >= 0 and finite.
    void validate() const;

    int demes_per_unit() const { return static_cast<int>(L); }
    int cells_per_deme() const { return static_cast<int>(M); }
    /// Selection arrow rate per directed neighbour pair.
    double selection_rate() const { return theta / R; }
};

/// Diffusion, branching and noise coefficients of the continuum limit.
struct LimitParams {
    double alpha = 1.0;
    double beta = 0.0;
    double gamma = 0.0;

    void validate() const;
};

struct DerivedRatios {
    double alpha_n = 0.0;  ///< r M / L^2
    double beta_n = 0.0;   ///< M / R
    double gamma_n = 0.0;  ///< r / L
};

DerivedRatios derived_ratios(const ScalingFamily& family);

/// The limit triple a family approximates, taken to be its derived ratios.
LimitParams limit_params(const ScalingFamily& family);

enum class Regime { stochastic, deterministic };

inline constexpr double default_regime_tol = 1e-6;

/// deterministic iff gamma_n < tol.
Regime classify_regime(const DerivedRatios& ratios, double tol = default_regime_tol);

std::string_view to_string(Regime regime);

/// The square-root family L = M = R = r = sqrt(n).
ScalingFamily sqrt_family(double n, double theta);

/// A family in the deterministic regime: with 2a > b > a > 0,
/// r = n^(1/b), L = n^(1/a), M = ceil(alpha n^(2/a - 1/b)), R = M / beta,
/// so alpha_n -> alpha while gamma_n = n^(1/b - 1/a) -> 0.
ScalingFamily deterministic_family(double n, double a, double b, double alpha, double beta,
                                   double theta);

}  // namespace bvm
