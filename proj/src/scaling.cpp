#include "bvm/scaling.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bvm {
namespace {

bool positive_integer(double x) {
    return std::isfinite(x) && x >= 1.0 && std::floor(x) == x;
}

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

void ScalingFamily::validate() const {
    if (!positive_integer(L)) throw std::invalid_argument("ScalingFamily: L must be a positive integer");
    if (!positive_integer(M)) throw std::invalid_argument("ScalingFamily: M must be a positive integer");
    if (!positive_finite(R)) throw std::invalid_argument("ScalingFamily: R must be positive");
    if (!positive_finite(r)) throw std::invalid_argument("ScalingFamily: r must be positive");
    if (!std::isfinite(theta) || theta < 0.0)
        throw std::invalid_argument("ScalingFamily: theta must be >= 0");
}

void LimitParams::validate() const {
    if (!positive_finite(alpha)) throw std::invalid_argument("LimitParams: alpha must be > 0");
    if (!std::isfinite(beta) || beta < 0.0) throw std::invalid_argument("LimitParams: beta must be >= 0");
    if (!std::isfinite(gamma) || gamma < 0.0)
        throw std::invalid_argument("LimitParams: gamma must be >= 0");
}

DerivedRatios derived_ratios(const ScalingFamily& f) {
    f.validate();
    return {f.r * f.M / (f.L * f.L), f.M / f.R, f.r / f.L};
}

LimitParams limit_params(const ScalingFamily& family) {
    const DerivedRatios d = derived_ratios(family);
    return {d.alpha_n, d.beta_n, d.gamma_n};
}

Regime classify_regime(const DerivedRatios& ratios, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("classify_regime: tol must be > 0");
    return ratios.gamma_n < tol ? Regime::deterministic : Regime::stochastic;
}

std::string_view to_string(Regime regime) {
    return regime == Regime::deterministic ? "deterministic" : "stochastic";
}

ScalingFamily sqrt_family(double n, double theta) {
    const double s = std::sqrt(n);
    return {s, s, s, s, theta};
}

ScalingFamily deterministic_family(double n, double a, double b, double alpha, double beta,
                                   double theta) {
    if (!(2 * a > b && b > a && a > 0))
        throw std::invalid_argument("deterministic_family: need 2a > b > a > 0");
    if (!(beta > 0)) throw std::invalid_argument("deterministic_family: beta must be > 0");
    // Exponents chosen so gamma_n = n^(1/b - 1/a) -> 0 under 2a > b > a.
    const auto ceil_tight = [](double x) { return std::ceil(x * (1.0 - 1e-12)); };
    ScalingFamily f;
    f.r = std::pow(n, 1.0 / b);
    f.L = std::round(std::pow(n, 1.0 / a));
    f.M = ceil_tight(alpha * std::pow(n, 2.0 / a - 1.0 / b));
    f.R = f.M / beta;
    f.theta = theta;
    return f;
}

}  // namespace bvm
