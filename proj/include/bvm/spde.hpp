#pragma once

#include "bvm/configuration.hpp"
#include "bvm/random.hpp"
#include "bvm/scaling.hpp"
#include "bvm/stats.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace bvm {

/// Periodic grid of `cells` cells of width dx, stepped with time step dt.
struct Mesh {
    double dx = 0.1;
    double dt = 1e-3;
    std::size_t cells = 10;

    double length() const noexcept { return dx * static_cast<double>(cells); }
    double x(std::size_t i) const noexcept { return dx * static_cast<double>(i); }
    /// Throws std::domain_error unless dt <= dx^2 / (4 alpha).
    void check_stability(double alpha) const;
};

/// Type density u and label density ell on a mesh, 0 <= ell <= u <= 1.
struct SPDEField {
    std::vector<double> u;
    std::vector<double> ell;
    double time = 0.0;
    /// Cells pulled back into the admissible region by clamping, cumulative.
    std::uint64_t clamps = 0;

    static SPDEField sample(const Mesh& mesh, const std::function<double(double)>& u0,
                            const std::function<double(double)>& ell0);
};

/// Explicit Euler-Maruyama step of
///   du = alpha u'' + 2 theta beta u(1-u) + sqrt(4 gamma u(1-u)) W'
/// with per-cell noise N(0,1) * sqrt(dt/dx), then clamping to [0, 1].
void step_wf_spde(SPDEField& field, const Mesh& mesh, const LimitParams& limits, double theta,
                  Rng& noise);
/// Same step with caller-supplied standard normals, one per cell.
void step_wf_spde(SPDEField& field, const Mesh& mesh, const LimitParams& limits, double theta,
                  std::span<const double> normals);

/// Explicit step of the labelled system driven by three independent noises;
/// W0 enters both equations with the same realisation:
///   du   = alpha u''   + 2 theta beta u(1-u)   + sqrt(4g ell(1-u)) W0 + sqrt(4g (u-ell)(1-u)) W1
///   dell = alpha ell'' + 2 theta beta ell(1-u) + sqrt(4g ell(1-u)) W0 + sqrt(4g ell(u-ell)) W2
/// followed by clamping to 0 <= ell <= u <= 1.
void step_coupled_spde(SPDEField& field, const Mesh& mesh, const LimitParams& limits, double theta,
                       Rng& w0, Rng& w1, Rng& w2);
void step_coupled_spde(SPDEField& field, const Mesh& mesh, const LimitParams& limits, double theta,
                       std::span<const double> n0, std::span<const double> n1,
                       std::span<const double> n2);

struct SpdeRun {
    SPDEField final;
    std::vector<SPDEField> trajectory;  ///< every `record_every` steps, including t = 0
};

/// Runs either solver for round(T / dt) steps. Noise streams come from `seed`.
SpdeRun solve_spde(SPDEField start, const Mesh& mesh, const LimitParams& limits, double theta,
                   double T, std::uint64_t seed, bool coupled, std::size_t record_every = 0);

/// dx/2, dt/4, twice the cells.
Mesh halved(const Mesh& mesh);

struct RefinedPair {
    SPDEField coarse;
    SPDEField fine;
    Mesh fine_mesh;
};

/// Solves on `mesh` and on halved(mesh) with one white-noise realisation: the
/// normal driving coarse cell i over a coarse step is the normalised sum of
/// the eight fine normals of fine cells 2i, 2i+1 over its four substeps.
RefinedPair solve_spde_refined_pair(const std::function<double(double)>& u0,
                                    const std::function<double(double)>& ell0, const Mesh& mesh,
                                    const LimitParams& limits, double theta, double T,
                                    std::uint64_t seed, bool coupled);

/// Scaled transition function p_t(w) = L P(X_t = w | X_0 = 0) of the simple
/// random walk on L^-1 Z with total jump rate 2 L^2.
///
/// Probabilities are obtained from the jump-count representation (difference
/// of two Poisson(L^2 t) counts), with pmfs computed by stable recurrence in
/// extended precision and truncated beyond 40 standard deviations.
class HeatKernel {
public:
    HeatKernel(double L, double t);

    double L() const noexcept { return L_; }
    double t() const noexcept { return t_; }
    /// P(X_t = k / L).
    double probability(long k) const noexcept;
    /// p_t(w) for w on L^-1 Z (w is rounded to the nearest lattice point).
    double operator()(double w) const noexcept;
    /// Largest |k| with non-negligible mass.
    long support() const noexcept { return static_cast<long>(prob_.size()) - 1; }
    /// Transition probabilities on a ring of `demes` demes, indexed by offset.
    std::vector<double> ring(int demes) const;

private:
    double L_;
    double t_;
    std::vector<long double> prob_;  ///< prob_[k] = P(X = k) = P(X = -k)
};

double heat_kernel(double L, double t, double w);

/// (P_s f)(z) on a ring: sum_k P(X_s = k) f(z - k).
std::vector<double> heat_semigroup(std::span<const double> f, double L, double s);

/// A smooth test function with its time derivative and spatial Laplacian.
struct TestFunction {
    std::function<double(double, double)> value;
    std::function<double(double, double)> d_time;
    std::function<double(double, double)> laplacian;
};

/// Gaussian bump exp(-(x-c)^2 / (2 w^2)) * (1 + a s).
TestFunction gaussian_test_function(double centre, double width, double growth);

struct ResidualSeries {
    std::vector<double> times;
    std::vector<double> martingale;    ///< M at each sampled time
    std::vector<double> realized_qv;   ///< cumulative sum of squared increments of M
    std::vector<double> predicted_qv;  ///< cumulative 4 gamma int <u(1-u), phi^2> ds
};

/// Martingale-problem residual of a single-equation trajectory (trapezoidal
/// quadrature in time on the sampled grid):
///   M_t = <u_t,phi_t> - <u_0,phi_0>
///         - int <u,d_s phi> + alpha <u, phi''> + 2 theta beta <u(1-u), phi> ds.
ResidualSeries martingale_residual(std::span<const SPDEField> trajectory, const Mesh& mesh,
                                   const TestFunction& phi, const LimitParams& limits, double theta);

/// Residual of the labelled system against the pair (phi, psi); the
/// predicted quadratic variation is
///   4 gamma int <u(1-u), phi^2> + <ell(1-ell), psi^2> + 2 <ell(1-u), phi psi> ds.
ResidualSeries coupled_martingale_residual(std::span<const SPDEField> trajectory, const Mesh& mesh,
                                           const TestFunction& phi, const TestFunction& psi,
                                           const LimitParams& limits, double theta);

struct GreenReport {
    Estimate remainder;   ///< u_t(z) - P_{alpha_n t} u_0(z)
    Estimate drift;       ///< Y_t, the selection drift term
    Estimate difference;  ///< remainder - drift, zero-mean
    double semigroup_value = 0.0;
    bool pass = false;
};

/// Decomposes the particle density at deme z into the heat semigroup acting
/// on the initial density plus remainder, over `reps` forward replicas, and
/// tests that remainder minus the selection drift has mean zero (3 SE).
GreenReport green_representation_check(const Configuration& start, const ScalingFamily& family,
                                       double t, int z, std::size_t reps, std::uint64_t seed,
                                       std::size_t quadrature_points = 200);

/// Writes "x,u,ell" rows.
void write_field_csv(std::ostream& os, const SPDEField& field, const Mesh& mesh);

}  // namespace bvm
