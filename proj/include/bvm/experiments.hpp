#pragma once

#include "bvm/configuration.hpp"
#include "bvm/continuum.hpp"
#include "bvm/graphical.hpp"
#include "bvm/moments.hpp"
#include "bvm/random.hpp"
#include "bvm/scaling.hpp"
#include "bvm/spde.hpp"
#include "bvm/stats.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace bvm {

/// xi0 Bernoulli(p) per site; each type-1 site labelled with probability q.
Configuration random_configuration(const Torus& torus, double p, double q, Rng& rng);

struct PathwiseSummary {
    std::size_t trials = 0;
    PathwiseCheck totals;
};

/// For each seed: one shared log on [0, T], then `per_seed` trials each with
/// a random configuration, a random multiset of 1 to 3 root sites and a random
/// time in [0, T], compared by check_pathwise_duality.
PathwiseSummary pathwise_duality_experiment(const Torus& torus, const ScalingFamily& family, double T,
                                            std::size_t seeds, std::size_t per_seed,
                                            std::uint64_t master, unsigned workers = 0);

/// E prod_{a in demes} (1 - u_t(a)) from forward runs against the dual
/// estimator, `reps` independent replicas on each side.
DualityReport product_duality_experiment(const Configuration& start, const ScalingFamily& family,
                                         std::span<const int> demes, double t, std::size_t reps,
                                         std::uint64_t seed, unsigned workers = 0);

/// P(xi_t = 0 on zero_sites, eta_t = 1 on label_sites) from forward runs
/// against E[prod F prod G] over the joint ordered dual of all the sites.
DualityReport tracer_duality_experiment(const Configuration& start, const ScalingFamily& family,
                                        std::span<const Site> zero_sites,
                                        std::span<const Site> label_sites, double t,
                                        std::size_t reps, std::uint64_t seed, unsigned workers = 0);

struct KernelIdentityReport {
    double L = 0.0;
    double t = 0.0;
    double normalization_error = 0.0;  ///< |(1/L) sum_w p_t(w) - 1|
    double symmetry_error = 0.0;       ///< max_w |p_t(w) - p_t(-w)|
    double chapman_error = 0.0;        ///< |(1/L) sum_w p_t(w)^2 - p_2t(0)|
    bool pass = false;                 ///< all three <= 1e-12
};

KernelIdentityReport heat_kernel_identities(double L, double t);

/// Sup-norm errors of the coupled solver with gamma = 0.
struct ReductionReport {
    double u_error = 0.0;
    double ell_error = 0.0;
    double tolerance = 1e-3;
    bool pass = false;
};

/// Constant data: compares u_T with the logistic 1/(1 + ((1-u0)/u0) e^{-2 theta beta T})
/// and ell_T with u_T * ell0/u0 (the ratio is conserved when gamma = 0).
ReductionReport homogeneous_logistic_check(const Mesh& mesh, const LimitParams& limits, double theta,
                                           double T, double u0, double ell0);

/// Compares the solve on `mesh` with a reference on dx/refine, dt/refine^2 at
/// the coarse nodes.
ReductionReport refined_mesh_check(const Mesh& mesh, const LimitParams& limits, double theta, double T,
                                   const std::function<double(double)>& u0,
                                   const std::function<double(double)>& ell0, int refine = 4);

/// Mass dx sum u and square mass dx sum u^2 at T from the coupled and the
/// single solver, independent replicas.
struct MarginalReport {
    Estimate coupled_mass;
    Estimate single_mass;
    Estimate coupled_square;
    Estimate single_square;
    bool pass = false;
};

MarginalReport u_marginal_check(const SPDEField& start, const Mesh& mesh, const LimitParams& limits,
                                double theta, double T, std::size_t reps, std::uint64_t seed,
                                unsigned workers = 0);

struct ResidualReport {
    Estimate final_residual;   ///< M_T over replicas
    Estimate realized_qv;
    Estimate predicted_qv;
    double qv_ratio = 0.0;     ///< mean realized / mean predicted
    std::uint64_t clamps = 0;  ///< total clamp activations
    bool pass = false;         ///< |M_T| within 3 SE of 0 and ratio in [0.9, 1.1]
};

/// Single-equation residual against phi; with `psi` set, the coupled system
/// is solved and the pair residual is used instead.
ResidualReport martingale_residual_experiment(const SPDEField& start, const Mesh& mesh,
                                              const TestFunction& phi, const LimitParams& limits,
                                              double theta, double T, std::size_t record_every,
                                              std::size_t reps, std::uint64_t seed,
                                              const TestFunction* psi = nullptr,
                                              unsigned workers = 0);

struct LadderRung {
    long L = 0;
    long M = 0;
    double ks = 0.0;
    std::size_t truncated = 0;
};

struct LadderReport {
    std::vector<LadderRung> rungs;
    std::size_t limit_samples = 0;
    std::size_t limit_truncated = 0;
    bool decreasing = false;  ///< KS strictly decreasing along the rungs
};

/// Discrete coalescence times at each L with M = alpha L / nu (must be an
/// integer), compared by KS distance with one pool of limit-law samples.
LadderReport coalescence_ladder(std::span<const long> Ls, double alpha, double nu, std::size_t n,
                                std::size_t limit_n, double limit_dt, std::uint64_t seed,
                                double time_cap = default_limit_time_cap);

/// E prod (1 - u_T(x_i)) from the SPDE on the base mesh and on the halved
/// mesh, both driven by the same noise, against one branching Brownian dual
/// estimate.
struct LimitDualityReport {
    DualityReport coarse;
    DualityReport fine;
    double slack = 0.02;
    bool within = false;   ///< fine gap <= max(3 combined SE, slack)
    bool shrinks = false;  ///< |fine gap| <= |coarse gap|
    bool pass = false;
};

LimitDualityReport limit_duality_experiment(std::span<const double> x,
                                            const std::function<double(double)>& u0,
                                            const SpatialDualityConfig& base, std::size_t reps,
                                            std::uint64_t seed, unsigned workers = 0);

}  // namespace bvm
