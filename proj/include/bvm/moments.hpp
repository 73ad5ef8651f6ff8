#pragma once

#include "bvm/continuum.hpp"
#include "bvm/random.hpp"
#include "bvm/scaling.hpp"
#include "bvm/spde.hpp"
#include "bvm/stats.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace bvm {

/// Coefficients of dU = beta U(1-U) dt + sigma sqrt(U(1-U)) dB.
struct WfParams {
    double beta = 0.0;
    double sigma = 1.0;

    void validate() const;
};

/// Z = 1 - U and the label fraction V of the coupled system; V = 0 for the
/// single equation. Z, V >= 0 and Z + V <= 1.
struct DiffusionState {
    double z = 1.0;
    double v = 0.0;
    double time = 0.0;

    void check() const;
};

/// Euler steps for a given Brownian increment. Results are clamped to [0, 1].
double euler_u(double u, const WfParams& p, double dt, double dB);
double euler_z(double z, const WfParams& p, double dt, double dB);

/// Euler step of
///   dZ = -beta Z(1-Z) dt - sigma sqrt(VZ) dB0 - sigma sqrt(Z(1-Z-V)) dB1
///   dV =  beta V Z dt    + sigma sqrt(VZ) dB0 + sigma sqrt(V(1-V-Z)) dB2
/// followed by projection onto the simplex Z, V >= 0, Z + V <= 1.
DiffusionState euler_coupled(DiffusionState s, const WfParams& p, double dt, double dB0, double dB1,
                             double dB2);

/// Runs round(T / dt) Euler steps. With s0.v == 0 only the Z equation is
/// stepped (V stays 0 exactly).
DiffusionState simulate_diffusion(DiffusionState s0, const WfParams& p, double T, double dt, Rng& rng);

/// Euler solutions at step dt and dt/2 driven by one Brownian path: each
/// coarse increment is the sum of the two fine increments it spans.
struct PairedDiffusion {
    DiffusionState coarse;
    DiffusionState fine;
};

PairedDiffusion simulate_diffusion_paired(DiffusionState s0, const WfParams& p, double T, double dt,
                                          Rng& rng);

inline constexpr long default_chain_cap = 10000;

/// Birth-death chain with Q(m, m+1) = beta m and Q(m, m-1) = sigma^2 m(m-1)/2.
double chain_birth_rate(long m, const WfParams& p);
double chain_death_rate(long m, const WfParams& p);

struct ChainRun {
    long n = 1;
    double time = 0.0;
    std::uint64_t jumps = 0;
    bool overflow = false;  ///< the chain exceeded the cap; n is meaningless
};

/// Completed sojourn: state, holding time, state jumped to.
using SojournObserver = std::function<void(long, double, long)>;

/// Exact jump-chain simulation up to time T.
ChainRun simulate_chain(long n0, const WfParams& p, double T, Rng& rng, long cap = default_chain_cap,
                        const SojournObserver& observe = {});

/// z^n with 0^0 = 1.
double power_dual(double z, long n);

struct DualityReport {
    Estimate lhs;
    Estimate rhs;
    std::size_t overflow = 0;  ///< chain runs discarded at the cap
    bool pass = false;         ///< |lhs - rhs| <= 3 combined SE
};

/// E Z_T^{n0} from the diffusion against E z0^{N_T} from the chain; the
/// fine-step estimate and its shift come from the same Brownian paths.
struct MomentDualityReport : DualityReport {
    Estimate lhs_half_step;    ///< E Z_T^{n0} at step dt/2
    Estimate dt_shift;         ///< per-path difference fine - coarse
    bool bias_pass = false;    ///< |dt_shift.mean| < lhs.se
};

MomentDualityReport check_moment_duality(double z0, long n0, const WfParams& p, double T, double dt,
                                         std::size_t reps, std::uint64_t seed, unsigned workers = 0);

/// Sum over j_1 < ... < j_k of l_{j_k}...l_{j_1} prod_{i < j_1} z_i, with z_i,
/// l_i the values at the ordered positions. k = 0 gives prod z_i.
/// Throws std::invalid_argument if k exceeds the number of positions or the
/// two lists differ in length.
double eval_Fk(std::span<const double> z, std::span<const double> ell, int k);

/// Same with fields evaluated at the ordered positions x.
double eval_Fk(const std::function<double(double)>& z, const std::function<double(double)>& ell,
               std::span<const double> x, int k);

/// F_k with all n positions carrying the same (z, ell).
double eval_Fk_scalar(double z, double ell, long n, int k);

/// Scalar mode: lhs = E F_k((Z_T, V_T), n0) from the coupled diffusion,
/// rhs = E F_k((z0, v0), N_T) from the chain.
DualityReport check_coupled_duality(int k, long n0, DiffusionState s0, const WfParams& p, double T,
                                    double dt, std::size_t reps, std::uint64_t seed,
                                    unsigned workers = 0);

/// Spatial mode on a periodic mesh. lhs evaluates F_k on (1 - u_T, ell_T)
/// from the coupled SPDE at the ordered positions x; rhs evaluates F_k on
/// (1 - u0, ell0) at the ordered particles of the branching Brownian dual at
/// time T. u0 and ell0 must be periodic with the mesh length.
struct SpatialDualityConfig {
    Mesh mesh;
    LimitParams limits;
    double theta = 0.0;
    double bbm_dt = 1e-4;
    LocalTimeMethod local_time = LocalTimeMethod::band;
    double T = 0.1;
};

DualityReport check_coupled_duality_spatial(int k, std::span<const double> x,
                                            const std::function<double(double)>& u0,
                                            const std::function<double(double)>& ell0,
                                            const SpatialDualityConfig& cfg, std::size_t reps,
                                            std::uint64_t seed, unsigned workers = 0);

/// Periodic linear interpolation of a mesh field at x.
double interpolate_field(std::span<const double> values, const Mesh& mesh, double x);

/// Finite-horizon drift of Z^m: (E Z_h^m - Z_0^m) / h at two horizons h1 < h2
/// from common paths (Euler substeps of size h1 / substeps), the Richardson
/// extrapolant (h2 D(h1) - h1 D(h2)) / (h2 - h1), and the generator value
///   beta m [z^{m+1} - z^m] + sigma^2 m(m-1)/2 [z^{m-1} - z^m].
struct DriftReport {
    Estimate drift_h1;
    Estimate drift_h2;
    Estimate extrapolated;
    double generator = 0.0;
    bool pass = false;  ///< all three within 3 SE of the generator value
};

DriftReport generator_drift_check(double z0, int m, const WfParams& p, double h1, double h2,
                                  std::size_t reps, std::uint64_t seed, int substeps = 10,
                                  unsigned workers = 0);

/// Empirical jump rates of the chain from completed sojourns.
struct ChainRateReport {
    long m = 1;
    std::uint64_t sojourns = 0;
    std::uint64_t births = 0;
    std::uint64_t deaths = 0;
    double exposure = 0.0;  ///< total completed holding time at m
    Estimate birth_rate;    ///< births / exposure, se = rate / sqrt(births)
    Estimate death_rate;
    bool pass = false;
};

/// Runs the chain from n0 in batches until every state in `states` has at
/// least `min_sojourns` completed sojourns.
std::vector<ChainRateReport> chain_rate_check(std::span<const long> states, const WfParams& p,
                                              std::uint64_t min_sojourns, std::uint64_t seed,
                                              long n0 = 1);

/// E sum_m P_{l,m}(T - t) Z^m(t) at each t, estimated by pairing an
/// independent chain run of length T - t from l with a diffusion run to t.
std::vector<Estimate> lemma6_martingale(double z0, long l, const WfParams& p, double T,
                                        std::span<const double> times, double dt, std::size_t reps,
                                        std::uint64_t seed, unsigned workers = 0);

}  // namespace bvm
