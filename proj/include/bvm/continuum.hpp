#pragma once

#include "bvm/random.hpp"
#include "bvm/scaling.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

namespace bvm {

/// Band estimator of the semimartingale local time at 0 of a sampled path:
/// qv_rate / (2 eps) * dt * #{samples with |x| <= eps}. qv_rate is the
/// quadratic-variation rate of the path (1 for standard Brownian motion).
/// Throws std::invalid_argument unless eps > 0 and dt > 0.
double local_time_band(std::span<const double> path, double eps, double dt, double qv_rate = 1.0);

/// How pair local times are accrued over one Euler step.
///   band:   qv_rate * dt / (2 eps) whenever the sampled difference is within eps.
///   bridge: a draw from the law of the local time at 0 of the Brownian bridge
///           joining the difference's values at the two ends of the step.
enum class LocalTimeMethod { band, bridge };

/// Coefficients of branching Brownian motion with local-time coalescence.
///
/// Each particle is a Brownian motion with variance 2*alpha*t and branches at
/// rate branch_rate. A pair (i < j) accrues the local time at 0 of x_j - x_i
/// and particle j is removed once that exceeds alpha*tau_ij/gamma, tau_ij a
/// unit exponential drawn when the pair is created. gamma == 0 disables
/// coalescence.
struct BbmParams {
    double alpha = 1.0;
    double branch_rate = 0.0;
    double gamma = 0.0;
    double dt = 1e-4;
    /// Band half-width in units of the pair difference's per-step sd.
    double band_factor = 4.0;
    LocalTimeMethod local_time = LocalTimeMethod::band;

    void validate() const;
    /// Half-width eps = band_factor * sqrt(4 alpha dt) of the local-time band.
    double band() const;
};

/// Parameters of the limit dual for a Wright-Fisher SPDE with the given
/// limit triple: branch_rate = 2 theta beta, matching the logistic drift
/// 2 theta beta u(1-u).
BbmParams bbm_params(const LimitParams& limits, double theta, double dt);

struct PairClock {
    double local_time = 0.0;
    double threshold = 0.0;
};

/// Particle positions in ancestry order plus per-pair local-time clocks.
class BbmState {
public:
    BbmState(std::span<const double> positions, const BbmParams& params, Rng& rng);

    /// One Euler step: move, accrue pair local times, coalesce, branch.
    void step(Rng& rng);

    double time() const noexcept { return time_; }
    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<double>& positions() const noexcept { return positions_; }
    const BbmParams& params() const noexcept { return params_; }
    std::uint64_t births() const noexcept { return births_; }
    std::uint64_t coalescences() const noexcept { return coalescences_; }
    /// Clock of the pair currently at ancestry indices (i, j), i != j.
    const PairClock& clock(std::size_t i, std::size_t j) const;

private:
    static std::uint64_t key(std::uint64_t a, std::uint64_t b) noexcept;
    void add_pairs_for(std::size_t index, Rng& rng);
    void remove_at(std::size_t index);

    BbmParams params_;
    std::vector<double> positions_;
    std::vector<std::uint64_t> ids_;
    std::unordered_map<std::uint64_t, PairClock> clocks_;
    std::uint64_t next_id_ = 0;
    std::uint64_t births_ = 0;
    std::uint64_t coalescences_ = 0;
    double time_ = 0.0;
};

struct BbmRun {
    BbmState final;
    std::vector<std::vector<double>> snapshots;  ///< positions at requested times
};

/// Runs from `positions` to time T (rounded to whole steps).
BbmRun simulate_bbm(std::span<const double> positions, const BbmParams& params, double T, Rng& rng,
                    std::span<const double> sample_times = {});

/// One sample of prod_{y in chi_T} (1 - u0(y)).
double bbm_product(std::span<const double> positions, const BbmParams& params, double T,
                   const std::function<double(double)>& u0, Rng& rng);

/// Local time at 0 accrued by a Brownian bridge with quadratic-variation rate
/// qv_rate running from a to b over time h, drawn by inversion of
///   P(L > y) = exp(-((|a| + |b| + y)^2 - (b - a)^2) / (2 qv_rate h)).
/// u is a uniform variate in (0, 1].
double bridge_local_time(double a, double b, double h, double qv_rate, double u);

/// Samples with +infinity marking runs stopped at the time cap.
struct CensoredSamples {
    std::vector<double> values;
    std::size_t truncated = 0;
};

inline constexpr double default_limit_time_cap = 1e4;

/// Samples of the inverse local time l0^{-1}(alpha tau) of a standard Brownian
/// motion started at 1, tau a unit exponential.
///
/// Far from 0 the path advances by exact hitting times of the band edge; inside
/// the band it takes Euler steps of size dt and accrues local time with the band
/// estimator (eps = 4 sqrt(dt)). Samples exceeding time_cap are censored.
CensoredSamples sample_limit_law(double alpha, std::size_t n, double dt, std::uint64_t seed,
                                 double time_cap = default_limit_time_cap);

/// Rescaled coalescence times 2 nu t0 / L^2 of two lineages started L demes
/// apart. The difference walk jumps +-1 at total rate 2 nu; each arrival at 0
/// coalesces with probability 1/M. Runs past time_cap (rescaled) are censored.
CensoredSamples coalescence_time_experiment(long L, long M, double nu, std::size_t n,
                                            std::uint64_t seed,
                                            double time_cap = default_limit_time_cap);

}  // namespace bvm
