#pragma once

#include "bvm/configuration.hpp"
#include "bvm/random.hpp"
#include "bvm/scaling.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace bvm {

struct ForwardRun {
    Configuration final;
    std::vector<Configuration> samples;  ///< one per requested sample time
    std::uint64_t events = 0;
};

/// Event-driven simulation of the biased voter model with tracer labels.
///
/// Voter events fire at total rate (#directed pairs) * r and selection
/// events at (#directed pairs) * theta / R; each picks a uniform target cell
/// and a uniform neighbour. A selection event changes the target only if the
/// source has type 1. `sample_times` must be sorted and within [0, T].
ForwardRun simulate_forward(Configuration start, const ScalingFamily& family, double T, Rng& rng,
                            std::span<const double> sample_times = {});

ForwardRun simulate_forward(Configuration start, const ScalingFamily& family, double T,
                            std::uint64_t seed, std::span<const double> sample_times = {});

/// Per-deme densities of types and labels, linearly interpolated between
/// deme positions w = d / L on a ring of circumference W / L.
struct DensityProfile {
    double L = 1.0;
    std::vector<double> u;
    std::vector<double> ell;

    std::size_t demes() const noexcept { return u.size(); }
    double position(std::size_t deme) const noexcept { return static_cast<double>(deme) / L; }
    double u_at(double w) const noexcept { return interpolate(u, w); }
    double ell_at(double w) const noexcept { return interpolate(ell, w); }

private:
    double interpolate(const std::vector<double>& values, double w) const noexcept;
};

DensityProfile density_profiles(const Configuration& config, const ScalingFamily& family);

/// Product over a multiset of demes of (1 - u(a)).
double product_statistic(const Configuration& config, std::span<const int> demes);

/// Writes "w,u,ell" rows.
void write_profile_csv(std::ostream& os, const DensityProfile& profile);

}  // namespace bvm
