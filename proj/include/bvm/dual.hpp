#pragma once

#include "bvm/lattice.hpp"
#include "bvm/ordered_dual.hpp"
#include "bvm/random.hpp"
#include "bvm/scaling.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace bvm {

/// Branching-coalescing random walk dual with one ordered view per root.
///
/// The physical particles are the union of the root lists; a site in several
/// lists is one particle and moves once. Each particle jumps to each of its
/// neighbours at rate r and gives birth onto each neighbour at rate theta/R.
/// Every event is applied to every root list containing the acting
/// particle through apply_order_rules.
class DualProcess {
public:
    DualProcess(const Torus& torus, const ScalingFamily& family, std::span<const Site> roots);

    struct Step {
        double dual_time = 0.0;
        DualMove move = DualMove::jump;
        Site from{};
        Site to{};
        bool coalesced = false;  ///< the target site was already occupied
    };

    /// Advances to the next event unless it falls after s_max, in which case
    /// dual time is set to s_max and nothing is returned.
    std::optional<Step> step(Rng& rng, double s_max);

    /// Runs until s_max.
    void run_until(Rng& rng, double s_max);

    double dual_time() const noexcept { return time_; }
    const Torus& torus() const noexcept { return torus_; }
    const std::vector<OrderedDual>& roots() const noexcept { return roots_; }
    /// Occupied sites, unordered.
    const std::vector<Site>& particles() const noexcept { return particles_; }

private:
    Torus torus_;
    double jump_rate_;
    double birth_rate_;
    std::vector<OrderedDual> roots_;
    std::vector<Site> particles_;
    std::vector<std::uint8_t> occupied_;
    double time_ = 0.0;
};

struct DualRun {
    std::vector<OrderedDual> roots;
    std::vector<Site> particles;
    std::vector<DualProcess::Step> events;  ///< filled when requested
};

/// Simulates the dual from an ordered multiset of roots to dual time s_max.
DualRun simulate_dual(const Torus& torus, const ScalingFamily& family, std::span<const Site> roots,
                      double s_max, Rng& rng, bool record_events = false);

/// One dual sample of prod_{a in demes} (1 - u_t(a)): each deme in the
/// multiset contributes a uniformly chosen cell, the union dual runs for t,
/// and the result is prod over its particles of (1 - xi0).
double dual_density_product(const Torus& torus, const ScalingFamily& family,
                            std::span<const int> demes, std::span<const std::uint8_t> xi0, double t,
                            Rng& rng);

/// Writes "s,root,index,deme,cell" rows for the root lists after each event
/// (replays the recorded events from the initial roots).
void write_dual_trajectory_csv(std::ostream& os, std::span<const Site> roots,
                               const std::vector<DualProcess::Step>& events);

}  // namespace bvm
