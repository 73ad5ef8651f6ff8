#pragma once

#include "bvm/lattice.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace bvm {

/// Ancestry-ordered dual particle list for one root.
///
/// particles[0] is the first candidate ancestor: reading the list against a
/// configuration at dual time s, the root's state is that of the first
/// listed type-1 site. Sites are pairwise distinct.
struct OrderedDual {
    std::vector<Site> particles;
    double dual_time = 0.0;

    std::size_t size() const noexcept { return particles.size(); }
    /// Position of s in the list, or size() when absent.
    std::size_t find(Site s) const noexcept;
    bool contains(Site s) const noexcept { return find(s) != size(); }
};

enum class DualMove { jump, birth };

/// A dual event acting on the particle at `index` (0-based) and site `to`.
struct DualEvent {
    DualMove move = DualMove::jump;
    std::size_t index = 0;
    Site to{};
};

/// Apply one event under the ancestry-ordering rules.
///
/// jump without collision: the particle moves, order unchanged.
/// jump onto the particle at j: the entry with the larger index is dropped and
///   the survivor sits at `to`.
/// birth: the offspring takes position index and everything from index on
///   shifts back by one; an offspring landing on an occupied site merges
///   under the same larger-index-dropped rule.
///
/// Throws std::out_of_range for a stale index and std::invalid_argument
/// when `to` equals the acting particle's own site.
void apply_order_rules(OrderedDual& dual, const DualEvent& event);

/// Convenience: apply a move of the particle currently at `from`, if the
/// list contains it. Returns whether anything changed.
bool apply_at_site(OrderedDual& dual, DualMove move, Site from, Site to);

/// F = prod_i (1 - xi0(y_i)).
double eval_F(const OrderedDual& dual, const Torus& torus, std::span<const std::uint8_t> xi0);

/// G = sum_j eta0(y_j) prod_{i<j} (1 - xi0(y_i)).
double eval_G(const OrderedDual& dual, const Torus& torus, std::span<const std::uint8_t> xi0,
              std::span<const std::uint8_t> eta0);

/// The first listed site with xi0 == 1, if any.
const Site* first_occupied(const OrderedDual& dual, const Torus& torus,
                           std::span<const std::uint8_t> xi0);

}  // namespace bvm
