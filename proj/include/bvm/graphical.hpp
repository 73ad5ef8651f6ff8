#pragma once

#include "bvm/configuration.hpp"
#include "bvm/lattice.hpp"
#include "bvm/ordered_dual.hpp"
#include "bvm/scaling.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace bvm {

enum class ArrowKind : std::uint8_t { voter = 0, selection = 1 };

/// An arrow source -> target at `time`: the target copies the source
/// (selection arrows only when the source has type 1).
struct Arrow {
    double time = 0.0;
    Site source{};
    Site target{};
    ArrowKind kind = ArrowKind::voter;
};

/// Total order used for the log: (time, source, target, kind).
bool arrow_before(const Arrow& a, const Arrow& b) noexcept;

/// Harris graphical representation on [0, horizon].
struct EventLog {
    Torus torus;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    std::vector<Arrow> arrows;  ///< sorted by arrow_before

    std::size_t count(ArrowKind kind) const noexcept;
};

/// Independent Poisson arrows for every ordered neighbour pair: voter arrows
/// at rate r and selection arrows at rate theta/R. Each (kind, target,
/// neighbour slot) process draws from its own substream of `seed`, so the log
/// does not depend on generation order.
///
/// Throws std::invalid_argument for a non-finite or non-positive horizon.
EventLog generate_event_log(const Torus& torus, const ScalingFamily& family, double horizon,
                            std::uint64_t seed);

/// Keeps each selection arrow independently with probability keep. The result
/// is a log of the same family with theta scaled by keep, sharing every voter
/// arrow and a subset of the selection arrows with the input.
EventLog thin_selection(const EventLog& log, double keep, std::uint64_t seed);

/// Applies all arrows with time <= t to `start` (which must be at time 0).
Configuration replay_forward(const EventLog& log, Configuration start, double t);
inline Configuration replay_forward(const EventLog& log, Configuration start) {
    return replay_forward(log, std::move(start), log.horizon);
}

/// Same as replay_forward but invokes observer(config) after every arrow.
template <class Observer>
Configuration replay_forward_observed(const EventLog& log, Configuration start, double t,
                                      Observer&& observer);

/// Applies one arrow to a configuration.
void apply_arrow(Configuration& config, const Arrow& arrow) noexcept;

struct DualSnapshot {
    double dual_time = 0.0;
    std::vector<OrderedDual> roots;
};

/// Result of reading a log backwards from time t.
struct DualReplay {
    double t = 0.0;
    std::vector<OrderedDual> roots;        ///< one ordered list per root, in input order
    std::vector<DualSnapshot> trajectory;  ///< states after each effective event, if requested

    /// Union of all root lists as a sorted set of sites.
    std::vector<Site> union_sites() const;
};

/// Ordered dual started from `roots` at time t, reading arrows with time <= t
/// in reverse. A voter arrow y -> x moves a dual particle at x to y; a
/// selection arrow y -> x makes a particle at x give birth at y. Each root
/// keeps its own ordered list; a site shared by several lists is one
/// physical particle.
///
/// Throws std::invalid_argument if t exceeds the horizon or roots is empty.
DualReplay replay_dual(const EventLog& log, double t, std::span<const Site> roots,
                       bool record_trajectory = false);

struct PathwiseCheck {
    std::size_t type_violations = 0;    ///< per-root type indicator mismatches
    std::size_t label_violations = 0;   ///< per-root tracer label mismatches
    std::size_t union_violations = 0;   ///< "some z in A is 1" vs "some dual site is 1"
    std::size_t violations() const noexcept {
        return type_violations + label_violations + union_violations;
    }
};

/// Compares replay_forward and replay_dual on the same log at time t.
PathwiseCheck check_pathwise_duality(const EventLog& log, const Configuration& start, double t,
                                     std::span<const Site> roots);

/// Debug dump: time,src_deme,src_cell,dst_deme,dst_cell,kind
void write_log_csv(std::ostream& os, const EventLog& log);

template <class Observer>
Configuration replay_forward_observed(const EventLog& log, Configuration start, double t,
                                      Observer&& observer) {
    for (const Arrow& a : log.arrows) {
        if (a.time > t) break;
        apply_arrow(start, a);
        start.time = a.time;
        observer(static_cast<const Configuration&>(start));
    }
    start.time = t;
    return start;
}

}  // namespace bvm
