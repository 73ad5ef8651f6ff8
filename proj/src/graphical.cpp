#include "bvm/graphical.hpp"

#include "bvm/random.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>
#include <tuple>

namespace bvm {

bool arrow_before(const Arrow& a, const Arrow& b) noexcept {
    return std::tie(a.time, a.source, a.target, a.kind) <
           std::tie(b.time, b.source, b.target, b.kind);
}

std::size_t EventLog::count(ArrowKind kind) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(arrows.begin(), arrows.end(), [kind](const Arrow& a) { return a.kind == kind; }));
}

EventLog generate_event_log(const Torus& torus, const ScalingFamily& family, double horizon,
                            std::uint64_t seed) {
    family.validate();
    if (!std::isfinite(horizon) || horizon <= 0.0)
        throw std::invalid_argument("generate_event_log: horizon must be positive and finite");

    EventLog log{torus, horizon, seed, {}};
    const double rates[2] = {family.r, family.selection_rate()};
    const int nbrs = torus.neighbour_count();
    for (int kind = 0; kind < 2; ++kind) {
        const double mean = rates[kind] * horizon;
        if (mean <= 0.0) continue;
        for (std::size_t x = 0; x < torus.size(); ++x) {
            const Site target = torus.site(x);
            for (int k = 0; k < nbrs; ++k) {
                Rng rng = Rng::stream(seed, {static_cast<std::uint64_t>(kind), x,
                                             static_cast<std::uint64_t>(k)});
                std::poisson_distribution<long> count(mean);
                const long n = count(rng);
                const Site source = torus.neighbour(target, k);
                for (long a = 0; a < n; ++a)
                    log.arrows.push_back({rng.uniform() * horizon, source, target,
                                          static_cast<ArrowKind>(kind)});
            }
        }
    }
    std::sort(log.arrows.begin(), log.arrows.end(), arrow_before);
    return log;
}

EventLog thin_selection(const EventLog& log, double keep, std::uint64_t seed) {
    if (!(keep >= 0.0 && keep <= 1.0)) throw std::invalid_argument("thin_selection: keep must be in [0,1]");
    EventLog out{log.torus, log.horizon, log.seed, {}};
    out.arrows.reserve(log.arrows.size());
    Rng rng(seed);
    for (const Arrow& a : log.arrows) {
        if (a.kind == ArrowKind::selection && !rng.bernoulli(keep)) continue;
        out.arrows.push_back(a);
    }
    return out;
}

void apply_arrow(Configuration& c, const Arrow& a) noexcept {
    const std::size_t x = c.torus.index(a.target);
    const std::size_t y = c.torus.index(a.source);
    if (a.kind == ArrowKind::voter || c.xi[y]) {
        c.xi[x] = c.xi[y];
        c.eta[x] = c.eta[y];
    }
}

Configuration replay_forward(const EventLog& log, Configuration start, double t) {
    return replay_forward_observed(log, std::move(start), t, [](const Configuration&) {});
}

std::vector<Site> DualReplay::union_sites() const {
    std::vector<Site> all;
    for (const auto& r : roots) all.insert(all.end(), r.particles.begin(), r.particles.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
}

DualReplay replay_dual(const EventLog& log, double t, std::span<const Site> roots,
                       bool record_trajectory) {
    if (!(t <= log.horizon)) throw std::invalid_argument("replay_dual: t exceeds the log horizon");
    if (roots.empty()) throw std::invalid_argument("replay_dual: no roots");

    DualReplay out;
    out.t = t;
    for (const Site& z : roots) {
        if (!log.torus.contains(z)) throw std::invalid_argument("replay_dual: root outside the torus");
        out.roots.push_back(OrderedDual{{z}, 0.0});
    }
    if (record_trajectory) out.trajectory.push_back({0.0, out.roots});

    auto first_after = std::upper_bound(log.arrows.begin(), log.arrows.end(), t,
                                        [](double v, const Arrow& a) { return v < a.time; });
    for (auto it = std::make_reverse_iterator(first_after); it != log.arrows.rend(); ++it) {
        const Arrow& a = *it;
        const double s = t - a.time;
        const DualMove move = a.kind == ArrowKind::voter ? DualMove::jump : DualMove::birth;
        bool changed = false;
        for (auto& root : out.roots) {
            root.dual_time = s;
            changed |= apply_at_site(root, move, a.target, a.source);
        }
        if (changed && record_trajectory) out.trajectory.push_back({s, out.roots});
    }
    for (auto& root : out.roots) root.dual_time = t;
    return out;
}

PathwiseCheck check_pathwise_duality(const EventLog& log, const Configuration& start, double t,
                                     std::span<const Site> roots) {
    const Configuration end = replay_forward(log, start, t);
    const DualReplay dual = replay_dual(log, t, roots);
    const Torus& torus = log.torus;

    PathwiseCheck check;
    bool forward_any = false;
    for (std::size_t k = 0; k < roots.size(); ++k) {
        const std::size_t z = torus.index(roots[k]);
        forward_any |= end.xi[z] != 0;
        const OrderedDual& list = dual.roots[k];
        const bool dual_type = eval_F(list, torus, start.xi) == 0.0;
        const bool dual_label = eval_G(list, torus, start.xi, start.eta) == 1.0;
        if (dual_type != (end.xi[z] != 0)) ++check.type_violations;
        if (dual_label != (end.eta[z] != 0)) ++check.label_violations;
    }
    bool dual_any = false;
    for (const Site& y : dual.union_sites()) dual_any |= start.xi[torus.index(y)] != 0;
    if (dual_any != forward_any) ++check.union_violations;
    return check;
}

void write_log_csv(std::ostream& os, const EventLog& log) {
    os << "time,src_deme,src_cell,dst_deme,dst_cell,kind\n";
    os.precision(17);
    for (const Arrow& a : log.arrows) {
        os << a.time << ',' << a.source.deme << ',' << a.source.cell << ',' << a.target.deme << ','
           << a.target.cell << ',' << (a.kind == ArrowKind::voter ? "voter" : "selection") << '\n';
    }
}

}  // namespace bvm
