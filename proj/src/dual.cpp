#include "bvm/dual.hpp"

#include <algorithm>
#include <cassert>
#include <ostream>
#include <stdexcept>

namespace bvm {

DualProcess::DualProcess(const Torus& torus, const ScalingFamily& family, std::span<const Site> roots)
    : torus_(torus), occupied_(torus.size(), 0) {
    family.validate();
    if (roots.empty()) throw std::invalid_argument("DualProcess: no roots");
    const double nbrs = torus.neighbour_count();
    jump_rate_ = nbrs * family.r;
    birth_rate_ = nbrs * family.selection_rate();
    for (const Site& z : roots) {
        if (!torus.contains(z)) throw std::invalid_argument("DualProcess: root outside the torus");
        roots_.push_back(OrderedDual{{z}, 0.0});
        auto& occ = occupied_[torus.index(z)];
        if (!occ) {
            occ = 1;
            particles_.push_back(z);
        }
    }
}

std::optional<DualProcess::Step> DualProcess::step(Rng& rng, double s_max) {
    const double total = static_cast<double>(particles_.size()) * (jump_rate_ + birth_rate_);
    const double next = time_ + rng.exponential(total);
    if (next > s_max) {
        time_ = s_max;
        for (auto& r : roots_) r.dual_time = s_max;
        return std::nullopt;
    }
    time_ = next;
    const std::size_t p = rng.below(particles_.size());
    const Site from = particles_[p];
    const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(torus_.neighbour_count())));
    const Site to = torus_.neighbour(from, k);
    const DualMove move = rng.uniform() * (jump_rate_ + birth_rate_) < jump_rate_ ? DualMove::jump
                                                                                   : DualMove::birth;
    const bool coalesced = occupied_[torus_.index(to)] != 0;

    for (auto& r : roots_) {
        apply_at_site(r, move, from, to);
        r.dual_time = time_;
    }
    if (move == DualMove::jump) {
        occupied_[torus_.index(from)] = 0;
        particles_[p] = particles_.back();
        particles_.pop_back();
    }
    if (!coalesced) {
        occupied_[torus_.index(to)] = 1;
        particles_.push_back(to);
    }
#ifndef NDEBUG
    std::size_t listed = 0;
    std::vector<std::uint8_t> seen(torus_.size(), 0);
    for (const auto& r : roots_)
        for (const Site& s : r.particles)
            if (!seen[torus_.index(s)]++) ++listed;
    assert(listed == particles_.size());
#endif
    return Step{time_, move, from, to, coalesced};
}

void DualProcess::run_until(Rng& rng, double s_max) {
    while (step(rng, s_max)) {
    }
}

DualRun simulate_dual(const Torus& torus, const ScalingFamily& family, std::span<const Site> roots,
                      double s_max, Rng& rng, bool record_events) {
    DualProcess dual(torus, family, roots);
    DualRun run;
    while (auto ev = dual.step(rng, s_max)) {
        if (record_events) run.events.push_back(*ev);
    }
    run.roots = dual.roots();
    run.particles = dual.particles();
    return run;
}

double dual_density_product(const Torus& torus, const ScalingFamily& family,
                            std::span<const int> demes, std::span<const std::uint8_t> xi0, double t,
                            Rng& rng) {
    std::vector<Site> roots;
    roots.reserve(demes.size());
    const auto M = static_cast<std::uint64_t>(torus.cells_per_deme());
    for (int a : demes) {
        if (a < 0 || a >= torus.demes()) throw std::out_of_range("dual_density_product: deme outside window");
        roots.push_back({a, static_cast<int>(rng.below(M))});
    }
    DualProcess dual(torus, family, roots);
    dual.run_until(rng, t);
    double prod = 1.0;
    for (const Site& y : dual.particles()) prod *= 1.0 - xi0[torus.index(y)];
    return prod;
}

void write_dual_trajectory_csv(std::ostream& os, std::span<const Site> roots,
                               const std::vector<DualProcess::Step>& events) {
    std::vector<OrderedDual> lists;
    for (const Site& z : roots) lists.push_back(OrderedDual{{z}, 0.0});
    auto emit = [&](double s) {
        for (std::size_t r = 0; r < lists.size(); ++r)
            for (std::size_t i = 0; i < lists[r].size(); ++i)
                os << s << ',' << r << ',' << i + 1 << ',' << lists[r].particles[i].deme << ','
                   << lists[r].particles[i].cell << '\n';
    };
    os << "s,root,index,deme,cell\n";
    emit(0.0);
    for (const auto& ev : events) {
        for (auto& l : lists) apply_at_site(l, ev.move, ev.from, ev.to);
        emit(ev.dual_time);
    }
}

}  // namespace bvm
