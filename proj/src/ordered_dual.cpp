#include "bvm/ordered_dual.hpp"

#include <algorithm>
#include <stdexcept>

namespace bvm {

std::size_t OrderedDual::find(Site s) const noexcept {
    return static_cast<std::size_t>(std::find(particles.begin(), particles.end(), s) -
                                    particles.begin());
}

void apply_order_rules(OrderedDual& dual, const DualEvent& event) {
    auto& p = dual.particles;
    const std::size_t i = event.index;
    if (i >= p.size()) throw std::out_of_range("apply_order_rules: stale particle index");
    if (p[i] == event.to) throw std::invalid_argument("apply_order_rules: move onto own site");

    const std::size_t j = dual.find(event.to);
    const auto at = [&](std::size_t k) { return p.begin() + static_cast<std::ptrdiff_t>(k); };

    if (event.move == DualMove::jump) {
        if (j == p.size()) {
            p[i] = event.to;
        } else if (j < i) {
            p.erase(at(i));
        } else {
            p[i] = event.to;
            p.erase(at(j));
        }
        return;
    }

    // birth
    if (j == p.size()) {
        p.insert(at(i), event.to);
    } else if (j > i) {
        p.erase(at(j));
        p.insert(at(i), event.to);
    }
    // j < i: the offspring lands behind an earlier entry and is dropped.
}

bool apply_at_site(OrderedDual& dual, DualMove move, Site from, Site to) {
    const std::size_t i = dual.find(from);
    if (i == dual.size()) return false;
    apply_order_rules(dual, {move, i, to});
    return true;
}

double eval_F(const OrderedDual& dual, const Torus& torus, std::span<const std::uint8_t> xi0) {
    double f = 1.0;
    for (const Site& y : dual.particles) f *= 1.0 - xi0[torus.index(y)];
    return f;
}

double eval_G(const OrderedDual& dual, const Torus& torus, std::span<const std::uint8_t> xi0,
              std::span<const std::uint8_t> eta0) {
    double g = 0.0;
    double none_before = 1.0;
    for (const Site& y : dual.particles) {
        const std::size_t k = torus.index(y);
        g += eta0[k] * none_before;
        none_before *= 1.0 - xi0[k];
    }
    return g;
}

const Site* first_occupied(const OrderedDual& dual, const Torus& torus,
                           std::span<const std::uint8_t> xi0) {
    for (const Site& y : dual.particles)
        if (xi0[torus.index(y)]) return &y;
    return nullptr;
}

}  // namespace bvm
