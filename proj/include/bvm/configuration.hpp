#pragma once

#include "bvm/lattice.hpp"

#include <stdexcept>

namespace bvm {

/// Type field xi and tracer-label field eta on a torus, with eta <= xi.
struct Configuration {
    Torus torus;
    Field xi;
    Field eta;
    double time = 0.0;

    explicit Configuration(Torus t) : torus(t), xi(t.size(), 0), eta(t.size(), 0) {}
    Configuration(Torus t, Field xi0, Field eta0, double time0 = 0.0)
        : torus(t), xi(std::move(xi0)), eta(std::move(eta0)), time(time0) {
        check();
    }

    std::uint8_t type_at(Site s) const { return xi[torus.index(s)]; }
    std::uint8_t label_at(Site s) const { return eta[torus.index(s)]; }

    /// Throws std::invalid_argument on shape mismatch or a label on a type-0 cell.
    void check() const {
        if (xi.size() != torus.size() || eta.size() != torus.size())
            throw std::invalid_argument("Configuration: field shape does not match torus");
        for (std::size_t i = 0; i < xi.size(); ++i) {
            if (xi[i] > 1 || eta[i] > 1) throw std::invalid_argument("Configuration: fields must be binary");
            if (eta[i] > xi[i]) throw std::invalid_argument("Configuration: eta must be <= xi");
        }
    }

    bool labels_dominated() const noexcept {
        for (std::size_t i = 0; i < xi.size(); ++i)
            if (eta[i] > xi[i]) return false;
        return true;
    }
};

}  // namespace bvm
