#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace bvm {

/// A cell: deme index on the ring and cell index within the deme.
struct Site {
    int deme = 0;
    int cell = 0;

    friend constexpr auto operator<=>(const Site&, const Site&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Site& s) {
    return os << '(' << s.deme << ',' << s.cell << ')';
}

/// W demes of M cells on a ring. Cells interact only with cells of the two
/// adjacent demes. With W == 2 both adjacent demes coincide and each cell
/// has M neighbours instead of 2M.
class Torus {
public:
    Torus(int demes, int cells_per_deme) : demes_(demes), cells_(cells_per_deme) {
        if (demes < 2) throw std::invalid_argument("Torus: need at least 2 demes");
        if (cells_per_deme < 1) throw std::invalid_argument("Torus: need at least 1 cell per deme");
    }

    int demes() const noexcept { return demes_; }
    int cells_per_deme() const noexcept { return cells_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(demes_) * cells_; }

    std::size_t index(Site s) const noexcept {
        return static_cast<std::size_t>(s.deme) * cells_ + s.cell;
    }
    Site site(std::size_t idx) const noexcept {
        return {static_cast<int>(idx / cells_), static_cast<int>(idx % cells_)};
    }

    int wrap(int deme) const noexcept {
        const int m = deme % demes_;
        return m < 0 ? m + demes_ : m;
    }

    bool contains(Site s) const noexcept {
        return s.deme >= 0 && s.deme < demes_ && s.cell >= 0 && s.cell < cells_;
    }

    /// Number of distinct adjacent demes (1 when W == 2, else 2).
    int adjacent_demes() const noexcept { return demes_ == 2 ? 1 : 2; }
    int neighbour_count() const noexcept { return adjacent_demes() * cells_; }
    std::size_t directed_pairs() const noexcept { return size() * neighbour_count(); }

    /// The k-th neighbour of x, k in [0, neighbour_count()).
    Site neighbour(Site x, int k) const noexcept {
        const int side = k / cells_;
        const int cell = k % cells_;
        const int deme = wrap(side == 0 ? x.deme + 1 : x.deme - 1);
        return {deme, cell};
    }

    bool adjacent(Site x, Site y) const noexcept {
        return wrap(x.deme + 1) == y.deme || wrap(x.deme - 1) == y.deme;
    }

private:
    int demes_;
    int cells_;
};

/// A binary field over the sites of a torus.
using Field = std::vector<std::uint8_t>;

}  // namespace bvm
