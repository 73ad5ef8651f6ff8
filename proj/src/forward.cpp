#include "bvm/forward.hpp"

#include <cassert>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace bvm {

ForwardRun simulate_forward(Configuration c, const ScalingFamily& family, double T, Rng& rng,
                            std::span<const double> sample_times) {
    family.validate();
    c.check();
    if (!(T >= 0.0) || !std::isfinite(T)) throw std::invalid_argument("simulate_forward: T must be >= 0");
    for (std::size_t k = 0; k < sample_times.size(); ++k) {
        if (sample_times[k] < 0.0 || sample_times[k] > T || (k > 0 && sample_times[k] < sample_times[k - 1]))
            throw std::invalid_argument("simulate_forward: sample times must be sorted within [0, T]");
    }

    const Torus& torus = c.torus;
    const double pairs = static_cast<double>(torus.directed_pairs());
    const double voter = pairs * family.r;
    const double selection = pairs * family.selection_rate();
    const double total = voter + selection;
    const double p_voter = voter / total;
    const auto cells = static_cast<std::uint64_t>(torus.size());
    const auto nbrs = static_cast<std::uint64_t>(torus.neighbour_count());

    ForwardRun run{c, {}, 0};
    run.samples.reserve(sample_times.size());
    std::size_t next_sample = 0;
    double t = c.time;
    for (;;) {
        const double next = t + rng.exponential(total);
        while (next_sample < sample_times.size() && sample_times[next_sample] < next) {
            c.time = sample_times[next_sample++];
            run.samples.push_back(c);
        }
        if (next > T) break;
        t = next;
        const std::size_t x = rng.below(cells);
        const Site target = torus.site(x);
        const std::size_t y = torus.index(torus.neighbour(target, static_cast<int>(rng.below(nbrs))));
        const bool is_voter = rng.uniform() < p_voter;
        if (is_voter || c.xi[y]) {
            c.xi[x] = c.xi[y];
            c.eta[x] = c.eta[y];
        }
        assert(c.eta[x] <= c.xi[x]);
        ++run.events;
    }
    c.time = T;
    run.final = std::move(c);
    return run;
}

ForwardRun simulate_forward(Configuration start, const ScalingFamily& family, double T,
                            std::uint64_t seed, std::span<const double> sample_times) {
    Rng rng(seed);
    return simulate_forward(std::move(start), family, T, rng, sample_times);
}

double DensityProfile::interpolate(const std::vector<double>& values, double w) const noexcept {
    const auto n = static_cast<double>(values.size());
    double x = std::fmod(w * L, n);
    if (x < 0) x += n;
    const auto lo = static_cast<std::size_t>(x) % values.size();
    const std::size_t hi = (lo + 1) % values.size();
    const double frac = x - std::floor(x);
    return (1.0 - frac) * values[lo] + frac * values[hi];
}

DensityProfile density_profiles(const Configuration& config, const ScalingFamily& family) {
    const Torus& torus = config.torus;
    const int M = torus.cells_per_deme();
    DensityProfile p;
    p.L = family.L;
    p.u.assign(torus.demes(), 0.0);
    p.ell.assign(torus.demes(), 0.0);
    for (int d = 0; d < torus.demes(); ++d) {
        int ones = 0, labels = 0;
        for (int i = 0; i < M; ++i) {
            const std::size_t k = torus.index({d, i});
            ones += config.xi[k];
            labels += config.eta[k];
        }
        p.u[d] = static_cast<double>(ones) / M;
        p.ell[d] = static_cast<double>(labels) / M;
    }
    return p;
}

double product_statistic(const Configuration& config, std::span<const int> demes) {
    const Torus& torus = config.torus;
    const int M = torus.cells_per_deme();
    double prod = 1.0;
    for (int a : demes) {
        if (a < 0 || a >= torus.demes()) throw std::out_of_range("product_statistic: deme outside window");
        int ones = 0;
        for (int i = 0; i < M; ++i) ones += config.xi[torus.index({a, i})];
        prod *= 1.0 - static_cast<double>(ones) / M;
    }
    return prod;
}

void write_profile_csv(std::ostream& os, const DensityProfile& profile) {
    os << "w,u,ell\n";
    for (std::size_t d = 0; d < profile.demes(); ++d)
        os << profile.position(d) << ',' << profile.u[d] << ',' << profile.ell[d] << '\n';
}

}  // namespace bvm
