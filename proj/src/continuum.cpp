#include "bvm/continuum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace bvm {

double local_time_band(std::span<const double> path, double eps, double dt, double qv_rate) {
    if (!(eps > 0.0)) throw std::invalid_argument("local_time_band: eps must be > 0");
    if (!(dt > 0.0)) throw std::invalid_argument("local_time_band: dt must be > 0");
    std::size_t inside = 0;
    for (double x : path) inside += std::abs(x) <= eps ? 1 : 0;
    return qv_rate * dt * static_cast<double>(inside) / (2.0 * eps);
}

double bridge_local_time(double a, double b, double h, double qv_rate, double u) {
    const double scale = std::sqrt(qv_rate * h);
    const double x = a / scale;
    const double y = b / scale;
    const double reach = std::abs(x) + std::abs(y);
    const double v = std::sqrt((y - x) * (y - x) - 2.0 * std::log(u)) - reach;
    return v > 0.0 ? v * scale : 0.0;
}

void BbmParams::validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("BbmParams: alpha must be > 0");
    if (!(branch_rate >= 0.0)) throw std::invalid_argument("BbmParams: branch_rate must be >= 0");
    if (!(gamma >= 0.0)) throw std::invalid_argument("BbmParams: gamma must be >= 0");
    if (!(dt > 0.0)) throw std::invalid_argument("BbmParams: dt must be > 0");
    if (!(band_factor > 0.0)) throw std::invalid_argument("BbmParams: band_factor must be > 0");
}

double BbmParams::band() const { return band_factor * std::sqrt(4.0 * alpha * dt); }

BbmParams bbm_params(const LimitParams& limits, double theta, double dt) {
    limits.validate();
    BbmParams p;
    p.alpha = limits.alpha;
    p.branch_rate = 2.0 * theta * limits.beta;
    p.gamma = limits.gamma;
    p.dt = dt;
    return p;
}

BbmState::BbmState(std::span<const double> positions, const BbmParams& params, Rng& rng)
    : params_(params) {
    params_.validate();
    for (double x : positions) {
        positions_.push_back(x);
        ids_.push_back(next_id_++);
        add_pairs_for(ids_.size() - 1, rng);
    }
}

std::uint64_t BbmState::key(std::uint64_t a, std::uint64_t b) noexcept {
    if (a > b) std::swap(a, b);
    return (a << 32) ^ b;
}

void BbmState::add_pairs_for(std::size_t index, Rng& rng) {
    const std::uint64_t id = ids_[index];
    for (std::size_t k = 0; k < ids_.size(); ++k) {
        if (k == index) continue;
        const double threshold = params_.gamma > 0.0
                                     ? params_.alpha * rng.exponential(1.0) / params_.gamma
                                     : std::numeric_limits<double>::infinity();
        clocks_[key(id, ids_[k])] = PairClock{0.0, threshold};
    }
}

void BbmState::remove_at(std::size_t index) {
    const std::uint64_t id = ids_[index];
    for (std::size_t k = 0; k < ids_.size(); ++k)
        if (k != index) clocks_.erase(key(id, ids_[k]));
    ids_.erase(ids_.begin() + static_cast<std::ptrdiff_t>(index));
    positions_.erase(positions_.begin() + static_cast<std::ptrdiff_t>(index));
}

const PairClock& BbmState::clock(std::size_t i, std::size_t j) const {
    return clocks_.at(key(ids_.at(i), ids_.at(j)));
}

void BbmState::step(Rng& rng) {
    const double dt = params_.dt;
    const double sd = std::sqrt(2.0 * params_.alpha * dt);
    const double qv = 4.0 * params_.alpha;
    const std::size_t n = ids_.size();
    if (params_.local_time == LocalTimeMethod::bridge) {
        const std::vector<double> before = positions_;
        for (double& x : positions_) x += sd * rng.normal();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double a = before[j] - before[i];
                const double b = positions_[j] - positions_[i];
                // Skip pairs whose bridge reaches 0 with probability < e^-40.
                if (2.0 * a * b > 40.0 * qv * dt) continue;
                const double l = bridge_local_time(a, b, dt, qv, rng.uniform_open());
                if (l > 0.0) clocks_[key(ids_[i], ids_[j])].local_time += l;
            }
        }
    } else {
        for (double& x : positions_) x += sd * rng.normal();
        const double eps = params_.band();
        const double increment = qv * dt / (2.0 * eps);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (std::abs(positions_[j] - positions_[i]) <= eps)
                    clocks_[key(ids_[i], ids_[j])].local_time += increment;
    }

    // Coalescence: the later-indexed member of an expired pair is removed.
    if (params_.gamma > 0.0) {
        bool removed = true;
        while (removed) {
            removed = false;
            for (std::size_t j = 1; j < ids_.size() && !removed; ++j) {
                for (std::size_t i = 0; i < j; ++i) {
                    const PairClock& c = clocks_[key(ids_[i], ids_[j])];
                    if (c.local_time >= c.threshold) {
                        remove_at(j);
                        ++coalescences_;
                        removed = true;
                        break;
                    }
                }
            }
        }
    }

    if (params_.branch_rate > 0.0) {
        const double p = -std::expm1(-params_.branch_rate * dt);
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            if (!rng.bernoulli(p)) continue;
            positions_.insert(positions_.begin() + static_cast<std::ptrdiff_t>(i), positions_[i]);
            ids_.insert(ids_.begin() + static_cast<std::ptrdiff_t>(i), next_id_++);
            add_pairs_for(i, rng);
            ++births_;
            ++i;  // skip the parent, now at i + 1
        }
    }
    time_ += dt;
}

BbmRun simulate_bbm(std::span<const double> positions, const BbmParams& params, double T, Rng& rng,
                    std::span<const double> sample_times) {
    if (positions.empty()) throw std::invalid_argument("simulate_bbm: no particles");
    BbmRun run{BbmState(positions, params, rng), {}};
    const auto steps = static_cast<std::size_t>(std::llround(T / params.dt));
    std::size_t next_sample = 0;
    for (std::size_t s = 0; s <= steps; ++s) {
        while (next_sample < sample_times.size() &&
               sample_times[next_sample] <= run.final.time() + 0.5 * params.dt) {
            run.snapshots.push_back(run.final.positions());
            ++next_sample;
        }
        if (s < steps) run.final.step(rng);
    }
    return run;
}

double bbm_product(std::span<const double> positions, const BbmParams& params, double T,
                   const std::function<double(double)>& u0, Rng& rng) {
    BbmRun run = simulate_bbm(positions, params, T, rng);
    double prod = 1.0;
    for (double y : run.final.positions()) prod *= 1.0 - u0(y);
    return prod;
}

CensoredSamples sample_limit_law(double alpha, std::size_t n, double dt, std::uint64_t seed,
                                 double time_cap) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("sample_limit_law: alpha must be >= 0");
    if (!(dt > 0.0)) throw std::invalid_argument("sample_limit_law: dt must be > 0");
    const double eps = 4.0 * std::sqrt(dt);
    const double sd = std::sqrt(dt);
    const double increment = dt / (2.0 * eps);
    constexpr double inf = std::numeric_limits<double>::infinity();

    CensoredSamples out;
    out.values.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        Rng rng = Rng::stream(seed, {k});
        const double target = alpha * rng.exponential(1.0);
        double x = 1.0;
        double t = 0.0;
        double local = 0.0;
        bool done = false;
        while (t <= time_cap) {
            if (std::abs(x) > eps) {
                // Exact first passage to the band edge: d^2 / Z^2.
                const double d = std::abs(x) - eps;
                const double z = rng.normal();
                t += d * d / (z * z);
                x = std::copysign(eps, x);
                continue;
            }
            x += sd * rng.normal();
            t += dt;
            if (std::abs(x) <= eps) {
                local += increment;
                if (local > target) {
                    done = true;
                    break;
                }
            }
        }
        if (done && t <= time_cap) {
            out.values.push_back(t);
        } else {
            out.values.push_back(inf);
            ++out.truncated;
        }
    }
    return out;
}

CensoredSamples coalescence_time_experiment(long L, long M, double nu, std::size_t n,
                                            std::uint64_t seed, double time_cap) {
    if (L < 1 || M < 1) throw std::invalid_argument("coalescence_time_experiment: need L, M >= 1");
    if (!(nu > 0.0)) throw std::invalid_argument("coalescence_time_experiment: nu must be > 0");
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double L2 = static_cast<double>(L) * static_cast<double>(L);
    // Jump count beyond which the rescaled time exceeds the cap with
    // overwhelming probability (Gamma(K,1)/L^2 concentrates at K/L^2).
    const double mean_jumps = time_cap * L2;
    const auto max_jumps = static_cast<std::uint64_t>(mean_jumps + 10.0 * std::sqrt(mean_jumps) + 100.0);

    CensoredSamples out;
    out.values.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        Rng rng = Rng::stream(seed, {k});
        long pos = L;
        std::uint64_t jumps = 0;
        bool coalesced = false;
        while (!coalesced && jumps < max_jumps) {
            std::uint64_t bits = rng();
            for (int b = 0; b < 64; ++b, bits >>= 1) {
                pos += (bits & 1u) ? 1 : -1;
                ++jumps;
                if (pos == 0 && rng.below(static_cast<std::uint64_t>(M)) == 0) {
                    coalesced = true;
                    break;
                }
            }
        }
        if (!coalesced) {
            out.values.push_back(inf);
            ++out.truncated;
            continue;
        }
        // Holding times are Exp(2 nu); their sum is Gamma(jumps, 1 / (2 nu)).
        std::gamma_distribution<double> holding(static_cast<double>(jumps), 1.0 / (2.0 * nu));
        const double t0 = holding(rng);
        const double rescaled = 2.0 * nu * t0 / L2;
        if (rescaled > time_cap) {
            out.values.push_back(inf);
            ++out.truncated;
        } else {
            out.values.push_back(rescaled);
        }
    }
    return out;
}

}  // namespace bvm
