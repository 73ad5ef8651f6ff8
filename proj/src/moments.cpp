#include "bvm/moments.hpp"

#include "bvm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bvm {
namespace {

double root(double x) { return x > 0.0 ? std::sqrt(x) : 0.0; }

DiffusionState project(DiffusionState s) {
    s.z = std::max(s.z, 0.0);
    s.v = std::max(s.v, 0.0);
    const double excess = s.z + s.v - 1.0;
    if (excess > 0.0) {
        s.z -= 0.5 * excess;
        s.v -= 0.5 * excess;
        if (s.z < 0.0) {
            s.v = 1.0;
            s.z = 0.0;
        } else if (s.v < 0.0) {
            s.z = 1.0;
            s.v = 0.0;
        }
    }
    return s;
}

std::size_t step_count(double T, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("diffusion: dt must be > 0");
    if (!(T >= 0.0)) throw std::invalid_argument("diffusion: T must be >= 0");
    return static_cast<std::size_t>(std::llround(T / dt));
}

DualityReport compare(const std::vector<double>& lhs, const std::vector<double>& rhs,
                      std::size_t overflow) {
    DualityReport r;
    r.lhs = estimate(lhs);
    r.rhs = estimate(rhs);
    r.overflow = overflow;
    r.pass = agree_within(r.lhs, r.rhs, 3.0);
    return r;
}

/// Chain samples of g(N_T), discarding overflowed runs.
template <class G>
std::vector<double> chain_samples(long n0, const WfParams& p, double T, std::size_t reps,
                                  std::uint64_t seed, unsigned workers, std::size_t& overflow, G g) {
    std::vector<double> values(reps);
    std::vector<std::uint8_t> over(reps, 0);
    parallel_for(reps, workers, [&](std::size_t i) {
        Rng rng = Rng::stream(seed, {1, i});
        const ChainRun run = simulate_chain(n0, p, T, rng);
        over[i] = run.overflow;
        if (!run.overflow) values[i] = g(run.n);
    });
    std::vector<double> kept;
    kept.reserve(reps);
    overflow = 0;
    for (std::size_t i = 0; i < reps; ++i) {
        if (over[i])
            ++overflow;
        else
            kept.push_back(values[i]);
    }
    return kept;
}

}  // namespace

void WfParams::validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("WfParams: beta must be >= 0");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("WfParams: sigma must be >= 0");
}

void DiffusionState::check() const {
    if (!(z >= 0.0 && v >= 0.0 && z + v <= 1.0 + 1e-12))
        throw std::invalid_argument("DiffusionState: need z, v >= 0 and z + v <= 1");
}

double euler_u(double u, const WfParams& p, double dt, double dB) {
    const double w = u * (1.0 - u);
    return std::clamp(u + p.beta * w * dt + p.sigma * root(w) * dB, 0.0, 1.0);
}

double euler_z(double z, const WfParams& p, double dt, double dB) {
    const double w = z * (1.0 - z);
    return std::clamp(z - p.beta * w * dt - p.sigma * root(w) * dB, 0.0, 1.0);
}

DiffusionState euler_coupled(DiffusionState s, const WfParams& p, double dt, double dB0, double dB1,
                             double dB2) {
    const double shared = p.sigma * root(s.v * s.z) * dB0;
    const double dz = -p.beta * s.z * (1.0 - s.z) * dt - shared - p.sigma * root(s.z * (1.0 - s.z - s.v)) * dB1;
    const double dv = p.beta * s.v * s.z * dt + shared + p.sigma * root(s.v * (1.0 - s.v - s.z)) * dB2;
    s.z += dz;
    s.v += dv;
    s.time += dt;
    return project(s);
}

DiffusionState simulate_diffusion(DiffusionState s0, const WfParams& p, double T, double dt, Rng& rng) {
    p.validate();
    s0.check();
    const std::size_t steps = step_count(T, dt);
    const double sd = std::sqrt(dt);
    DiffusionState s = s0;
    if (s.v == 0.0) {
        for (std::size_t k = 0; k < steps; ++k) s.z = euler_z(s.z, p, dt, sd * rng.normal());
        s.time += static_cast<double>(steps) * dt;
        return s;
    }
    for (std::size_t k = 0; k < steps; ++k) {
        const double b0 = sd * rng.normal();
        const double b1 = sd * rng.normal();
        const double b2 = sd * rng.normal();
        s = euler_coupled(s, p, dt, b0, b1, b2);
    }
    return s;
}

PairedDiffusion simulate_diffusion_paired(DiffusionState s0, const WfParams& p, double T, double dt,
                                          Rng& rng) {
    p.validate();
    s0.check();
    const std::size_t steps = step_count(T, dt);
    const double h = 0.5 * dt;
    const double sd = std::sqrt(h);
    PairedDiffusion out{s0, s0};
    const bool coupled = s0.v != 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        if (!coupled) {
            const double a = sd * rng.normal();
            const double b = sd * rng.normal();
            out.fine.z = euler_z(euler_z(out.fine.z, p, h, a), p, h, b);
            out.coarse.z = euler_z(out.coarse.z, p, dt, a + b);
            continue;
        }
        double a[3], b[3];
        for (double& x : a) x = sd * rng.normal();
        for (double& x : b) x = sd * rng.normal();
        out.fine = euler_coupled(out.fine, p, h, a[0], a[1], a[2]);
        out.fine = euler_coupled(out.fine, p, h, b[0], b[1], b[2]);
        out.coarse = euler_coupled(out.coarse, p, dt, a[0] + b[0], a[1] + b[1], a[2] + b[2]);
    }
    if (!coupled) {
        out.coarse.time = out.fine.time = s0.time + static_cast<double>(steps) * dt;
    }
    return out;
}

double chain_birth_rate(long m, const WfParams& p) { return p.beta * static_cast<double>(m); }

double chain_death_rate(long m, const WfParams& p) {
    const auto x = static_cast<double>(m);
    return p.sigma * p.sigma * x * (x - 1.0) / 2.0;
}

ChainRun simulate_chain(long n0, const WfParams& p, double T, Rng& rng, long cap,
                        const SojournObserver& observe) {
    p.validate();
    if (n0 < 1) throw std::invalid_argument("simulate_chain: n0 must be >= 1");
    ChainRun run;
    run.n = n0;
    for (;;) {
        const double birth = chain_birth_rate(run.n, p);
        const double death = chain_death_rate(run.n, p);
        const double total = birth + death;
        if (total <= 0.0) break;
        const double hold = rng.exponential(total);
        if (run.time + hold > T) break;
        run.time += hold;
        const long next = rng.uniform() * total < birth ? run.n + 1 : run.n - 1;
        if (observe) observe(run.n, hold, next);
        run.n = next;
        ++run.jumps;
        if (run.n > cap) {
            run.overflow = true;
            return run;
        }
    }
    run.time = T;
    return run;
}

double power_dual(double z, long n) { return n == 0 ? 1.0 : std::pow(z, static_cast<double>(n)); }

MomentDualityReport check_moment_duality(double z0, long n0, const WfParams& p, double T, double dt,
                                         std::size_t reps, std::uint64_t seed, unsigned workers) {
    if (!(z0 >= 0.0 && z0 <= 1.0)) throw std::invalid_argument("check_moment_duality: z0 outside [0, 1]");
    if (n0 < 1) throw std::invalid_argument("check_moment_duality: n0 must be >= 1");
    std::vector<double> coarse(reps), fine(reps), shift(reps);
    parallel_for(reps, workers, [&](std::size_t i) {
        Rng rng = Rng::stream(seed, {0, i});
        const PairedDiffusion d = simulate_diffusion_paired(DiffusionState{z0, 0.0, 0.0}, p, T, dt, rng);
        coarse[i] = power_dual(d.coarse.z, n0);
        fine[i] = power_dual(d.fine.z, n0);
        shift[i] = fine[i] - coarse[i];
    });
    std::size_t overflow = 0;
    const std::vector<double> rhs =
        chain_samples(n0, p, T, reps, seed, workers, overflow, [z0](long n) { return power_dual(z0, n); });

    MomentDualityReport r;
    static_cast<DualityReport&>(r) = compare(coarse, rhs, overflow);
    r.lhs_half_step = estimate(fine);
    r.dt_shift = estimate(shift);
    r.bias_pass = std::abs(r.dt_shift.mean) < r.lhs.se;
    return r;
}

double eval_Fk(std::span<const double> z, std::span<const double> ell, int k) {
    if (z.size() != ell.size()) throw std::invalid_argument("eval_Fk: z and ell differ in length");
    const std::size_t n = z.size();
    if (k < 0 || static_cast<std::size_t>(k) > n) throw std::invalid_argument("eval_Fk: need 0 <= k <= n");
    if (k == 0) {
        double prod = 1.0;
        for (double v : z) prod *= v;
        return prod;
    }
    // e[j][q]: elementary symmetric polynomial of degree q in ell_j..ell_{n-1}.
    const auto K = static_cast<std::size_t>(k);
    std::vector<std::vector<double>> e(n + 1, std::vector<double>(K, 0.0));
    e[n][0] = 1.0;
    for (std::size_t j = n; j-- > 0;) {
        e[j][0] = 1.0;
        for (std::size_t q = 1; q < K; ++q) e[j][q] = e[j + 1][q] + ell[j] * e[j + 1][q - 1];
    }
    double total = 0.0;
    double prefix = 1.0;
    for (std::size_t j1 = 0; j1 < n; ++j1) {
        total += prefix * ell[j1] * e[j1 + 1][K - 1];
        prefix *= z[j1];
    }
    return total;
}

double eval_Fk(const std::function<double(double)>& z, const std::function<double(double)>& ell,
               std::span<const double> x, int k) {
    std::vector<double> zs, ls;
    zs.reserve(x.size());
    ls.reserve(x.size());
    for (double y : x) {
        zs.push_back(z(y));
        ls.push_back(ell(y));
    }
    return eval_Fk(zs, ls, k);
}

double eval_Fk_scalar(double z, double ell, long n, int k) {
    if (n < 0) throw std::invalid_argument("eval_Fk_scalar: n must be >= 0");
    const std::vector<double> zs(static_cast<std::size_t>(n), z);
    const std::vector<double> ls(static_cast<std::size_t>(n), ell);
    return eval_Fk(zs, ls, k);
}

DualityReport check_coupled_duality(int k, long n0, DiffusionState s0, const WfParams& p, double T,
                                    double dt, std::size_t reps, std::uint64_t seed, unsigned workers) {
    s0.check();
    if (k < 0 || k > n0) throw std::invalid_argument("check_coupled_duality: need 0 <= k <= n0");
    std::vector<double> lhs(reps);
    parallel_for(reps, workers, [&](std::size_t i) {
        Rng rng = Rng::stream(seed, {0, i});
        DiffusionState s = s0;
        const std::size_t steps = step_count(T, dt);
        const double sd = std::sqrt(dt);
        for (std::size_t j = 0; j < steps; ++j) {
            const double b0 = sd * rng.normal();
            const double b1 = sd * rng.normal();
            const double b2 = sd * rng.normal();
            s = euler_coupled(s, p, dt, b0, b1, b2);
        }
        lhs[i] = eval_Fk_scalar(s.z, s.v, n0, k);
    });
    std::size_t overflow = 0;
    const std::vector<double> rhs = chain_samples(n0, p, T, reps, seed, workers, overflow, [&](long n) {
        return n < k ? 0.0 : eval_Fk_scalar(s0.z, s0.v, n, k);
    });
    return compare(lhs, rhs, overflow);
}

double interpolate_field(std::span<const double> values, const Mesh& mesh, double x) {
    const double len = mesh.length();
    double y = std::fmod(x, len);
    if (y < 0.0) y += len;
    const double pos = y / mesh.dx;
    const auto i = static_cast<std::size_t>(std::floor(pos)) % mesh.cells;
    const double frac = pos - std::floor(pos);
    const std::size_t j = (i + 1) % mesh.cells;
    return (1.0 - frac) * values[i] + frac * values[j];
}

DualityReport check_coupled_duality_spatial(int k, std::span<const double> x,
                                            const std::function<double(double)>& u0,
                                            const std::function<double(double)>& ell0,
                                            const SpatialDualityConfig& cfg, std::size_t reps,
                                            std::uint64_t seed, unsigned workers) {
    if (x.empty()) throw std::invalid_argument("check_coupled_duality_spatial: no positions");
    if (k < 0 || static_cast<std::size_t>(k) > x.size())
        throw std::invalid_argument("check_coupled_duality_spatial: need 0 <= k <= |x|");
    cfg.limits.validate();
    cfg.mesh.check_stability(cfg.limits.alpha);
    const SPDEField start = SPDEField::sample(cfg.mesh, u0, ell0);
    const std::vector<double> points(x.begin(), x.end());

    std::vector<double> lhs(reps);
    parallel_for(reps, workers, [&](std::size_t i) {
        const SpdeRun run = solve_spde(start, cfg.mesh, cfg.limits, cfg.theta, cfg.T, stream_key(seed, {0, i}), true);
        std::vector<double> zs, ls;
        for (double y : points) {
            zs.push_back(1.0 - interpolate_field(run.final.u, cfg.mesh, y));
            ls.push_back(interpolate_field(run.final.ell, cfg.mesh, y));
        }
        lhs[i] = k > static_cast<int>(zs.size()) ? 0.0 : eval_Fk(zs, ls, k);
    });

    BbmParams bp = bbm_params(cfg.limits, cfg.theta, cfg.bbm_dt);
    bp.local_time = cfg.local_time;
    std::vector<double> rhs(reps);
    parallel_for(reps, workers, [&](std::size_t i) {
        Rng rng = Rng::stream(seed, {1, i});
        const BbmRun run = simulate_bbm(points, bp, cfg.T, rng);
        const std::vector<double>& ys = run.final.positions();
        if (static_cast<std::size_t>(k) > ys.size()) {
            rhs[i] = 0.0;
            return;
        }
        std::vector<double> zs, ls;
        for (double y : ys) {
            zs.push_back(1.0 - u0(y));
            ls.push_back(ell0 ? ell0(y) : 0.0);
        }
        rhs[i] = eval_Fk(zs, ls, k);
    });
    return compare(lhs, rhs, 0);
}

DriftReport generator_drift_check(double z0, int m, const WfParams& p, double h1, double h2,
                                  std::size_t reps, std::uint64_t seed, int substeps, unsigned workers) {
    if (!(0.0 < h1 && h1 < h2)) throw std::invalid_argument("generator_drift_check: need 0 < h1 < h2");
    if (m < 1 || substeps < 1) throw std::invalid_argument("generator_drift_check: need m, substeps >= 1");
    const double dt = h1 / substeps;
    const std::size_t n1 = step_count(h1, dt);
    const std::size_t n2 = step_count(h2, dt);
    const double base = std::pow(z0, m);
    std::vector<double> d1(reps), d2(reps), rich(reps);
    parallel_for(reps, workers, [&](std::size_t i) {
        Rng rng = Rng::stream(seed, {i});
        const double sd = std::sqrt(dt);
        double z = z0;
        double at_h1 = 0.0;
        for (std::size_t s = 1; s <= n2; ++s) {
            z = euler_z(z, p, dt, sd * rng.normal());
            if (s == n1) at_h1 = z;
        }
        d1[i] = (std::pow(at_h1, m) - base) / h1;
        d2[i] = (std::pow(z, m) - base) / h2;
        rich[i] = (h2 * d1[i] - h1 * d2[i]) / (h2 - h1);
    });
    DriftReport r;
    const double mm = m;
    r.generator = p.beta * mm * (std::pow(z0, m + 1) - base) +
                  p.sigma * p.sigma * mm * (mm - 1.0) / 2.0 * (std::pow(z0, m - 1) - base);
    r.drift_h1 = estimate(d1);
    r.drift_h2 = estimate(d2);
    r.extrapolated = estimate(rich);
    auto ok = [&](const Estimate& e) { return std::abs(e.mean - r.generator) <= 3.0 * e.se; };
    r.pass = ok(r.drift_h1) && ok(r.drift_h2) && ok(r.extrapolated);
    return r;
}

std::vector<ChainRateReport> chain_rate_check(std::span<const long> states, const WfParams& p,
                                              std::uint64_t min_sojourns, std::uint64_t seed, long n0) {
    std::vector<ChainRateReport> reports;
    for (long m : states) {
        reports.emplace_back();
        reports.back().m = m;
    }
    auto slot = [&](long m) -> ChainRateReport* {
        for (auto& r : reports)
            if (r.m == m) return &r;
        return nullptr;
    };
    auto done = [&] {
        return std::all_of(reports.begin(), reports.end(),
                           [&](const ChainRateReport& r) { return r.sojourns >= min_sojourns; });
    };
    const SojournObserver observe = [&](long m, double hold, long next) {
        if (ChainRateReport* r = slot(m)) {
            ++r->sojourns;
            r->exposure += hold;
            (next > m ? r->births : r->deaths) += 1;
        }
    };
    for (std::uint64_t batch = 0; !done(); ++batch) {
        if (batch > 100000) throw std::runtime_error("chain_rate_check: states not visited");
        Rng rng = Rng::stream(seed, {batch});
        simulate_chain(n0, p, 1000.0, rng, default_chain_cap, observe);
    }
    for (auto& r : reports) {
        auto rate = [&](std::uint64_t count) {
            const double est = static_cast<double>(count) / r.exposure;
            return Estimate{est, count > 0 ? est / std::sqrt(static_cast<double>(count)) : 0.0, r.sojourns};
        };
        r.birth_rate = rate(r.births);
        r.death_rate = rate(r.deaths);
        auto ok = [](const Estimate& e, double expected) {
            if (e.se == 0.0) return e.mean == expected;
            return std::abs(e.mean - expected) <= 3.0 * e.se;
        };
        r.pass = ok(r.birth_rate, chain_birth_rate(r.m, p)) && ok(r.death_rate, chain_death_rate(r.m, p));
    }
    return reports;
}

std::vector<Estimate> lemma6_martingale(double z0, long l, const WfParams& p, double T,
                                        std::span<const double> times, double dt, std::size_t reps,
                                        std::uint64_t seed, unsigned workers) {
    std::vector<Estimate> out;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double t = times[k];
        if (!(t >= 0.0 && t <= T)) throw std::invalid_argument("lemma6_martingale: times must lie in [0, T]");
        std::vector<double> values(reps);
        std::vector<std::uint8_t> over(reps, 0);
        parallel_for(reps, workers, [&](std::size_t i) {
            Rng diffusion = Rng::stream(seed, {k, 0, i});
            Rng chain = Rng::stream(seed, {k, 1, i});
            const DiffusionState s = simulate_diffusion(DiffusionState{z0, 0.0, 0.0}, p, t, dt, diffusion);
            const ChainRun run = simulate_chain(l, p, T - t, chain);
            over[i] = run.overflow;
            values[i] = run.overflow ? 0.0 : power_dual(s.z, run.n);
        });
        std::vector<double> kept;
        for (std::size_t i = 0; i < reps; ++i)
            if (!over[i]) kept.push_back(values[i]);
        out.push_back(estimate(kept));
    }
    return out;
}

}  // namespace bvm
