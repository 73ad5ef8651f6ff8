#include "bvm/experiments.hpp"

#include "bvm/dual.hpp"
#include "bvm/forward.hpp"
#include "bvm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bvm {

Configuration random_configuration(const Torus& torus, double p, double q, Rng& rng) {
    Configuration c(torus);
    for (std::size_t i = 0; i < torus.size(); ++i) {
        c.xi[i] = rng.bernoulli(p) ? 1 : 0;
        c.eta[i] = c.xi[i] && rng.bernoulli(q) ? 1 : 0;
    }
    return c;
}

PathwiseSummary pathwise_duality_experiment(const Torus& torus, const ScalingFamily& family, double T,
                                            std::size_t seeds, std::size_t per_seed,
                                            std::uint64_t master, unsigned workers) {
    std::vector<PathwiseCheck> per(seeds);
    parallel_for(seeds, workers, [&](std::size_t s) {
        const std::uint64_t log_seed = stream_key(master, {s});
        const EventLog log = generate_event_log(torus, family, T, log_seed);
        Rng rng = Rng::stream(master, {s, 1});
        for (std::size_t trial = 0; trial < per_seed; ++trial) {
            const Configuration start = random_configuration(torus, rng.uniform(), rng.uniform(), rng);
            const std::size_t count = 1 + rng.below(3);
            std::vector<Site> roots;
            for (std::size_t k = 0; k < count; ++k) roots.push_back(torus.site(rng.below(torus.size())));
            if (count > 1 && rng.bernoulli(0.3)) roots.back() = roots.front();
            const double t = rng.uniform() * T;
            const PathwiseCheck c = check_pathwise_duality(log, start, t, roots);
            per[s].type_violations += c.type_violations;
            per[s].label_violations += c.label_violations;
            per[s].union_violations += c.union_violations;
        }
    });
    PathwiseSummary out;
    out.trials = seeds * per_seed;
    for (const PathwiseCheck& c : per) {
        out.totals.type_violations += c.type_violations;
        out.totals.label_violations += c.label_violations;
        out.totals.union_violations += c.union_violations;
    }
    return out;
}

namespace {

DualityReport compare_samples(const std::vector<double>& lhs, const std::vector<double>& rhs) {
    DualityReport r;
    r.lhs = estimate(lhs);
    r.rhs = estimate(rhs);
    r.pass = agree_within(r.lhs, r.rhs, 3.0);
    return r;
}

}  // namespace

DualityReport product_duality_experiment(const Configuration& start, const ScalingFamily& family,
                                         std::span<const int> demes, double t, std::size_t reps,
                                         std::uint64_t seed, unsigned workers) {
    if (demes.empty()) throw std::invalid_argument("product_duality_experiment: empty multiset");
    std::vector<double> forward(reps), dual(reps);
    parallel_for(reps, workers, [&](std::size_t i) {
        Rng rng = Rng::stream(seed, {0, i});
        const ForwardRun run = simulate_forward(start, family, t, rng);
        forward[i] = product_statistic(run.final, demes);
    });
    parallel_for(reps, workers, [&](std::size_t i) {
        Rng rng = Rng::stream(seed, {1, i});
        dual[i] = dual_density_product(start.torus, family, demes, start.xi, t, rng);
    });
    return compare_samples(forward, dual);
}

DualityReport tracer_duality_experiment(const Configuration& start, const ScalingFamily& family,
                                        std::span<const Site> zero_sites,
                                        std::span<const Site> label_sites, double t,
                                        std::size_t reps, std::uint64_t seed, unsigned workers) {
    std::vector<Site> roots(zero_sites.begin(), zero_sites.end());
    roots.insert(roots.end(), label_sites.begin(), label_sites.end());
    if (roots.empty()) throw std::invalid_argument("tracer_duality_experiment: no sites");
    std::vector<double> forward(reps), dual(reps);
    parallel_for(reps, workers, [&](std::size_t i) {
        Rng rng = Rng::stream(seed, {0, i});
        const ForwardRun run = simulate_forward(start, family, t, rng);
        bool event = true;
        for (const Site& x : zero_sites) event = event && run.final.type_at(x) == 0;
        for (const Site& x : label_sites) event = event && run.final.label_at(x) == 1;
        forward[i] = event ? 1.0 : 0.0;
    });
    parallel_for(reps, workers, [&](std::size_t i) {
        Rng rng = Rng::stream(seed, {1, i});
        const DualRun run = simulate_dual(start.torus, family, roots, t, rng);
        double value = 1.0;
        for (std::size_t r = 0; r < roots.size(); ++r) {
            value *= r < zero_sites.size() ? eval_F(run.roots[r], start.torus, start.xi)
                                           : eval_G(run.roots[r], start.torus, start.xi, start.eta);
        }
        dual[i] = value;
    });
    return compare_samples(forward, dual);
}

KernelIdentityReport heat_kernel_identities(double L, double t) {
    const HeatKernel p(L, t);
    const HeatKernel p2(L, 2.0 * t);
    KernelIdentityReport r;
    r.L = L;
    r.t = t;
    const long n = p.support();
    long double mass = 0.0L;
    long double square = 0.0L;
    for (long k = -n; k <= n; ++k) {
        const long double w = static_cast<long double>(k) / L;
        const long double v = p(static_cast<double>(w));
        mass += v;
        square += v * v;
        r.symmetry_error = std::max(r.symmetry_error, std::abs(p(static_cast<double>(w)) - p(static_cast<double>(-w))));
    }
    r.normalization_error = static_cast<double>(std::abs(mass / L - 1.0L));
    r.chapman_error = static_cast<double>(std::abs(square / L - static_cast<long double>(p2(0.0))));
    r.pass = r.normalization_error <= 1e-12 && r.symmetry_error <= 1e-12 && r.chapman_error <= 1e-12;
    return r;
}

ReductionReport homogeneous_logistic_check(const Mesh& mesh, const LimitParams& limits, double theta,
                                           double T, double u0, double ell0) {
    if (!(0.0 < u0 && u0 <= 1.0 && 0.0 <= ell0 && ell0 <= u0))
        throw std::invalid_argument("homogeneous_logistic_check: need 0 <= ell0 <= u0, u0 > 0");
    LimitParams det = limits;
    det.gamma = 0.0;
    const SPDEField start =
        SPDEField::sample(mesh, [u0](double) { return u0; }, [ell0](double) { return ell0; });
    const SpdeRun run = solve_spde(start, mesh, det, theta, T, 0, true);
    const double rate = 2.0 * theta * det.beta;
    const double exact = 1.0 / (1.0 + (1.0 - u0) / u0 * std::exp(-rate * run.final.time));
    ReductionReport r;
    for (std::size_t i = 0; i < mesh.cells; ++i) {
        r.u_error = std::max(r.u_error, std::abs(run.final.u[i] - exact));
        r.ell_error = std::max(r.ell_error, std::abs(run.final.ell[i] - exact * ell0 / u0));
    }
    r.pass = r.u_error <= r.tolerance && r.ell_error <= r.tolerance;
    return r;
}

ReductionReport refined_mesh_check(const Mesh& mesh, const LimitParams& limits, double theta, double T,
                                   const std::function<double(double)>& u0,
                                   const std::function<double(double)>& ell0, int refine) {
    if (refine < 2) throw std::invalid_argument("refined_mesh_check: refine must be >= 2");
    LimitParams det = limits;
    det.gamma = 0.0;
    Mesh fine = mesh;
    fine.dx = mesh.dx / refine;
    fine.dt = mesh.dt / (refine * refine);
    fine.cells = mesh.cells * static_cast<std::size_t>(refine);
    const SpdeRun coarse = solve_spde(SPDEField::sample(mesh, u0, ell0), mesh, det, theta, T, 0, true);
    const SpdeRun reference = solve_spde(SPDEField::sample(fine, u0, ell0), fine, det, theta, T, 0, true);
    ReductionReport r;
    for (std::size_t i = 0; i < mesh.cells; ++i) {
        const std::size_t j = i * static_cast<std::size_t>(refine);
        r.u_error = std::max(r.u_error, std::abs(coarse.final.u[i] - reference.final.u[j]));
        r.ell_error = std::max(r.ell_error, std::abs(coarse.final.ell[i] - reference.final.ell[j]));
    }
    r.pass = r.u_error <= r.tolerance && r.ell_error <= r.tolerance;
    return r;
}

MarginalReport u_marginal_check(const SPDEField& start, const Mesh& mesh, const LimitParams& limits,
                                double theta, double T, std::size_t reps, std::uint64_t seed,
                                unsigned workers) {
    std::vector<double> cm(reps), sm(reps), cs(reps), ss(reps);
    auto moments = [&](const SPDEField& f, double& mass, double& square) {
        mass = square = 0.0;
        for (double v : f.u) {
            mass += v;
            square += v * v;
        }
        mass *= mesh.dx;
        square *= mesh.dx;
    };
    parallel_for(reps, workers, [&](std::size_t i) {
        const SpdeRun coupled = solve_spde(start, mesh, limits, theta, T, stream_key(seed, {0, i}), true);
        moments(coupled.final, cm[i], cs[i]);
        const SpdeRun single = solve_spde(start, mesh, limits, theta, T, stream_key(seed, {1, i}), false);
        moments(single.final, sm[i], ss[i]);
    });
    MarginalReport r;
    r.coupled_mass = estimate(cm);
    r.single_mass = estimate(sm);
    r.coupled_square = estimate(cs);
    r.single_square = estimate(ss);
    r.pass = agree_within(r.coupled_mass, r.single_mass) && agree_within(r.coupled_square, r.single_square);
    return r;
}

ResidualReport martingale_residual_experiment(const SPDEField& start, const Mesh& mesh,
                                              const TestFunction& phi, const LimitParams& limits,
                                              double theta, double T, std::size_t record_every,
                                              std::size_t reps, std::uint64_t seed,
                                              const TestFunction* psi, unsigned workers) {
    if (record_every == 0) throw std::invalid_argument("martingale_residual_experiment: record_every must be >= 1");
    std::vector<double> final_m(reps), realized(reps), predicted(reps);
    std::vector<std::uint64_t> clamps(reps);
    parallel_for(reps, workers, [&](std::size_t i) {
        const SpdeRun run =
            solve_spde(start, mesh, limits, theta, T, stream_key(seed, {i}), psi != nullptr, record_every);
        const ResidualSeries res = psi ? coupled_martingale_residual(run.trajectory, mesh, phi, *psi, limits, theta)
                                       : martingale_residual(run.trajectory, mesh, phi, limits, theta);
        final_m[i] = res.martingale.back();
        realized[i] = res.realized_qv.back();
        predicted[i] = res.predicted_qv.back();
        clamps[i] = run.final.clamps;
    });
    ResidualReport r;
    r.final_residual = estimate(final_m);
    r.realized_qv = estimate(realized);
    r.predicted_qv = estimate(predicted);
    r.qv_ratio = r.predicted_qv.mean > 0.0 ? r.realized_qv.mean / r.predicted_qv.mean : 0.0;
    for (std::uint64_t c : clamps) r.clamps += c;
    r.pass = std::abs(r.final_residual.mean) <= 3.0 * r.final_residual.se && r.qv_ratio >= 0.9 &&
             r.qv_ratio <= 1.1;
    return r;
}

LadderReport coalescence_ladder(std::span<const long> Ls, double alpha, double nu, std::size_t n,
                                std::size_t limit_n, double limit_dt, std::uint64_t seed,
                                double time_cap) {
    if (Ls.empty()) throw std::invalid_argument("coalescence_ladder: no rungs");
    LadderReport r;
    const CensoredSamples limit = sample_limit_law(alpha, limit_n, limit_dt, stream_key(seed, {0}), time_cap);
    r.limit_samples = limit.values.size();
    r.limit_truncated = limit.truncated;
    for (std::size_t k = 0; k < Ls.size(); ++k) {
        const long L = Ls[k];
        const double m = alpha * static_cast<double>(L) / nu;
        const long M = std::lround(m);
        if (M < 1 || std::abs(m - static_cast<double>(M)) > 1e-9)
            throw std::invalid_argument("coalescence_ladder: alpha L / nu must be a positive integer");
        const CensoredSamples d = coalescence_time_experiment(L, M, nu, n, stream_key(seed, {1, k}), time_cap);
        r.rungs.push_back(LadderRung{L, M, ks_statistic(d.values, limit.values), d.truncated});
    }
    r.decreasing = true;
    for (std::size_t k = 1; k < r.rungs.size(); ++k)
        r.decreasing = r.decreasing && r.rungs[k].ks < r.rungs[k - 1].ks;
    return r;
}

LimitDualityReport limit_duality_experiment(std::span<const double> x,
                                            const std::function<double(double)>& u0,
                                            const SpatialDualityConfig& base, std::size_t reps,
                                            std::uint64_t seed, unsigned workers) {
    if (x.empty()) throw std::invalid_argument("limit_duality_experiment: no positions");
    base.limits.validate();
    const auto zero = [](double) { return 0.0; };
    const std::vector<double> points(x.begin(), x.end());

    std::vector<double> coarse(reps), fine(reps);
    parallel_for(reps, workers, [&](std::size_t i) {
        const RefinedPair pair = solve_spde_refined_pair(u0, zero, base.mesh, base.limits, base.theta,
                                                         base.T, stream_key(seed, {0, i}), false);
        double pc = 1.0, pf = 1.0;
        for (double y : points) {
            pc *= 1.0 - interpolate_field(pair.coarse.u, base.mesh, y);
            pf *= 1.0 - interpolate_field(pair.fine.u, pair.fine_mesh, y);
        }
        coarse[i] = pc;
        fine[i] = pf;
    });

    BbmParams bp = bbm_params(base.limits, base.theta, base.bbm_dt);
    bp.local_time = base.local_time;
    std::vector<double> dual(reps);
    parallel_for(reps, workers, [&](std::size_t i) {
        Rng rng = Rng::stream(seed, {1, i});
        const BbmRun run = simulate_bbm(points, bp, base.T, rng);
        double prod = 1.0;
        for (double y : run.final.positions()) prod *= 1.0 - u0(y);
        dual[i] = prod;
    });

    LimitDualityReport r;
    r.coarse = compare_samples(coarse, dual);
    r.fine = compare_samples(fine, dual);
    const double coarse_gap = std::abs(r.coarse.lhs.mean - r.coarse.rhs.mean);
    const double fine_gap = std::abs(r.fine.lhs.mean - r.fine.rhs.mean);
    r.within = fine_gap <= std::max(3.0 * combined_se(r.fine.lhs, r.fine.rhs), r.slack);
    r.shrinks = fine_gap <= coarse_gap;
    r.pass = r.within && r.shrinks;
    return r;
}

}  // namespace bvm
