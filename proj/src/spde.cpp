#include "bvm/spde.hpp"

#include "bvm/forward.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace bvm {
namespace {

double positive_sqrt(double x) { return x > 0.0 ? std::sqrt(x) : 0.0; }

double laplacian_at(const std::vector<double>& f, std::size_t i, double inv_dx2) {
    const std::size_t n = f.size();
    const double left = f[i == 0 ? n - 1 : i - 1];
    const double right = f[i + 1 == n ? 0 : i + 1];
    return (left + right - 2.0 * f[i]) * inv_dx2;
}

void check_field(const SPDEField& field, const Mesh& mesh) {
    if (field.u.size() != mesh.cells || field.ell.size() != mesh.cells)
        throw std::invalid_argument("SPDE: field size does not match mesh");
}

}  // namespace

void Mesh::check_stability(double alpha) const {
    if (!(dx > 0.0) || !(dt > 0.0) || cells < 3) throw std::domain_error("Mesh: need dx, dt > 0 and >= 3 cells");
    if (dt > dx * dx / (4.0 * alpha) * (1.0 + 1e-12))
        throw std::domain_error("Mesh: dt exceeds the stability bound dx^2 / (4 alpha)");
}

SPDEField SPDEField::sample(const Mesh& mesh, const std::function<double(double)>& u0,
                            const std::function<double(double)>& ell0) {
    SPDEField f;
    f.u.resize(mesh.cells);
    f.ell.resize(mesh.cells);
    for (std::size_t i = 0; i < mesh.cells; ++i) {
        f.u[i] = u0(mesh.x(i));
        f.ell[i] = ell0 ? ell0(mesh.x(i)) : 0.0;
        if (!(0.0 <= f.ell[i] && f.ell[i] <= f.u[i] && f.u[i] <= 1.0))
            throw std::invalid_argument("SPDEField: need 0 <= ell <= u <= 1");
    }
    return f;
}

void step_wf_spde(SPDEField& field, const Mesh& mesh, const LimitParams& limits, double theta,
                  std::span<const double> normals) {
    check_field(field, mesh);
    mesh.check_stability(limits.alpha);
    if (normals.size() < mesh.cells) throw std::invalid_argument("step_wf_spde: one normal per cell required");
    const double inv_dx2 = 1.0 / (mesh.dx * mesh.dx);
    const double selection = 2.0 * theta * limits.beta;
    const double noise_scale = std::sqrt(mesh.dt / mesh.dx);
    const double four_gamma = 4.0 * limits.gamma;

    const std::vector<double>& u = field.u;
    std::vector<double> next(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double v = u[i];
        double du = mesh.dt * (limits.alpha * laplacian_at(u, i, inv_dx2) + selection * v * (1.0 - v));
        if (four_gamma > 0.0) du += noise_scale * positive_sqrt(four_gamma * v * (1.0 - v)) * normals[i];
        next[i] = v + du;
    }
    for (double& v : next) {
        if (v < 0.0 || v > 1.0) {
            v = std::clamp(v, 0.0, 1.0);
            ++field.clamps;
        }
    }
    field.u = std::move(next);
    std::fill(field.ell.begin(), field.ell.end(), 0.0);
    field.time += mesh.dt;
}

void step_wf_spde(SPDEField& field, const Mesh& mesh, const LimitParams& limits, double theta,
                  Rng& noise) {
    std::vector<double> normals(mesh.cells, 0.0);
    if (limits.gamma > 0.0)
        for (double& n : normals) n = noise.normal();
    step_wf_spde(field, mesh, limits, theta, normals);
}

void step_coupled_spde(SPDEField& field, const Mesh& mesh, const LimitParams& limits, double theta,
                       std::span<const double> n0, std::span<const double> n1,
                       std::span<const double> n2) {
    check_field(field, mesh);
    mesh.check_stability(limits.alpha);
    if (n0.size() < mesh.cells || n1.size() < mesh.cells || n2.size() < mesh.cells)
        throw std::invalid_argument("step_coupled_spde: one normal per cell and noise required");
    const double inv_dx2 = 1.0 / (mesh.dx * mesh.dx);
    const double selection = 2.0 * theta * limits.beta;
    const double noise_scale = std::sqrt(mesh.dt / mesh.dx);
    const double g4 = 4.0 * limits.gamma;

    const std::vector<double>& u = field.u;
    const std::vector<double>& l = field.ell;
    std::vector<double> next_u(u.size()), next_l(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double a = u[i];
        const double b = l[i];
        double du = mesh.dt * (limits.alpha * laplacian_at(u, i, inv_dx2) + selection * a * (1.0 - a));
        double dl = mesh.dt * (limits.alpha * laplacian_at(l, i, inv_dx2) + selection * b * (1.0 - a));
        if (g4 > 0.0) {
            const double shared = positive_sqrt(g4 * b * (1.0 - a)) * n0[i];
            du += noise_scale * (shared + positive_sqrt(g4 * (a - b) * (1.0 - a)) * n1[i]);
            dl += noise_scale * (shared + positive_sqrt(g4 * b * (a - b)) * n2[i]);
        }
        next_u[i] = a + du;
        next_l[i] = b + dl;
    }
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double cu = std::clamp(next_u[i], 0.0, 1.0);
        const double cl = std::clamp(next_l[i], 0.0, cu);
        if (cu != next_u[i] || cl != next_l[i]) ++field.clamps;
        next_u[i] = cu;
        next_l[i] = cl;
    }
    field.u = std::move(next_u);
    field.ell = std::move(next_l);
    field.time += mesh.dt;
}

void step_coupled_spde(SPDEField& field, const Mesh& mesh, const LimitParams& limits, double theta,
                       Rng& w0, Rng& w1, Rng& w2) {
    std::vector<double> n0(mesh.cells, 0.0), n1(mesh.cells, 0.0), n2(mesh.cells, 0.0);
    if (limits.gamma > 0.0) {
        for (double& n : n0) n = w0.normal();
        for (double& n : n1) n = w1.normal();
        for (double& n : n2) n = w2.normal();
    }
    step_coupled_spde(field, mesh, limits, theta, n0, n1, n2);
}

SpdeRun solve_spde(SPDEField start, const Mesh& mesh, const LimitParams& limits, double theta,
                   double T, std::uint64_t seed, bool coupled, std::size_t record_every) {
    limits.validate();
    mesh.check_stability(limits.alpha);
    Rng w0 = Rng::stream(seed, {0});
    Rng w1 = Rng::stream(seed, {1});
    Rng w2 = Rng::stream(seed, {2});
    const auto steps = static_cast<std::size_t>(std::llround(T / mesh.dt));
    SpdeRun run{std::move(start), {}};
    if (record_every > 0) run.trajectory.push_back(run.final);
    for (std::size_t s = 1; s <= steps; ++s) {
        if (coupled)
            step_coupled_spde(run.final, mesh, limits, theta, w0, w1, w2);
        else
            step_wf_spde(run.final, mesh, limits, theta, w0);
        if (record_every > 0 && s % record_every == 0) run.trajectory.push_back(run.final);
    }
    return run;
}

Mesh halved(const Mesh& mesh) {
    Mesh fine = mesh;
    fine.dx = mesh.dx / 2.0;
    fine.dt = mesh.dt / 4.0;
    fine.cells = mesh.cells * 2;
    return fine;
}

RefinedPair solve_spde_refined_pair(const std::function<double(double)>& u0,
                                    const std::function<double(double)>& ell0, const Mesh& mesh,
                                    const LimitParams& limits, double theta, double T,
                                    std::uint64_t seed, bool coupled) {
    limits.validate();
    const Mesh fine_mesh = halved(mesh);
    mesh.check_stability(limits.alpha);
    RefinedPair out{SPDEField::sample(mesh, u0, ell0), SPDEField::sample(fine_mesh, u0, ell0), fine_mesh};
    const int noises = coupled ? 3 : 1;
    std::vector<Rng> streams;
    for (int k = 0; k < noises; ++k) streams.push_back(Rng::stream(seed, {static_cast<std::uint64_t>(k)}));
    std::vector<std::vector<double>> fine_n(noises, std::vector<double>(fine_mesh.cells));
    std::vector<std::vector<double>> coarse_n(noises, std::vector<double>(mesh.cells));
    const double norm = 1.0 / std::sqrt(8.0);
    const auto steps = static_cast<std::size_t>(std::llround(T / mesh.dt));
    for (std::size_t s = 0; s < steps; ++s) {
        for (auto& c : coarse_n) std::fill(c.begin(), c.end(), 0.0);
        for (int sub = 0; sub < 4; ++sub) {
            for (int k = 0; k < noises; ++k) {
                for (std::size_t j = 0; j < fine_mesh.cells; ++j) {
                    fine_n[k][j] = streams[k].normal();
                    coarse_n[k][j / 2] += norm * fine_n[k][j];
                }
            }
            if (coupled)
                step_coupled_spde(out.fine, fine_mesh, limits, theta, fine_n[0], fine_n[1], fine_n[2]);
            else
                step_wf_spde(out.fine, fine_mesh, limits, theta, fine_n[0]);
        }
        if (coupled)
            step_coupled_spde(out.coarse, mesh, limits, theta, coarse_n[0], coarse_n[1], coarse_n[2]);
        else
            step_wf_spde(out.coarse, mesh, limits, theta, coarse_n[0]);
    }
    return out;
}

HeatKernel::HeatKernel(double L, double t) : L_(L), t_(t) {
    if (!(L > 0.0)) throw std::invalid_argument("HeatKernel: L must be > 0");
    if (!(t >= 0.0)) throw std::invalid_argument("HeatKernel: t must be >= 0");
    const long double mu = static_cast<long double>(L) * L * t;  // jumps per direction
    if (mu == 0.0L) {
        prob_ = {1.0L};
        return;
    }
    // Poisson(mu) pmf on [0, n_max], by recurrence outward from the mode.
    const auto n_max = static_cast<std::size_t>(mu + 40.0L * std::sqrt(mu) + 60.0L);
    std::vector<long double> pois(n_max + 1, 0.0L);
    const auto mode = static_cast<std::size_t>(std::floor(mu));
    pois[mode] = std::exp(-mu + static_cast<long double>(mode) * std::log(mu) -
                          std::lgamma(static_cast<long double>(mode) + 1.0L));
    for (std::size_t j = mode + 1; j <= n_max; ++j) pois[j] = pois[j - 1] * mu / static_cast<long double>(j);
    for (std::size_t j = mode; j > 0; --j) pois[j - 1] = pois[j] * static_cast<long double>(j) / mu;
    long double total = 0.0L;
    for (long double p : pois) total += p;
    for (long double& p : pois) p /= total;

    // Skellam: P(X = k) = sum_j pois[j + k] pois[j].
    prob_.assign(n_max + 1, 0.0L);
    for (std::size_t k = 0; k <= n_max; ++k) {
        long double s = 0.0L;
        for (std::size_t j = 0; j + k <= n_max; ++j) s += pois[j + k] * pois[j];
        prob_[k] = s;
    }
}

double HeatKernel::probability(long k) const noexcept {
    const auto a = static_cast<std::size_t>(k < 0 ? -k : k);
    return a < prob_.size() ? static_cast<double>(prob_[a]) : 0.0;
}

double HeatKernel::operator()(double w) const noexcept {
    return L_ * probability(std::lround(w * L_));
}

std::vector<double> HeatKernel::ring(int demes) const {
    std::vector<long double> acc(static_cast<std::size_t>(demes), 0.0L);
    const long n = support();
    for (long k = -n; k <= n; ++k) {
        long m = k % demes;
        if (m < 0) m += demes;
        acc[static_cast<std::size_t>(m)] += prob_[static_cast<std::size_t>(k < 0 ? -k : k)];
    }
    return {acc.begin(), acc.end()};
}

double heat_kernel(double L, double t, double w) { return HeatKernel(L, t)(w); }

std::vector<double> heat_semigroup(std::span<const double> f, double L, double s) {
    const int n = static_cast<int>(f.size());
    const std::vector<double> kernel = HeatKernel(L, s).ring(n);
    std::vector<double> out(f.size(), 0.0);
    for (int z = 0; z < n; ++z) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += kernel[k] * f[(z - k + n) % n];
        out[z] = acc;
    }
    return out;
}

TestFunction gaussian_test_function(double centre, double width, double growth) {
    TestFunction phi;
    const double w2 = width * width;
    phi.value = [=](double s, double x) {
        const double d = x - centre;
        return std::exp(-d * d / (2 * w2)) * (1 + growth * s);
    };
    phi.d_time = [=](double, double x) {
        const double d = x - centre;
        return std::exp(-d * d / (2 * w2)) * growth;
    };
    phi.laplacian = [=](double s, double x) {
        const double d = x - centre;
        return std::exp(-d * d / (2 * w2)) * (d * d / (w2 * w2) - 1.0 / w2) * (1 + growth * s);
    };
    return phi;
}

namespace {

struct SampledTest {
    std::vector<double> value, d_time, laplacian;
};

SampledTest sample_test(const TestFunction& phi, const Mesh& mesh, double s) {
    SampledTest out;
    out.value.resize(mesh.cells);
    out.d_time.resize(mesh.cells);
    out.laplacian.resize(mesh.cells);
    for (std::size_t i = 0; i < mesh.cells; ++i) {
        const double x = mesh.x(i);
        out.value[i] = phi.value(s, x);
        out.d_time[i] = phi.d_time(s, x);
        out.laplacian[i] = phi.laplacian(s, x);
    }
    return out;
}

/// Pieces of the residual at one sampled time.
struct ResidualTerms {
    double pairing = 0.0;    // <u, phi> (+ <ell, psi>)
    double drift = 0.0;      // integrand of the compensator
    double qv_density = 0.0; // integrand of the predicted quadratic variation
};

ResidualSeries integrate_residual(const std::vector<double>& times,
                                  const std::vector<ResidualTerms>& terms) {
    ResidualSeries out;
    out.times = times;
    double compensator = 0.0;
    double predicted = 0.0;
    double realized = 0.0;
    double previous_m = 0.0;
    for (std::size_t k = 0; k < terms.size(); ++k) {
        if (k > 0) {
            const double h = times[k] - times[k - 1];
            compensator += 0.5 * h * (terms[k].drift + terms[k - 1].drift);
            predicted += 0.5 * h * (terms[k].qv_density + terms[k - 1].qv_density);
        }
        const double m = terms[k].pairing - terms[0].pairing - compensator;
        if (k > 0) realized += (m - previous_m) * (m - previous_m);
        previous_m = m;
        out.martingale.push_back(m);
        out.realized_qv.push_back(realized);
        out.predicted_qv.push_back(predicted);
    }
    return out;
}

}  // namespace

ResidualSeries martingale_residual(std::span<const SPDEField> trajectory, const Mesh& mesh,
                                   const TestFunction& phi, const LimitParams& limits, double theta) {
    const double selection = 2.0 * theta * limits.beta;
    std::vector<double> times;
    std::vector<ResidualTerms> terms;
    for (const SPDEField& f : trajectory) {
        const SampledTest p = sample_test(phi, mesh, f.time);
        ResidualTerms t;
        for (std::size_t i = 0; i < mesh.cells; ++i) {
            const double u = f.u[i];
            t.pairing += u * p.value[i];
            t.drift += u * p.d_time[i] + limits.alpha * u * p.laplacian[i] +
                       selection * u * (1.0 - u) * p.value[i];
            t.qv_density += 4.0 * limits.gamma * u * (1.0 - u) * p.value[i] * p.value[i];
        }
        t.pairing *= mesh.dx;
        t.drift *= mesh.dx;
        t.qv_density *= mesh.dx;
        times.push_back(f.time);
        terms.push_back(t);
    }
    return integrate_residual(times, terms);
}

ResidualSeries coupled_martingale_residual(std::span<const SPDEField> trajectory, const Mesh& mesh,
                                           const TestFunction& phi, const TestFunction& psi,
                                           const LimitParams& limits, double theta) {
    const double selection = 2.0 * theta * limits.beta;
    std::vector<double> times;
    std::vector<ResidualTerms> terms;
    for (const SPDEField& f : trajectory) {
        const SampledTest p = sample_test(phi, mesh, f.time);
        const SampledTest q = sample_test(psi, mesh, f.time);
        ResidualTerms t;
        for (std::size_t i = 0; i < mesh.cells; ++i) {
            const double u = f.u[i];
            const double l = f.ell[i];
            t.pairing += u * p.value[i] + l * q.value[i];
            t.drift += u * (p.d_time[i] + limits.alpha * p.laplacian[i]) +
                       l * (q.d_time[i] + limits.alpha * q.laplacian[i]) +
                       selection * (u * (1.0 - u) * p.value[i] + l * (1.0 - u) * q.value[i]);
            t.qv_density += 4.0 * limits.gamma *
                            (u * (1.0 - u) * p.value[i] * p.value[i] + l * (1.0 - l) * q.value[i] * q.value[i] +
                             2.0 * l * (1.0 - u) * p.value[i] * q.value[i]);
        }
        t.pairing *= mesh.dx;
        t.drift *= mesh.dx;
        t.qv_density *= mesh.dx;
        times.push_back(f.time);
        terms.push_back(t);
    }
    return integrate_residual(times, terms);
}

GreenReport green_representation_check(const Configuration& start, const ScalingFamily& family,
                                       double t, int z, std::size_t reps, std::uint64_t seed,
                                       std::size_t quadrature_points) {
    const Torus& torus = start.torus;
    if (torus.demes() < 3) throw std::invalid_argument("green_representation_check: need >= 3 demes");
    if (z < 0 || z >= torus.demes()) throw std::out_of_range("green_representation_check: deme outside window");
    if (quadrature_points < 1) throw std::invalid_argument("green_representation_check: need quadrature points");
    const DerivedRatios ratios = derived_ratios(family);
    const int W = torus.demes();

    const DensityProfile initial = density_profiles(start, family);
    GreenReport report;
    report.semigroup_value = heat_semigroup(initial.u, family.L, ratios.alpha_n * t)[z];

    // Quadrature grid s_q and ring kernels P_{alpha_n (t - s_q)}(w - z).
    std::vector<double> grid(quadrature_points + 1);
    std::vector<std::vector<double>> kernels;
    for (std::size_t q = 0; q <= quadrature_points; ++q) {
        grid[q] = t * static_cast<double>(q) / static_cast<double>(quadrature_points);
        kernels.push_back(HeatKernel(family.L, ratios.alpha_n * (t - grid[q])).ring(W));
    }

    RunningStats remainder, drift, difference;
    for (std::size_t rep = 0; rep < reps; ++rep) {
        Rng rng = Rng::stream(seed, {rep});
        const ForwardRun run = simulate_forward(start, family, t, rng, grid);
        std::vector<double> integrand(grid.size());
        for (std::size_t q = 0; q < grid.size(); ++q) {
            const DensityProfile p = density_profiles(run.samples[q], family);
            double acc = 0.0;
            for (int w = 0; w < W; ++w) {
                const double neighbours = p.u[(w + W - 1) % W] + p.u[(w + 1) % W];
                acc += neighbours * (1.0 - p.u[w]) * kernels[q][(w - z + W) % W];
            }
            integrand[q] = family.theta * ratios.beta_n * acc;
        }
        double y = 0.0;
        for (std::size_t q = 1; q < grid.size(); ++q)
            y += 0.5 * (grid[q] - grid[q - 1]) * (integrand[q] + integrand[q - 1]);
        const double r = density_profiles(run.final, family).u[z] - report.semigroup_value;
        remainder.add(r);
        drift.add(y);
        difference.add(r - y);
    }
    report.remainder = {remainder.mean(), remainder.se_or_zero(), remainder.count()};
    report.drift = {drift.mean(), drift.se_or_zero(), drift.count()};
    report.difference = {difference.mean(), difference.se_or_zero(), difference.count()};
    report.pass = std::abs(report.difference.mean) <= 3.0 * report.difference.se + 1e-12;
    return report;
}

void write_field_csv(std::ostream& os, const SPDEField& field, const Mesh& mesh) {
    os << "x,u,ell\n";
    for (std::size_t i = 0; i < mesh.cells; ++i) os << mesh.x(i) << ',' << field.u[i] << ',' << field.ell[i] << '\n';
}

}  // namespace bvm
