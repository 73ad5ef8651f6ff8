#include "bvm/harness.hpp"

#include "bvm/experiments.hpp"
#include "bvm/forward.hpp"
#include "bvm/parallel.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#ifndef BVM_GIT_HASH
#define BVM_GIT_HASH "unknown"
#endif

namespace bvm {

namespace {

struct KindInfo {
    ExperimentKind kind;
    std::string_view name;
    std::vector<std::string> params;
};

const std::vector<std::string> family_keys = {"L", "M", "R", "r", "theta", "demes"};
const std::vector<std::string> limit_keys = {"alpha", "beta", "gamma", "theta"};
const std::vector<std::string> mesh_keys = {"dx", "dt", "length", "T"};
const std::vector<std::string> profile_keys = {"u_mean", "u_amp", "ell_frac"};

std::vector<std::string> join(std::initializer_list<std::vector<std::string>> parts) {
    std::vector<std::string> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

const std::vector<KindInfo>& kind_table() {
    static const std::vector<KindInfo> table = {
        {ExperimentKind::simulate_forward, "simulate-forward", join({family_keys, {"p", "q", "T"}})},
        {ExperimentKind::replay_duality, "replay-duality", join({family_keys, {"T", "per_seed"}})},
        {ExperimentKind::dual_mc, "dual-mc",
         join({family_keys, {"p", "q", "t", "mode", "sets", "zero_sites", "label_sites"}})},
        {ExperimentKind::bbm, "bbm",
         join({limit_keys, mesh_keys, profile_keys,
               {"check", "positions", "bbm_dt", "local_time"}})},
        {ExperimentKind::coalescence_ladder, "coalescence-ladder",
         {"Ls", "alpha", "nu", "limit_n", "limit_dt", "cap"}},
        {ExperimentKind::spde, "spde", join({limit_keys, mesh_keys, profile_keys, {"check"}})},
        {ExperimentKind::coupled_spde, "coupled-spde",
         join({limit_keys, mesh_keys, profile_keys, {"check"}})},
        {ExperimentKind::martingale_residual, "martingale-residual",
         join({limit_keys, mesh_keys, profile_keys,
               {"coupled", "record_every", "phi_centre", "phi_width", "phi_growth", "psi_centre",
                "psi_width", "psi_growth"}})},
        {ExperimentKind::moment_duality, "moment-duality",
         {"mode", "z0", "n0", "beta", "sigma", "T", "dt", "m", "h1", "h2", "substeps", "states",
          "min_sojourns"}},
        {ExperimentKind::coupled_duality, "coupled-duality",
         join({limit_keys, mesh_keys, profile_keys,
               {"mode", "k", "n0", "z0", "v0", "sigma", "positions", "bbm_dt", "local_time"}})},
        {ExperimentKind::kernel_check, "kernel-check", {"Ls", "ts"}},
    };
    return table;
}

const KindInfo& info(ExperimentKind kind) {
    for (const KindInfo& k : kind_table())
        if (k.kind == kind) return k;
    throw std::logic_error("unknown experiment kind");
}

[[noreturn]] void bad_param(const std::string& key, const std::string& value) {
    throw std::invalid_argument("parameter " + key + ": cannot parse '" + value + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    std::vector<T> out;
    T v;
    while (in >> v) out.push_back(v);
    if (!in.eof()) bad_param(key, text);
    return out;
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Metric metric(std::string name, const Estimate& e) {
    Metric m{std::move(name), e.mean, std::nullopt, e.n};
    if (e.n > 1) m.se = e.se;
    return m;
}

Metric exact(std::string name, double value, std::size_t n = 1) {
    return Metric{std::move(name), value, std::nullopt, n};
}

std::string format_real(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

/// Collects metrics and data files for one run.
class Recorder {
public:
    Recorder(const ExperimentSpec& spec, ResultRecord& record) : spec_(spec), record_(record) {}

    void add(Metric m) { record_.metrics.push_back(std::move(m)); }
    void add(std::string name, const Estimate& e) { add(metric(std::move(name), e)); }
    void add_exact(std::string name, double value, std::size_t n = 1) {
        add(exact(std::move(name), value, n));
    }
    void duality(const std::string& prefix, const DualityReport& r) {
        add(prefix + "lhs", r.lhs);
        add(prefix + "rhs", r.rhs);
        add_exact(prefix + "overflow", static_cast<double>(r.overflow));
    }

    /// Opens a data file in the output directory with the provenance header,
    /// or returns nullptr when no output directory is set.
    std::unique_ptr<std::ofstream> data_file(const std::string& name) {
        if (spec_.out.empty()) return nullptr;
        std::filesystem::create_directories(spec_.out);
        auto os = std::make_unique<std::ofstream>(spec_.out / name);
        if (!*os) throw std::runtime_error("cannot open " + (spec_.out / name).string());
        *os << "# spec_hash=" << record_.spec_hash << " seed=" << record_.master_seed
            << " version=" << record_.version << '\n';
        record_.files.push_back(name);
        return os;
    }

private:
    const ExperimentSpec& spec_;
    ResultRecord& record_;
};

ScalingFamily family_from(const Params& p) {
    ScalingFamily f{p.real("L", 1.0), p.real("M", 4.0), p.real("R", 4.0), p.real("r", 1.0),
                    p.real("theta", 0.5)};
    f.validate();
    return f;
}

Torus torus_from(const Params& p, const ScalingFamily& f) {
    return Torus(static_cast<int>(p.integer("demes", 16)), f.cells_per_deme());
}

Configuration start_from(const Params& p, const Torus& torus, std::uint64_t seed) {
    Rng rng = Rng::stream(seed, {0xC0F16});
    return random_configuration(torus, p.real("p", 0.5), p.real("q", 0.5), rng);
}

LimitParams limits_from(const Params& p) {
    LimitParams l{p.real("alpha", 1.0), p.real("beta", 1.0), p.real("gamma", 0.0)};
    l.validate();
    return l;
}

Mesh mesh_from(const Params& p) {
    const double dx = p.real("dx", 0.1);
    const double length = p.real("length", 8.0);
    const auto cells = static_cast<std::size_t>(std::llround(length / dx));
    if (cells < 3 || std::abs(static_cast<double>(cells) * dx - length) > 1e-9 * length)
        throw std::invalid_argument("length must be a multiple of dx with at least 3 cells");
    return Mesh{dx, p.real("dt", 1e-3), cells};
}

/// u0(x) = u_mean + u_amp cos(2 pi x / length), ell0 = ell_frac u0.
struct Profile {
    double mean = 0.5;
    double amp = 0.3;
    double ell_frac = 0.0;
    double length = 8.0;

    double u(double x) const { return mean + amp * std::cos(2.0 * std::numbers::pi * x / length); }
    double ell(double x) const { return ell_frac * u(x); }
};

Profile profile_from(const Params& p) {
    Profile pr{p.real("u_mean", 0.5), p.real("u_amp", 0.3), p.real("ell_frac", 0.0),
               p.real("length", 8.0)};
    if (pr.mean - std::abs(pr.amp) < 0.0 || pr.mean + std::abs(pr.amp) > 1.0)
        throw std::invalid_argument("u_mean +- u_amp must lie in [0, 1]");
    if (pr.ell_frac < 0.0 || pr.ell_frac > 1.0) throw std::invalid_argument("ell_frac must lie in [0, 1]");
    return pr;
}

LocalTimeMethod local_time_from(const Params& p) {
    const std::string m = p.text("local_time", "bridge");
    if (m == "bridge") return LocalTimeMethod::bridge;
    if (m == "band") return LocalTimeMethod::band;
    throw std::invalid_argument("local_time must be band or bridge");
}

std::string tag(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

void run_simulate_forward(const ExperimentSpec& spec, ResultRecord& rec, Recorder& out) {
    const Params& p = spec.params;
    const ScalingFamily fam = family_from(p);
    const Torus torus = torus_from(p, fam);
    const Configuration start = start_from(p, torus, spec.master_seed);
    const double T = p.real("T", 1.0);
    std::vector<double> density(spec.reps), labels(spec.reps), events(spec.reps);
    std::vector<DensityProfile> first;
    parallel_for(spec.reps, spec.workers, [&](std::size_t i) {
        const ForwardRun run = simulate_forward(start, fam, T, stream_key(spec.master_seed, {1, i}));
        const auto n = static_cast<double>(torus.size());
        density[i] = std::count(run.final.xi.begin(), run.final.xi.end(), 1) / n;
        labels[i] = std::count(run.final.eta.begin(), run.final.eta.end(), 1) / n;
        events[i] = static_cast<double>(run.events);
        if (i == 0) first.push_back(density_profiles(run.final, fam));
    });
    out.add("type_density", estimate(density));
    out.add("label_density", estimate(labels));
    out.add("events", estimate(events));
    if (auto os = out.data_file("profile.csv")) write_profile_csv(*os, first.front());
    rec.criterion = "none";
}

void run_replay_duality(const ExperimentSpec& spec, ResultRecord& rec, Recorder& out) {
    const Params& p = spec.params;
    const ScalingFamily fam = family_from(p);
    const Torus torus = torus_from(p, fam);
    const PathwiseSummary s =
        pathwise_duality_experiment(torus, fam, p.real("T", 2.0), spec.reps,
                                    static_cast<std::size_t>(p.integer("per_seed", 5)),
                                    spec.master_seed, spec.workers);
    out.add_exact("trials", static_cast<double>(s.trials));
    out.add_exact("type_violations", static_cast<double>(s.totals.type_violations));
    out.add_exact("label_violations", static_cast<double>(s.totals.label_violations));
    out.add_exact("union_violations", static_cast<double>(s.totals.union_violations));
    rec.pass = s.totals.violations() == 0;
    rec.criterion = "zero violations of the pathwise duality";
}

std::vector<Site> sites_from(const Params& p, const std::string& key) {
    std::vector<Site> out;
    for (const auto& g : p.integer_groups(key, {})) {
        if (g.size() != 2) throw std::invalid_argument(key + ": each site is 'deme cell'");
        out.push_back({static_cast<int>(g[0]), static_cast<int>(g[1])});
    }
    return out;
}

void run_dual_mc(const ExperimentSpec& spec, ResultRecord& rec, Recorder& out) {
    const Params& p = spec.params;
    const ScalingFamily fam = family_from(p);
    const Torus torus = torus_from(p, fam);
    const Configuration start = start_from(p, torus, spec.master_seed);
    const double t = p.real("t", 1.0);
    const std::string mode = p.text("mode", "product");
    bool pass = true;
    if (mode == "product") {
        const auto sets = p.integer_groups("sets", {{0}});
        for (std::size_t k = 0; k < sets.size(); ++k) {
            std::vector<int> demes;
            for (long d : sets[k]) {
                if (d < 0 || d >= torus.demes()) throw std::invalid_argument("sets: deme out of range");
                demes.push_back(static_cast<int>(d));
            }
            const DualityReport r = product_duality_experiment(
                start, fam, demes, t, spec.reps, stream_key(spec.master_seed, {1, k}), spec.workers);
            out.duality("set" + std::to_string(k) + "_", r);
            pass = pass && r.pass;
        }
    } else if (mode == "tracer") {
        const auto zero = sites_from(p, "zero_sites");
        const auto label = sites_from(p, "label_sites");
        for (const Site& s : zero)
            if (!torus.contains(s)) throw std::invalid_argument("zero_sites: site out of range");
        for (const Site& s : label)
            if (!torus.contains(s)) throw std::invalid_argument("label_sites: site out of range");
        const DualityReport r = tracer_duality_experiment(start, fam, zero, label, t, spec.reps,
                                                          stream_key(spec.master_seed, {2}), spec.workers);
        out.duality("", r);
        pass = r.pass;
    } else {
        throw std::invalid_argument("mode must be product or tracer");
    }
    rec.pass = pass;
    rec.criterion = mode == "tracer" ? "|forward - dual| <= 3 combined SE" : "|forward - dual| <= 3 combined SE for every set";
}

void run_bbm(const ExperimentSpec& spec, ResultRecord& rec, Recorder& out) {
    const Params& p = spec.params;
    const LimitParams limits = limits_from(p);
    const double theta = p.real("theta", 0.5);
    const Profile prof = profile_from(p);
    const auto u0 = [prof](double x) { return prof.u(x); };
    const std::vector<double> x = p.reals("positions", {4.0, 4.25});
    const std::string check = p.text("check", "none");
    SpatialDualityConfig cfg;
    cfg.limits = limits;
    cfg.theta = theta;
    cfg.bbm_dt = p.real("bbm_dt", 2e-3);
    cfg.local_time = local_time_from(p);
    cfg.T = p.real("T", 0.5);
    if (check == "none") {
        BbmParams bp = bbm_params(limits, theta, cfg.bbm_dt);
        bp.local_time = cfg.local_time;
        std::vector<double> size(spec.reps), births(spec.reps), coal(spec.reps), prod(spec.reps);
        parallel_for(spec.reps, spec.workers, [&](std::size_t i) {
            Rng rng = Rng::stream(spec.master_seed, {1, i});
            const BbmRun run = simulate_bbm(x, bp, cfg.T, rng);
            size[i] = static_cast<double>(run.final.size());
            births[i] = static_cast<double>(run.final.births());
            coal[i] = static_cast<double>(run.final.coalescences());
            double pr = 1.0;
            for (double y : run.final.positions()) pr *= 1.0 - u0(y);
            prod[i] = pr;
        });
        out.add("particles", estimate(size));
        out.add("births", estimate(births));
        out.add("coalescences", estimate(coal));
        out.add("dual_product", estimate(prod));
        rec.criterion = "none";
    } else if (check == "limit-duality") {
        cfg.mesh = mesh_from(p);
        const LimitDualityReport r = limit_duality_experiment(x, u0, cfg, spec.reps, spec.master_seed,
                                                              spec.workers);
        out.add("spde_coarse", r.coarse.lhs);
        out.add("spde_fine", r.fine.lhs);
        out.add("dual", r.fine.rhs);
        out.add_exact("gap_coarse", r.coarse.lhs.mean - r.coarse.rhs.mean);
        out.add_exact("gap_fine", r.fine.lhs.mean - r.fine.rhs.mean);
        out.add_exact("combined_se_fine", combined_se(r.fine.lhs, r.fine.rhs));
        rec.pass = r.pass;
        rec.criterion = "|fine gap| <= max(3 combined SE, " + tag(r.slack) +
                        ") and |fine gap| <= |coarse gap|";
    } else {
        throw std::invalid_argument("check must be none or limit-duality");
    }
}

void run_ladder(const ExperimentSpec& spec, ResultRecord& rec, Recorder& out) {
    const Params& p = spec.params;
    const std::vector<long> Ls = p.integers("Ls", {20, 40, 80});
    const LadderReport r = coalescence_ladder(
        Ls, p.real("alpha", 0.25), p.real("nu", 1.0), spec.reps,
        static_cast<std::size_t>(p.integer("limit_n", 100000)), p.real("limit_dt", 1e-5),
        spec.master_seed, p.real("cap", 100.0));
    for (const LadderRung& g : r.rungs) {
        out.add_exact("ks_L" + std::to_string(g.L), g.ks, spec.reps);
        out.add_exact("truncated_L" + std::to_string(g.L), static_cast<double>(g.truncated));
    }
    out.add_exact("limit_truncated", static_cast<double>(r.limit_truncated), r.limit_samples);
    if (auto os = out.data_file("ladder.csv")) {
        *os << "L,M,ks,truncated\n";
        for (const LadderRung& g : r.rungs)
            *os << g.L << ',' << g.M << ',' << format_real(g.ks) << ',' << g.truncated << '\n';
    }
    rec.pass = r.decreasing;
    rec.criterion = "KS distance strictly decreasing along the ladder";
}

void run_spde(const ExperimentSpec& spec, ResultRecord& rec, Recorder& out, bool coupled) {
    const Params& p = spec.params;
    const LimitParams limits = limits_from(p);
    const double theta = p.real("theta", 0.5);
    const Mesh mesh = mesh_from(p);
    const Profile prof = profile_from(p);
    const double T = p.real("T", 1.0);
    const auto u0 = [prof](double x) { return prof.u(x); };
    const auto ell0 = [prof](double x) { return prof.ell(x); };
    const std::string check = p.text("check", "none");
    if (check == "none") {
        const SPDEField start = SPDEField::sample(mesh, u0, ell0);
        std::vector<double> mass(spec.reps), square(spec.reps), label(spec.reps), clamps(spec.reps);
        std::vector<SPDEField> first;
        parallel_for(spec.reps, spec.workers, [&](std::size_t i) {
            const SpdeRun run = solve_spde(start, mesh, limits, theta, T,
                                           stream_key(spec.master_seed, {1, i}), coupled);
            double m = 0.0, s = 0.0, l = 0.0;
            for (std::size_t c = 0; c < mesh.cells; ++c) {
                m += mesh.dx * run.final.u[c];
                s += mesh.dx * run.final.u[c] * run.final.u[c];
                l += mesh.dx * run.final.ell[c];
            }
            mass[i] = m;
            square[i] = s;
            label[i] = l;
            clamps[i] = static_cast<double>(run.final.clamps);
            if (i == 0) first.push_back(run.final);
        });
        out.add("mass", estimate(mass));
        out.add("square_mass", estimate(square));
        if (coupled) out.add("label_mass", estimate(label));
        out.add("clamps", estimate(clamps));
        if (auto os = out.data_file("field.csv")) write_field_csv(*os, first.front(), mesh);
        rec.criterion = "none";
    } else if (check == "reduction") {
        if (limits.gamma != 0.0) throw std::invalid_argument("check=reduction needs gamma = 0");
        const ReductionReport h =
            homogeneous_logistic_check(mesh, limits, theta, T, prof.mean, prof.ell_frac * prof.mean);
        const ReductionReport f = refined_mesh_check(mesh, limits, theta, T, u0, ell0);
        out.add_exact("logistic_u_error", h.u_error);
        out.add_exact("logistic_ell_error", h.ell_error);
        out.add_exact("refined_u_error", f.u_error);
        out.add_exact("refined_ell_error", f.ell_error);
        rec.pass = h.pass && f.pass;
        rec.criterion = "sup-norm errors <= " + tag(h.tolerance) + " against the exact logistic and the refined mesh";
    } else if (check == "marginal" && coupled) {
        const SPDEField start = SPDEField::sample(mesh, u0, ell0);
        const MarginalReport r =
            u_marginal_check(start, mesh, limits, theta, T, spec.reps, spec.master_seed, spec.workers);
        out.add("coupled_mass", r.coupled_mass);
        out.add("single_mass", r.single_mass);
        out.add("coupled_square_mass", r.coupled_square);
        out.add("single_square_mass", r.single_square);
        rec.pass = r.pass;
        rec.criterion = "mass and square mass of u agree within 3 combined SE";
    } else {
        throw std::invalid_argument(coupled ? "check must be none, reduction or marginal"
                                            : "check must be none or reduction");
    }
}

void run_residual(const ExperimentSpec& spec, ResultRecord& rec, Recorder& out) {
    const Params& p = spec.params;
    const LimitParams limits = limits_from(p);
    const Mesh mesh = mesh_from(p);
    const Profile prof = profile_from(p);
    const SPDEField start = SPDEField::sample(
        mesh, [prof](double x) { return prof.u(x); }, [prof](double x) { return prof.ell(x); });
    const TestFunction phi = gaussian_test_function(p.real("phi_centre", 4.0), p.real("phi_width", 0.7),
                                                    p.real("phi_growth", 0.5));
    const TestFunction psi = gaussian_test_function(p.real("psi_centre", 3.0), p.real("psi_width", 0.8),
                                                    p.real("psi_growth", 0.0));
    const bool coupled = p.flag("coupled", false);
    const ResidualReport r = martingale_residual_experiment(
        start, mesh, phi, limits, p.real("theta", 0.5), p.real("T", 0.5),
        static_cast<std::size_t>(p.integer("record_every", 1)), spec.reps, spec.master_seed,
        coupled ? &psi : nullptr, spec.workers);
    out.add("final_residual", r.final_residual);
    out.add("realized_qv", r.realized_qv);
    out.add("predicted_qv", r.predicted_qv);
    out.add_exact("qv_ratio", r.qv_ratio, spec.reps);
    out.add_exact("clamps", static_cast<double>(r.clamps));
    rec.pass = r.pass;
    rec.criterion = "|M_T| <= 3 SE and realized/predicted QV in [0.9, 1.1]";
}

void run_moment(const ExperimentSpec& spec, ResultRecord& rec, Recorder& out) {
    const Params& p = spec.params;
    const WfParams wf{p.real("beta", 1.0), p.real("sigma", 1.0)};
    wf.validate();
    const std::string mode = p.text("mode", "duality");
    if (mode == "duality") {
        const MomentDualityReport r =
            check_moment_duality(p.real("z0", 0.5), p.integer("n0", 2), wf, p.real("T", 0.5),
                                 p.real("dt", 1e-4), spec.reps, spec.master_seed, spec.workers);
        out.duality("", r);
        out.add("lhs_half_step", r.lhs_half_step);
        out.add("dt_shift", r.dt_shift);
        rec.pass = r.pass && r.bias_pass;
        rec.criterion = "|lhs - rhs| <= 3 combined SE and |dt shift| < SE(lhs)";
    } else if (mode == "drift") {
        bool pass = true;
        for (long m : p.integers("m", {1, 2, 3})) {
            const DriftReport r = generator_drift_check(
                p.real("z0", 0.4), static_cast<int>(m), wf, p.real("h1", 1e-3), p.real("h2", 1e-2),
                spec.reps, stream_key(spec.master_seed, {static_cast<std::uint64_t>(m)}),
                static_cast<int>(p.integer("substeps", 10)), spec.workers);
            const std::string s = "m" + std::to_string(m) + "_";
            out.add_exact(s + "generator", r.generator);
            out.add(s + "drift_h1", r.drift_h1);
            out.add(s + "drift_h2", r.drift_h2);
            out.add(s + "extrapolated", r.extrapolated);
            pass = pass && r.pass;
        }
        rec.pass = pass;
        rec.criterion = "drift at h1, h2 and the Richardson extrapolant within 3 SE of the generator";
    } else if (mode == "rates") {
        const auto states = p.integers("states", {1, 2, 5});
        const auto reports = chain_rate_check(
            states, wf, static_cast<std::uint64_t>(p.integer("min_sojourns", 100000)), spec.master_seed);
        bool pass = true;
        for (const ChainRateReport& r : reports) {
            const std::string s = "state" + std::to_string(r.m) + "_";
            out.add_exact(s + "sojourns", static_cast<double>(r.sojourns));
            out.add(s + "birth_rate", r.birth_rate);
            out.add(s + "death_rate", r.death_rate);
            out.add_exact(s + "deaths", static_cast<double>(r.deaths));
            pass = pass && r.pass;
        }
        rec.pass = pass;
        rec.criterion = "empirical jump rates within 3 SE of beta m and sigma^2 m(m-1)/2; no deaths from 1";
    } else {
        throw std::invalid_argument("mode must be duality, drift or rates");
    }
}

void run_coupled_duality(const ExperimentSpec& spec, ResultRecord& rec, Recorder& out) {
    const Params& p = spec.params;
    const std::string mode = p.text("mode", "scalar");
    const int k = static_cast<int>(p.integer("k", 1));
    DualityReport r;
    if (mode == "scalar") {
        const WfParams wf{p.real("beta", 1.0), p.real("sigma", 1.0)};
        wf.validate();
        DiffusionState s0{p.real("z0", 0.4), p.real("v0", 0.3), 0.0};
        s0.check();
        r = check_coupled_duality(k, p.integer("n0", 2), s0, wf, p.real("T", 0.5), p.real("dt", 1e-4),
                                  spec.reps, spec.master_seed, spec.workers);
    } else if (mode == "spatial") {
        SpatialDualityConfig cfg;
        cfg.mesh = mesh_from(p);
        cfg.limits = limits_from(p);
        cfg.theta = p.real("theta", 0.5);
        cfg.bbm_dt = p.real("bbm_dt", 2e-3);
        cfg.local_time = local_time_from(p);
        cfg.T = p.real("T", 0.5);
        const Profile prof = profile_from(p);
        const std::vector<double> x = p.reals("positions", {4.0, 4.25});
        r = check_coupled_duality_spatial(
            k, x, [prof](double y) { return prof.u(y); }, [prof](double y) { return prof.ell(y); },
            cfg, spec.reps, spec.master_seed, spec.workers);
    } else {
        throw std::invalid_argument("mode must be scalar or spatial");
    }
    out.duality("", r);
    rec.pass = r.pass;
    rec.criterion = "|lhs - rhs| <= 3 combined SE";
}

void run_kernel(const ExperimentSpec& spec, ResultRecord& rec, Recorder& out) {
    const Params& p = spec.params;
    bool pass = true;
    for (double L : p.reals("Ls", {8, 32})) {
        for (double t : p.reals("ts", {0.01, 0.1, 1.0})) {
            const KernelIdentityReport r = heat_kernel_identities(L, t);
            const std::string s = "L" + tag(L) + "_t" + tag(t) + "_";
            out.add_exact(s + "normalization", r.normalization_error);
            out.add_exact(s + "symmetry", r.symmetry_error);
            out.add_exact(s + "chapman", r.chapman_error);
            pass = pass && r.pass;
        }
    }
    rec.pass = pass;
    rec.criterion = "normalization, symmetry and Chapman-Kolmogorov errors <= 1e-12";
}

nlohmann::json metric_json(const std::string& name, double value, const std::optional<double>& se,
                           std::size_t n) {
    nlohmann::json j{{"name", name}, {"value", value}, {"n", n}};
    j["se"] = se ? nlohmann::json(*se) : nlohmann::json(nullptr);
    return j;
}

}  // namespace

std::string_view to_string(ExperimentKind kind) { return info(kind).name; }

ExperimentKind parse_kind(std::string_view name) {
    for (const KindInfo& k : kind_table())
        if (k.name == name) return k.kind;
    throw std::invalid_argument("unknown experiment kind '" + std::string(name) + "'");
}

const std::vector<ExperimentKind>& all_kinds() {
    static const std::vector<ExperimentKind> kinds = [] {
        std::vector<ExperimentKind> out;
        for (const KindInfo& k : kind_table()) out.push_back(k.kind);
        return out;
    }();
    return kinds;
}

const std::vector<std::string>& allowed_params(ExperimentKind kind) { return info(kind).params; }

std::string Params::text(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Params::real(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const auto v = parse_list<double>(key, it->second);
    if (v.size() != 1) bad_param(key, it->second);
    return v.front();
}

long Params::integer(const std::string& key, long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const auto v = parse_list<long>(key, it->second);
    if (v.size() != 1) bad_param(key, it->second);
    return v.front();
}

bool Params::flag(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    bad_param(key, it->second);
}

std::vector<double> Params::reals(const std::string& key, const std::vector<double>& fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    auto v = parse_list<double>(key, it->second);
    if (v.empty()) bad_param(key, it->second);
    return v;
}

std::vector<long> Params::integers(const std::string& key, const std::vector<long>& fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    auto v = parse_list<long>(key, it->second);
    if (v.empty()) bad_param(key, it->second);
    return v;
}

std::vector<std::vector<long>> Params::integer_groups(
    const std::string& key, const std::vector<std::vector<long>>& fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::vector<long>> out;
    std::istringstream in(it->second);
    std::string group;
    while (std::getline(in, group, ';')) {
        auto v = parse_list<long>(key, group);
        if (v.empty()) bad_param(key, it->second);
        out.push_back(std::move(v));
    }
    if (out.empty()) bad_param(key, it->second);
    return out;
}

void ExperimentSpec::validate() const {
    if (reps < 1) throw std::invalid_argument("reps must be at least 1");
    const auto& allowed = allowed_params(kind);
    for (const auto& [key, value] : params.values())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw std::invalid_argument("unknown parameter '" + key + "' for kind " +
                                        std::string(to_string(kind)));
}

ExperimentSpec parse_spec(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    ExperimentSpec spec;
    const auto head = tree.get_child_optional("experiment");
    if (!head) throw std::invalid_argument("config: missing [experiment] section");
    const auto kind = head->get_optional<std::string>("kind");
    if (!kind) throw std::invalid_argument("config: missing experiment kind");
    spec.kind = parse_kind(*kind);
    for (const auto& [key, node] : *head) {
        const std::string v = node.get_value<std::string>();
        if (key == "kind") continue;
        try {
            if (key == "reps") {
                const long r = std::stol(v);
                if (r < 1) throw std::invalid_argument("reps");
                spec.reps = static_cast<std::size_t>(r);
            } else if (key == "seed") {
                spec.master_seed = std::stoull(v);
            } else if (key == "out") {
                spec.out = v;
            } else if (key == "workers") {
                spec.workers = static_cast<unsigned>(std::stoul(v));
            } else {
                throw std::invalid_argument("config: unknown key '" + key + "' in [experiment]");
            }
        } catch (const std::logic_error& e) {
            if (std::string(e.what()).starts_with("config:")) throw;
            throw std::invalid_argument("config: bad value '" + v + "' for " + key);
        }
    }
    if (const auto params = tree.get_child_optional("params"))
        for (const auto& [key, node] : *params) spec.params.set(key, node.get_value<std::string>());
    for (const auto& [section, node] : tree)
        if (section != "experiment" && section != "params")
            throw std::invalid_argument("config: unknown section [" + section + "]");
    spec.validate();
    return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    return parse_spec(in);
}

std::string canonical_text(const ExperimentSpec& spec) {
    std::ostringstream os;
    os << "kind=" << to_string(spec.kind) << "\nreps=" << spec.reps << "\nseed=" << spec.master_seed
       << '\n';
    for (const auto& [key, value] : spec.params.values()) os << key << '=' << value << '\n';
    return os.str();
}

std::string spec_hash(const ExperimentSpec& spec) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(canonical_text(spec));
    return os.str();
}

const Metric& ResultRecord::metric(std::string_view name) const {
    for (const Metric& m : metrics)
        if (m.name == name) return m;
    throw std::out_of_range("no metric '" + std::string(name) + "'");
}

std::string_view version_stamp() { return BVM_GIT_HASH; }

ResultRecord run(const ExperimentSpec& spec) {
    spec.validate();
    const auto start = std::chrono::steady_clock::now();
    ResultRecord rec;
    rec.kind = spec.kind;
    rec.master_seed = spec.master_seed;
    rec.reps = spec.reps;
    rec.spec_hash = spec_hash(spec);
    rec.version = std::string(version_stamp());
    Recorder out(spec, rec);
    switch (spec.kind) {
        case ExperimentKind::simulate_forward: run_simulate_forward(spec, rec, out); break;
        case ExperimentKind::replay_duality: run_replay_duality(spec, rec, out); break;
        case ExperimentKind::dual_mc: run_dual_mc(spec, rec, out); break;
        case ExperimentKind::bbm: run_bbm(spec, rec, out); break;
        case ExperimentKind::coalescence_ladder: run_ladder(spec, rec, out); break;
        case ExperimentKind::spde: run_spde(spec, rec, out, false); break;
        case ExperimentKind::coupled_spde: run_spde(spec, rec, out, true); break;
        case ExperimentKind::martingale_residual: run_residual(spec, rec, out); break;
        case ExperimentKind::moment_duality: run_moment(spec, rec, out); break;
        case ExperimentKind::coupled_duality: run_coupled_duality(spec, rec, out); break;
        case ExperimentKind::kernel_check: run_kernel(spec, rec, out); break;
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (auto os = out.data_file("metrics.csv")) write_csv(*os, rec);
    if (!spec.out.empty()) {
        rec.files.push_back("result.json");
        std::ofstream js(spec.out / "result.json");
        if (!js) throw std::runtime_error("cannot open " + (spec.out / "result.json").string());
        write_json(js, rec);
    }
    return rec;
}

Summary aggregate(const std::vector<ResultRecord>& records) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");
    Summary s;
    s.kind = records.front().kind;
    s.records = records.size();
    for (const ResultRecord& r : records) {
        if (r.kind != s.kind) throw std::invalid_argument("aggregate: records of different kinds");
        if (r.metrics.size() != records.front().metrics.size())
            throw std::invalid_argument("aggregate: records carry different metrics");
    }
    for (std::size_t k = 0; k < records.front().metrics.size(); ++k) {
        const std::string& name = records.front().metrics[k].name;
        double total = 0.0, weighted = 0.0;
        bool any_se = false;
        for (const ResultRecord& r : records) {
            const Metric& m = r.metrics[k];
            if (m.name != name) throw std::invalid_argument("aggregate: records carry different metrics");
            total += static_cast<double>(m.n);
            weighted += static_cast<double>(m.n) * m.value;
            any_se = any_se || m.se.has_value();
        }
        SummaryRow row{name, weighted / total, std::nullopt, static_cast<std::size_t>(total)};
        if (total > 1.0 && (any_se || records.size() > 1)) {
            double ss = 0.0;
            for (const ResultRecord& r : records) {
                const Metric& m = r.metrics[k];
                const auto n = static_cast<double>(m.n);
                const double sd = m.se.value_or(0.0) * std::sqrt(n);
                ss += (n - 1.0) * sd * sd + n * (m.value - row.mean) * (m.value - row.mean);
            }
            row.se = std::sqrt(ss / (total - 1.0) / total);
        }
        s.rows.push_back(row);
    }
    return s;
}

void write_json(std::ostream& os, const ResultRecord& record) {
    nlohmann::json j;
    j["kind"] = std::string(to_string(record.kind));
    j["spec_hash"] = record.spec_hash;
    j["seed"] = record.master_seed;
    j["reps"] = record.reps;
    j["version"] = record.version;
    j["wall_seconds"] = record.wall_seconds;
    j["criterion"] = record.criterion;
    j["pass"] = record.pass ? nlohmann::json(*record.pass) : nlohmann::json(nullptr);
    j["metrics"] = nlohmann::json::array();
    for (const Metric& m : record.metrics) j["metrics"].push_back(metric_json(m.name, m.value, m.se, m.n));
    j["files"] = record.files;
    os << j.dump(2) << '\n';
}

ResultRecord read_json(std::istream& is) {
    ResultRecord rec;
    try {
        const nlohmann::json j = nlohmann::json::parse(is);
        rec.kind = parse_kind(j.at("kind").get<std::string>());
        rec.spec_hash = j.at("spec_hash").get<std::string>();
        rec.master_seed = j.at("seed").get<std::uint64_t>();
        rec.reps = j.at("reps").get<std::size_t>();
        rec.version = j.at("version").get<std::string>();
        rec.wall_seconds = j.at("wall_seconds").get<double>();
        rec.criterion = j.at("criterion").get<std::string>();
        if (!j.at("pass").is_null()) rec.pass = j.at("pass").get<bool>();
        for (const auto& m : j.at("metrics")) {
            Metric metric{m.at("name").get<std::string>(), m.at("value").get<double>(), std::nullopt,
                          m.at("n").get<std::size_t>()};
            if (!m.at("se").is_null()) metric.se = m.at("se").get<double>();
            rec.metrics.push_back(std::move(metric));
        }
        rec.files = j.at("files").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("result record: ") + e.what());
    }
    return rec;
}

void write_csv(std::ostream& os, const ResultRecord& record) {
    os << "name,value,se,n\n";
    for (const Metric& m : record.metrics)
        os << m.name << ',' << format_real(m.value) << ',' << (m.se ? format_real(*m.se) : "") << ','
           << m.n << '\n';
}

void write_json(std::ostream& os, const Summary& summary) {
    nlohmann::json j;
    j["kind"] = std::string(to_string(summary.kind));
    j["records"] = summary.records;
    j["rows"] = nlohmann::json::array();
    for (const SummaryRow& r : summary.rows) j["rows"].push_back(metric_json(r.name, r.mean, r.se, r.n));
    os << j.dump(2) << '\n';
}

void write_csv(std::ostream& os, const Summary& summary) {
    os << "name,mean,se,n\n";
    for (const SummaryRow& r : summary.rows)
        os << r.name << ',' << format_real(r.mean) << ',' << (r.se ? format_real(*r.se) : "") << ','
           << r.n << '\n';
}

}  // namespace bvm
