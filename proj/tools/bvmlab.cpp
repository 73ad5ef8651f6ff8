#include "bvm/harness.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <optional>

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps;
    std::optional<std::string> out;
    std::optional<unsigned> workers;
    std::vector<std::string> sets;
};

int run_kind(bvm::ExperimentKind kind, const Overrides& o) {
    bvm::ExperimentSpec spec = bvm::load_spec(o.config);
    if (spec.kind != kind)
        throw std::invalid_argument("config kind " + std::string(bvm::to_string(spec.kind)) +
                                    " does not match subcommand " + std::string(bvm::to_string(kind)));
    if (o.seed) spec.master_seed = *o.seed;
    if (o.reps) spec.reps = *o.reps;
    if (o.out) spec.out = *o.out;
    if (o.workers) spec.workers = *o.workers;
    for (const std::string& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + kv);
        spec.params.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    const bvm::ResultRecord rec = bvm::run(spec);
    bvm::write_json(std::cout, rec);
    return rec.pass.value_or(true) ? 0 : 1;
}

int run_aggregate(const std::vector<std::string>& files, const std::string& format) {
    std::vector<bvm::ResultRecord> records;
    for (const std::string& f : files) {
        std::ifstream in(f);
        if (!in) throw std::runtime_error("cannot open " + f);
        records.push_back(bvm::read_json(in));
    }
    const bvm::Summary s = bvm::aggregate(records);
    if (format == "csv")
        bvm::write_csv(std::cout, s);
    else
        bvm::write_json(std::cout, s);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo lab for the biased voter model and its limits"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(bvm::version_stamp()));

    Overrides o;
    for (bvm::ExperimentKind kind : bvm::all_kinds()) {
        CLI::App* sub = app.add_subcommand(std::string(bvm::to_string(kind)));
        sub->add_option("--config", o.config, "INI file with [experiment] and [params]")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--reps", o.reps, "replicas")->check(CLI::PositiveNumber);
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--workers", o.workers, "worker threads, 0 for all cores");
        sub->add_option("--set", o.sets, "override a parameter, key=value")->take_all();
    }
    std::vector<std::string> files;
    std::string format = "json";
    CLI::App* agg = app.add_subcommand("aggregate", "pool result.json records of one kind");
    agg->add_option("records", files, "result.json files")->required()->check(CLI::ExistingFile);
    agg->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

    CLI11_PARSE(app, argc, argv);
    try {
        if (agg->parsed()) return run_aggregate(files, format);
        for (bvm::ExperimentKind kind : bvm::all_kinds())
            if (app.got_subcommand(std::string(bvm::to_string(kind)))) return run_kind(kind, o);
    } catch (const std::exception& e) {
        std::cerr << "bvmlab: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
