#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bvm {

enum class ExperimentKind {
    simulate_forward,
    replay_duality,
    dual_mc,
    bbm,
    coalescence_ladder,
    spde,
    coupled_spde,
    martingale_residual,
    moment_duality,
    coupled_duality,
    kernel_check,
};

std::string_view to_string(ExperimentKind kind);
/// Throws std::invalid_argument for an unknown name.
ExperimentKind parse_kind(std::string_view name);
const std::vector<ExperimentKind>& all_kinds();

/// Keys accepted in the [params] section for a kind.
const std::vector<std::string>& allowed_params(ExperimentKind kind);

/// String-valued parameters with typed accessors. Lists are whitespace
/// separated; groups of lists are separated by ';'.
class Params {
public:
    Params() = default;
    explicit Params(std::map<std::string, std::string> values) : values_(std::move(values)) {}

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    std::string text(const std::string& key, const std::string& fallback) const;
    double real(const std::string& key, double fallback) const;
    long integer(const std::string& key, long fallback) const;
    bool flag(const std::string& key, bool fallback) const;
    std::vector<double> reals(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<long> integers(const std::string& key, const std::vector<long>& fallback) const;
    std::vector<std::vector<long>> integer_groups(const std::string& key,
                                                  const std::vector<std::vector<long>>& fallback) const;

private:
    std::map<std::string, std::string> values_;
};

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::kernel_check;
    Params params;
    std::size_t reps = 1;
    std::uint64_t master_seed = 1;
    std::filesystem::path out;  ///< empty: no files are written
    unsigned workers = 0;       ///< 0: one per hardware thread

    /// Throws std::invalid_argument on reps == 0 or an unknown parameter key.
    void validate() const;
};

/// Reads an INI file with sections [experiment] (kind, reps, seed, out,
/// workers) and [params].
ExperimentSpec load_spec(const std::filesystem::path& path);
ExperimentSpec parse_spec(std::istream& in);

/// Text covering kind, reps, seed and params in key order; workers and out
/// are excluded because they do not change results.
std::string canonical_text(const ExperimentSpec& spec);
/// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string spec_hash(const ExperimentSpec& spec);

struct Metric {
    std::string name;
    double value = 0.0;
    std::optional<double> se;  ///< empty when undefined (fewer than two samples)
    std::size_t n = 1;
};

struct ResultRecord {
    ExperimentKind kind = ExperimentKind::kernel_check;
    std::vector<Metric> metrics;
    std::optional<bool> pass;  ///< empty when the experiment declares no tolerance
    std::string criterion;
    double wall_seconds = 0.0;
    std::uint64_t master_seed = 0;
    std::size_t reps = 0;
    std::string spec_hash;
    std::string version;
    std::vector<std::string> files;

    const Metric& metric(std::string_view name) const;
};

/// Build version stamp (git revision at configure time, or "unknown").
std::string_view version_stamp();

/// Runs the experiment; when spec.out is set, writes result.json, metrics.csv
/// and any kind-specific data files there.
ResultRecord run(const ExperimentSpec& spec);

struct SummaryRow {
    std::string name;
    double mean = 0.0;
    std::optional<double> se;
    std::size_t n = 0;
};

struct Summary {
    ExperimentKind kind = ExperimentKind::kernel_check;
    std::size_t records = 0;
    std::vector<SummaryRow> rows;
};

/// Pools each metric across records: sample-size weighted mean and the
/// standard error of the combined sample (within plus between sums of
/// squares). Throws std::invalid_argument on empty input, mixed kinds or
/// differing metric names.
Summary aggregate(const std::vector<ResultRecord>& records);

void write_json(std::ostream& os, const ResultRecord& record);
/// Reads a record written by write_json.
ResultRecord read_json(std::istream& is);
void write_csv(std::ostream& os, const ResultRecord& record);
void write_json(std::ostream& os, const Summary& summary);
void write_csv(std::ostream& os, const Summary& summary);

}  // namespace bvm
