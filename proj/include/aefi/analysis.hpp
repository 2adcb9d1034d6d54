#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aefi/algorithms.hpp"
#include "aefi/dataset.hpp"
#include "aefi/metrics.hpp"
#include "aefi/tuning.hpp"
#include "json.hpp"

namespace aefi {

// ---------------------------------------------------------------------------
// Benchmark specification
// ---------------------------------------------------------------------------

struct DataSource {
    enum class Kind { csv, gaussian, aefi };

    Kind kind = Kind::gaussian;
    std::filesystem::path csv_path;     // csv
    std::filesystem::path schema_path;  // csv (empty = default record schema)
    std::size_t n = 1000;               // synthetic kinds
    double minority_fraction = 0.035;
    std::size_t dims = 8;               // gaussian
    double separation = 2.0;            // gaussian
};

struct AlgorithmEntry {
    std::string name;       // row label in reports
    std::string algorithm;  // registry name
    bool tuned = false;
    std::optional<SearchPlan> plan;  // tuned; nullopt = registry default plan
    Params params;                   // untuned; also merged into every tuned candidate
};

enum class WeightSnapshot { final, max_over_rounds };

/// Settings of the support-vector overlap experiment.
struct OverlapSettings {
    Params svc;    // svc trainer parameters (kernel, c, degree, ...)
    Params boost;  // rusboost trainer parameters
    std::size_t runs = 10;
    WeightSnapshot snapshot = WeightSnapshot::final;
};

struct BenchmarkSpec {
    DataSource data;
    SplitSpec split;  // split.seed is replaced per benchmark seed
    std::vector<AlgorithmEntry> algorithms;
    /// "majority" (the common-metric tables treat the frequent class as
    /// positive) or "minority".
    std::string positive_class = "majority";
    std::vector<std::uint64_t> seeds;
    double threshold = 0.5;
    unsigned threads = 1;
    OverlapSettings overlap;

    void validate() const;
    nlohmann::json to_json() const;
    static BenchmarkSpec from_json(const nlohmann::json& doc,
                                   const std::filesystem::path& base_dir = {});
    /// Relative data paths are resolved against the spec file's directory.
    static BenchmarkSpec load(const std::filesystem::path& path);
};

/// Per benchmark seed: data generation, split, learner and tuning seeds.
struct SeedPlan {
    std::uint64_t data;
    std::uint64_t split;
    std::uint64_t learner;
    std::uint64_t tuning;
};
SeedPlan seed_plan(std::uint64_t seed);

/// Training and test data for one benchmark seed. For record sources the
/// encoder is fit on the training records only, and `transform` refits it
/// inside every tuning fold.
struct PreparedData {
    Dataset train;
    Dataset test;
    FoldTransform transform;
    std::optional<Encoder> encoder;
};
PreparedData prepare_data(const BenchmarkSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Benchmark report
// ---------------------------------------------------------------------------

struct CellResult {
    std::string name;
    std::string algorithm;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    Params params;                 // parameters of the evaluated fit
    std::optional<double> cv_auc;  // tuned cells
    std::vector<std::int64_t> test_ids;
    std::vector<int> labels;       // 1 = minority
    std::vector<double> scores;    // minority score per test row
    ConfusionMatrix confusion;
    MetricsReport metrics;
    double auc = 0;
    double train_seconds = 0;  // wall clock; kept out of the report files
};

struct AlgorithmSummary {
    std::string name;
    std::size_t ok = 0;
    std::size_t failed = 0;
    // means over successful seeds; a metric undefined on some seed is
    // averaged over the seeds where it is defined
    std::optional<double> auc;
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> specificity;
    std::optional<double> f1;
    std::optional<double> g_mean;
    std::optional<double> minority_recall;
    ConfusionMatrix confusion;  // summed over successful seeds
};

struct BenchmarkReport {
    BenchmarkSpec spec;
    nlohmann::json environment;
    std::vector<CellResult> cells;  // algorithm-major, seeds in spec order
    std::vector<AlgorithmSummary> summary;

    const AlgorithmSummary& summary_for(const std::string& name) const;

    nlohmann::json to_json() const;
    static BenchmarkReport from_json(const nlohmann::json& doc);
};

/// Deterministic build and format information (no host names, no clocks).
nlohmann::json environment_stamp();

BenchmarkReport run_benchmark(const BenchmarkSpec& spec,
                              const AlgorithmRegistry& registry = AlgorithmRegistry::builtin());

/// Recomputes every metric cell and every summary mean from the stored
/// labels and scores. Returns one message per mismatch; empty when consistent.
std::vector<std::string> verify_report(const BenchmarkReport& report);

/// Minority recall of a confusion matrix, whichever class is positive.
std::optional<double> minority_recall(const ConfusionMatrix& cm);

std::vector<AlgorithmSummary> summarize(const std::vector<CellResult>& cells,
                                        const std::vector<AlgorithmEntry>& algorithms);

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

enum class ReportFormat { json, csv, markdown };

std::string render_json(const BenchmarkReport& report);
std::string render_csv(const BenchmarkReport& report);
std::string render_markdown(const BenchmarkReport& report);

/// 2x2 block with actual-class rows and predicted-class columns, positive first.
std::string render_confusion(const ConfusionMatrix& cm);

/// Writes report.json / report.csv / report.md into `out_dir` (created if
/// needed). Returns the written paths.
std::vector<std::filesystem::path> emit_report(const BenchmarkReport& report,
                                               const std::vector<ReportFormat>& formats,
                                               const std::filesystem::path& out_dir);

/// Wall-clock training time per cell, written separately so the report
/// files stay byte-identical across reruns.
nlohmann::json timings_json(const BenchmarkReport& report);

// ---------------------------------------------------------------------------
// Support-vector overlap
// ---------------------------------------------------------------------------

/// Row ids of the k largest training weights (final distribution or the
/// per-row maximum over rounds); ties go to the lower row id.
std::set<std::int64_t> top_weight_indices(const BoostedModel& model, std::size_t k,
                                          WeightSnapshot snapshot = WeightSnapshot::final);

struct OverlapRun {
    std::uint64_t seed = 0;
    std::size_t k = 0;
    double overlap = 0;
};

struct OverlapReport {
    std::vector<OverlapRun> runs;
    double mean = 0;
    std::size_t n = 0;
    std::size_t k = 0;
    double baseline = 0;  // k / n
    WeightSnapshot snapshot = WeightSnapshot::final;
    std::vector<std::int64_t> support_ids;

    nlohmann::json to_json() const;
    std::string render_markdown() const;
};

/// Published mean overlap on the clinical data, printed for reference only.
inline constexpr double kReferenceOverlap = 0.839;

OverlapReport overlap_experiment(const Dataset& data, const SvcConfig& svc,
                                 const BoostConfig& boost, std::size_t runs,
                                 WeightSnapshot snapshot = WeightSnapshot::final);

/// Overlap experiment on the training split of the spec's first seed.
OverlapReport run_overlap(const BenchmarkSpec& spec, std::size_t runs);

// ---------------------------------------------------------------------------
// Tuning front end
// ---------------------------------------------------------------------------

struct TuneResult {
    std::string name;
    SearchResult result;
};

/// Runs the search of every tuned algorithm on the first seed's training data.
std::vector<TuneResult> run_tuning(const BenchmarkSpec& spec,
                                   const AlgorithmRegistry& registry = AlgorithmRegistry::builtin());

nlohmann::json to_json(const std::vector<TuneResult>& results);

std::string to_string(WeightSnapshot snapshot);
WeightSnapshot weight_snapshot_from(const std::string& name);

}  // namespace aefi
