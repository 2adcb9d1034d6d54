// Command-line front end: benchmarks, the overlap experiment, tuning,
// synthetic data, training bundles and the HTTP service.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "aefi/analysis.hpp"
#include "aefi/bundle.hpp"
#include "aefi/error.hpp"
#include "aefi/service.hpp"
#include "aefi/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw aefi::StorageError("cannot write " + path.string());
    out << text;
    if (!out.flush()) throw aefi::StorageError("failed writing " + path.string());
}

json read_json_arg(const std::string& text_or_path) {
    std::string text = text_or_path;
    if (!text.empty() && text.front() != '{') {
        std::ifstream in(text_or_path);
        if (!in) throw aefi::ValidationError("cannot read " + text_or_path);
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw aefi::ParseError(std::string("invalid JSON: ") + e.what());
    }
}

// --timestamp wins, then SOURCE_DATE_EPOCH; otherwise the bundle carries no time.
std::optional<std::string> build_timestamp(const std::string& flag) {
    if (!flag.empty()) return flag;
    const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
    if (!epoch) return std::nullopt;
    const auto secs = aefi::parse_number(epoch);
    if (!secs) throw aefi::ValidationError("SOURCE_DATE_EPOCH is not a number");
    const std::time_t t = static_cast<std::time_t>(*secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
}

aefi::BenchmarkSpec load_spec(const std::string& path, const std::optional<std::uint64_t>& seed,
                              unsigned threads) {
    auto spec = aefi::BenchmarkSpec::load(path);
    if (seed) spec.seeds = {*seed};
    if (threads) spec.threads = threads;
    return spec;
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Class-imbalance learning suite for vaccination-reaction records"};
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    unsigned threads = 0;

    // bench
    auto* bench = app.add_subcommand("bench", "Benchmarks and experiments");
    bench->require_subcommand(1);
    std::string spec_path, out_dir, tune_out, snapshot;
    std::size_t runs = 10;

    auto* bench_run = bench->add_subcommand("run", "Run a benchmark spec and write reports");
    bench_run->add_option("--spec", spec_path, "Benchmark spec (JSON)")->required();
    bench_run->add_option("--out", out_dir, "Output directory")->required();
    bench_run->add_option("--seed", seed, "Replace the spec's seed list with this seed");
    bench_run->add_option("--threads", threads, "Worker threads (results do not depend on it)");

    auto* bench_overlap = bench->add_subcommand("overlap", "Support-vector overlap experiment");
    bench_overlap->add_option("--spec", spec_path, "Benchmark spec (JSON)")->required();
    bench_overlap->add_option("--runs", runs, "Number of boosting runs")->check(CLI::PositiveNumber);
    bench_overlap->add_option("--out", out_dir, "Output directory")->required();
    bench_overlap->add_option("--seed", seed, "Seed of the data split and learners");
    bench_overlap->add_option("--snapshot", snapshot, "Weights to rank: final | max_over_rounds");

    auto* bench_tune = bench->add_subcommand("tune", "Hyperparameter search for tuned algorithms");
    bench_tune->add_option("--spec", spec_path, "Benchmark spec (JSON)")->required();
    bench_tune->add_option("--out", tune_out, "Write the leaderboard here instead of stdout");
    bench_tune->add_option("--seed", seed, "Seed of the data split and search");
    bench_tune->add_option("--threads", threads, "Worker threads");

    // data synth
    auto* data = app.add_subcommand("data", "Data utilities");
    data->require_subcommand(1);
    auto* synth = data->add_subcommand("synth", "Write a seeded synthetic dataset as CSV");
    std::string kind = "aefi", synth_out, schema_path;
    std::size_t n = 1000, dims = 8;
    double minority_fraction = 0.035, separation = 2.0;
    std::uint64_t synth_seed = 0;
    synth->add_option("--kind", kind, "gaussian | aefi")->check(CLI::IsMember({"gaussian", "aefi"}));
    synth->add_option("--n", n, "Rows");
    synth->add_option("--minority-fraction", minority_fraction, "Fraction of minority rows");
    synth->add_option("--dims", dims, "Gaussian dimensions");
    synth->add_option("--separation", separation, "Gaussian mean separation");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--out", synth_out, "Output CSV")->required();

    // train
    auto* train = app.add_subcommand("train", "Fit a model on a CSV and write a bundle");
    std::string algo, data_path, bundle_out, params_arg, timestamp;
    std::uint64_t train_seed = 0;
    double threshold = 0.5, test_fraction = 0.29;
    bool tune = false;
    train->add_option("--algo", algo, "Algorithm name")->required();
    train->add_option("--data", data_path, "Record CSV")->required();
    train->add_option("--schema", schema_path, "Record schema (JSON); default record schema if omitted");
    train->add_option("--out", bundle_out, "Bundle path")->required();
    train->add_option("--params", params_arg, "Parameters as JSON text or a JSON file");
    train->add_flag("--tune", tune, "Search the algorithm's default plan first");
    train->add_option("--seed", train_seed, "Seed of split, tuning and fit");
    train->add_option("--threshold", threshold, "Operating threshold stored in the bundle")
        ->check(CLI::Range(0.0, 1.0));
    train->add_option("--test-fraction", test_fraction, "Holdout fraction");
    train->add_option("--timestamp", timestamp, "Training time recorded in the bundle");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the prediction and record-entry HTTP API");
    std::string listen = env_or("AEFI_LISTEN", "127.0.0.1:8080");
    std::string bundle_path = env_or("AEFI_BUNDLE", "");
    std::string store_path = env_or("AEFI_STORE", "records.jsonl");
    std::string static_dir = env_or("AEFI_STATIC_DIR", "");
    std::string serve_schema = env_or("AEFI_SCHEMA", "");
    serve->add_option("--listen", listen, "host:port (env AEFI_LISTEN)");
    serve->add_option("--bundle", bundle_path, "Model bundle (env AEFI_BUNDLE)");
    serve->add_option("--store", store_path, "Record store file (env AEFI_STORE)");
    serve->add_option("--static", static_dir, "Static asset directory (env AEFI_STATIC_DIR)");
    serve->add_option("--schema", serve_schema, "Record schema when no bundle is given (env AEFI_SCHEMA)");
    serve->add_option("--seed", seed, "Unused; accepted for a uniform command line");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (bench_run->parsed()) {
            const auto spec = load_spec(spec_path, seed, threads);
            const auto report = aefi::run_benchmark(spec);
            aefi::emit_report(report,
                              {aefi::ReportFormat::json, aefi::ReportFormat::csv,
                               aefi::ReportFormat::markdown},
                              out_dir);
            write_text(fs::path(out_dir) / "timings.json", aefi::timings_json(report).dump(2) + "\n");
            const auto problems = aefi::verify_report(report);
            for (const auto& p : problems) std::cerr << "verify: " << p << "\n";
            std::size_t failed = 0;
            for (const auto& c : report.cells) failed += c.ok ? 0 : 1;
            std::cout << "wrote " << report.cells.size() << " cells (" << failed << " failed) to "
                      << out_dir << "\n";
            return problems.empty() ? 0 : 2;
        }
        if (bench_overlap->parsed()) {
            auto spec = load_spec(spec_path, seed, 0);
            if (!snapshot.empty()) spec.overlap.snapshot = aefi::weight_snapshot_from(snapshot);
            const auto report = aefi::run_overlap(spec, runs);
            write_text(fs::path(out_dir) / "overlap.json", report.to_json().dump(2) + "\n");
            write_text(fs::path(out_dir) / "overlap.md", report.render_markdown());
            std::cout << "mean overlap " << aefi::format_fixed(report.mean, 4) << " (baseline "
                      << aefi::format_fixed(report.baseline, 4) << ", k " << report.k << ", n "
                      << report.n << ")\n";
            return 0;
        }
        if (bench_tune->parsed()) {
            const auto spec = load_spec(spec_path, seed, threads);
            const std::string text = aefi::to_json(aefi::run_tuning(spec)).dump(2) + "\n";
            if (tune_out.empty())
                std::cout << text;
            else
                write_text(tune_out, text);
            return 0;
        }
        if (synth->parsed()) {
            if (kind == "aefi") {
                const auto schema = aefi::RecordSchema::aefi_default();
                const auto records = aefi::synth_aefi(n, minority_fraction, schema, synth_seed);
                if (fs::path(synth_out).has_parent_path())
                    fs::create_directories(fs::path(synth_out).parent_path());
                aefi::write_csv(synth_out, records, schema);
            } else {
                const auto d = aefi::synth_gaussian(n, minority_fraction, dims, separation, synth_seed);
                std::ostringstream out;
                for (const auto& c : d.columns) out << c << ",";
                out << "label\n";
                for (std::size_t i = 0; i < d.rows(); ++i) {
                    for (double v : d.row(i)) out << aefi::format_number(v) << ",";
                    out << d.y[i] << "\n";
                }
                write_text(synth_out, out.str());
            }
            return 0;
        }
        if (train->parsed()) {
            aefi::BenchmarkSpec spec;
            spec.data.kind = aefi::DataSource::Kind::csv;
            spec.data.csv_path = data_path;
            spec.data.schema_path = schema_path;
            spec.split.test_fraction = test_fraction;
            spec.seeds = {train_seed};
            spec.algorithms = {{algo, algo, tune, std::nullopt, {}}};
            if (!params_arg.empty()) spec.algorithms[0].params = aefi::params_from_json(read_json_arg(params_arg));
            spec.validate();

            const auto registry = aefi::AlgorithmRegistry::builtin();
            const auto& trainer = registry.trainer(algo);
            const auto seeds = aefi::seed_plan(train_seed);
            const auto prepared = aefi::prepare_data(spec, train_seed);
            aefi::Params params = spec.algorithms[0].params;
            if (tune) {
                auto plan = registry.default_plan(algo);
                plan.seed = seeds.tuning;
                for (const auto& [k, v] : params) plan.fixed[k] = v;
                params = aefi::search(prepared.train, trainer, plan, prepared.transform).best.params;
            }
            aefi::ModelBundle bundle;
            bundle.encoder = *prepared.encoder;
            bundle.model = trainer(prepared.train, params, seeds.learner);
            std::vector<double> scores;
            for (std::size_t i = 0; i < prepared.test.rows(); ++i)
                scores.push_back(aefi::predict_score(bundle.model, prepared.test.row(i)));
            bundle.metadata.algorithm = algo;
            bundle.metadata.params = params;
            bundle.metadata.trained_at = build_timestamp(timestamp);
            bundle.metadata.holdout_auc = aefi::auc(scores, prepared.test.y);
            bundle.metadata.seed = train_seed;
            bundle.metadata.threshold = threshold;
            if (fs::path(bundle_out).has_parent_path())
                fs::create_directories(fs::path(bundle_out).parent_path());
            aefi::save_bundle(bundle_out, bundle);
            std::cout << "holdout AUC " << aefi::format_fixed(*bundle.metadata.holdout_auc, 4)
                      << ", bundle " << bundle_out << "\n";
            return 0;
        }
        if (serve->parsed()) {
            std::optional<aefi::ModelBundle> bundle;
            if (!bundle_path.empty()) bundle = aefi::load_bundle(bundle_path);
            aefi::RecordSchema schema = !serve_schema.empty() ? aefi::RecordSchema::load(serve_schema)
                                        : bundle                ? bundle->schema()
                                                                : aefi::RecordSchema::aefi_default();
            aefi::ServiceCore core(std::move(schema), store_path);
            if (bundle) core.set_bundle(std::move(*bundle));
            aefi::ServerOptions options;
            const auto colon = listen.rfind(':');
            if (colon == std::string::npos) throw aefi::ValidationError("--listen must be host:port");
            options.host = listen.substr(0, colon);
            const auto port = aefi::parse_number(listen.substr(colon + 1));
            if (!port || *port < 0 || *port > 65535) throw aefi::ValidationError("invalid port in --listen");
            options.port = static_cast<int>(*port);
            options.static_dir = static_dir;
            std::cout << "listening on " << listen << std::endl;
            aefi::serve(core, options);
            return 0;
        }
    } catch (const aefi::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
