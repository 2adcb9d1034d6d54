#include "aefi/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "aefi/error.hpp"
#include "aefi/parallel.hpp"
#include "aefi/text.hpp"

namespace aefi {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& doc, const char* key) {
    if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
    return doc.at(key).get<double>();
}

std::string kind_name(DataSource::Kind kind) {
    switch (kind) {
        case DataSource::Kind::csv: return "csv";
        case DataSource::Kind::gaussian: return "gaussian";
        case DataSource::Kind::aefi: return "aefi";
    }
    return "?";
}

json confusion_json(const ConfusionMatrix& cm) {
    return json{{"tp", cm.tp}, {"fn", cm.fn}, {"fp", cm.fp}, {"tn", cm.tn},
                {"positive_class", cm.positive_class}};
}

ConfusionMatrix confusion_from(const json& doc) {
    ConfusionMatrix cm;
    cm.tp = doc.at("tp").get<std::size_t>();
    cm.fn = doc.at("fn").get<std::size_t>();
    cm.fp = doc.at("fp").get<std::size_t>();
    cm.tn = doc.at("tn").get<std::size_t>();
    cm.positive_class = doc.at("positive_class").get<int>();
    return cm;
}

json metrics_json(const MetricsReport& m) {
    return json{{"acc_pos", opt(m.acc_pos)},     {"acc_neg", opt(m.acc_neg)},
                {"precision", opt(m.precision)}, {"accuracy", opt(m.accuracy)},
                {"f1", opt(m.f1)},               {"g_mean", opt(m.g_mean)}};
}

MetricsReport metrics_from(const json& doc) {
    MetricsReport m;
    m.acc_pos = opt_from(doc, "acc_pos");
    m.acc_neg = opt_from(doc, "acc_neg");
    m.precision = opt_from(doc, "precision");
    m.accuracy = opt_from(doc, "accuracy");
    m.f1 = opt_from(doc, "f1");
    m.g_mean = opt_from(doc, "g_mean");
    return m;
}

int positive_label(const std::string& convention) {
    if (convention == "majority") return 0;
    if (convention == "minority") return 1;
    throw ValidationError("positive_class must be 'majority' or 'minority', got '" + convention + "'");
}

struct Evaluation {
    ConfusionMatrix confusion;
    MetricsReport metrics;
    double auc = 0;
};

Evaluation evaluate(std::span<const int> labels, std::span<const double> scores, double threshold,
                    const std::string& convention) {
    std::vector<int> predicted(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) predicted[i] = predict_label(scores[i], threshold);
    Evaluation e;
    e.confusion = confusion(labels, predicted, positive_label(convention));
    e.metrics = compute_metrics(e.confusion);
    e.auc = auc(scores, labels);
    return e;
}

std::string show(const std::optional<double>& v, int digits = 3) {
    return v ? format_fixed(*v, digits) : "n/a";
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string csv_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) throw StorageError("failed writing " + path.string());
}

}  // namespace

std::string to_string(WeightSnapshot snapshot) {
    return snapshot == WeightSnapshot::final ? "final" : "max_over_rounds";
}

WeightSnapshot weight_snapshot_from(const std::string& name) {
    if (name == "final") return WeightSnapshot::final;
    if (name == "max_over_rounds" || name == "max") return WeightSnapshot::max_over_rounds;
    throw ValidationError("unknown weight snapshot '" + name + "'");
}

// ---------------------------------------------------------------------------
// Spec
// ---------------------------------------------------------------------------

void BenchmarkSpec::validate() const {
    if (algorithms.empty()) throw ValidationError("benchmark needs at least one algorithm");
    if (seeds.empty()) throw ValidationError("benchmark needs at least one seed");
    positive_label(positive_class);
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ValidationError("threshold must lie in [0, 1]");
    if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0))
        throw ValidationError("split test_fraction must lie in (0, 1)");
    std::set<std::string> names;
    for (const auto& a : algorithms) {
        if (a.name.empty() || a.algorithm.empty())
            throw ValidationError("every algorithm needs a name and a registry algorithm");
        if (!names.insert(a.name).second)
            throw ValidationError("duplicate algorithm name '" + a.name + "'");
        if (a.plan) a.plan->validate();
    }
    if (data.kind == DataSource::Kind::csv) {
        if (data.csv_path.empty()) throw ValidationError("csv data source needs a path");
    } else {
        minority_count(data.n, data.minority_fraction);
        if (data.kind == DataSource::Kind::gaussian && data.dims == 0)
            throw ValidationError("gaussian data needs dims >= 1");
    }
    if (overlap.runs == 0) throw ValidationError("overlap runs must be positive");
}

json BenchmarkSpec::to_json() const {
    json d{{"kind", kind_name(data.kind)}};
    if (data.kind == DataSource::Kind::csv) {
        d["path"] = data.csv_path.generic_string();
        d["schema"] = data.schema_path.empty() ? json(nullptr) : json(data.schema_path.generic_string());
    } else {
        d["n"] = data.n;
        d["minority_fraction"] = data.minority_fraction;
        if (data.kind == DataSource::Kind::gaussian) {
            d["dims"] = data.dims;
            d["separation"] = data.separation;
        }
    }
    json algos = json::array();
    for (const auto& a : algorithms) {
        json e{{"name", a.name}, {"algorithm", a.algorithm}, {"tuned", a.tuned},
               {"params", aefi::to_json(a.params)}};
        if (a.plan) e["plan"] = a.plan->to_json();
        algos.push_back(std::move(e));
    }
    return json{{"data", d},
                {"split", {{"test_fraction", split.test_fraction}, {"stratified", split.stratified}}},
                {"algorithms", algos},
                {"positive_class", positive_class},
                {"seeds", seeds},
                {"threshold", threshold},
                {"overlap",
                 {{"svc", aefi::to_json(overlap.svc)},
                  {"boost", aefi::to_json(overlap.boost)},
                  {"runs", overlap.runs},
                  {"snapshot", to_string(overlap.snapshot)}}}};
}

BenchmarkSpec BenchmarkSpec::from_json(const json& doc, const fs::path& base_dir) {
    BenchmarkSpec spec;
    try {
        const json& d = doc.at("data");
        const std::string kind = d.at("kind").get<std::string>();
        auto resolve = [&](const std::string& p) {
            fs::path path(p);
            return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
        };
        if (kind == "csv") {
            spec.data.kind = DataSource::Kind::csv;
            spec.data.csv_path = resolve(d.at("path").get<std::string>());
            if (d.contains("schema") && !d.at("schema").is_null())
                spec.data.schema_path = resolve(d.at("schema").get<std::string>());
        } else if (kind == "gaussian" || kind == "aefi") {
            spec.data.kind = kind == "gaussian" ? DataSource::Kind::gaussian : DataSource::Kind::aefi;
            spec.data.n = d.value("n", spec.data.n);
            spec.data.minority_fraction = d.value("minority_fraction", spec.data.minority_fraction);
            spec.data.dims = d.value("dims", spec.data.dims);
            spec.data.separation = d.value("separation", spec.data.separation);
        } else {
            throw ValidationError("unknown data kind '" + kind + "'");
        }
        if (doc.contains("split")) {
            const json& s = doc.at("split");
            spec.split.test_fraction = s.value("test_fraction", spec.split.test_fraction);
            spec.split.stratified = s.value("stratified", spec.split.stratified);
        }
        for (const json& a : doc.at("algorithms")) {
            AlgorithmEntry e;
            e.algorithm = a.at("algorithm").get<std::string>();
            e.name = a.value("name", e.algorithm);
            e.tuned = a.value("tuned", false);
            if (a.contains("params")) e.params = params_from_json(a.at("params"));
            if (a.contains("plan")) e.plan = SearchPlan::from_json(a.at("plan"));
            spec.algorithms.push_back(std::move(e));
        }
        spec.positive_class = doc.value("positive_class", spec.positive_class);
        spec.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
        spec.threshold = doc.value("threshold", spec.threshold);
        spec.threads = doc.value("threads", spec.threads);
        if (doc.contains("overlap")) {
            const json& o = doc.at("overlap");
            if (o.contains("svc")) spec.overlap.svc = params_from_json(o.at("svc"));
            if (o.contains("boost")) spec.overlap.boost = params_from_json(o.at("boost"));
            spec.overlap.runs = o.value("runs", spec.overlap.runs);
            spec.overlap.snapshot = weight_snapshot_from(o.value("snapshot", std::string("final")));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed benchmark spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

BenchmarkSpec BenchmarkSpec::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read benchmark spec " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return from_json(doc, path.parent_path());
}

SeedPlan seed_plan(std::uint64_t seed) {
    return {derive_seed(seed, 0), derive_seed(seed, 1), derive_seed(seed, 2), derive_seed(seed, 3)};
}

// ---------------------------------------------------------------------------
// Data preparation
// ---------------------------------------------------------------------------

namespace {

PreparedData prepare_records(std::vector<RawRecord> raw, const RecordSchema& schema,
                             const SplitSpec& split) {
    auto cleaned = clean(raw, schema).records;
    std::vector<int> labels;
    labels.reserve(cleaned.size());
    for (const auto& r : cleaned) {
        auto t = r.get(schema.target);
        if (!t) throw EncodingError("record " + std::to_string(r.id) + " has no target value");
        if (*t == schema.positive_level)
            labels.push_back(1);
        else if (*t == schema.negative_level)
            labels.push_back(0);
        else
            throw EncodingError("record " + std::to_string(r.id) + " has target '" + *t + "'");
    }
    const auto parts = split_indices(labels, split);
    auto train_raw = std::make_shared<std::vector<RawRecord>>();
    std::vector<RawRecord> test_raw;
    for (auto i : parts.train) train_raw->push_back(cleaned[i]);
    for (auto i : parts.test) test_raw.push_back(cleaned[i]);

    PreparedData out;
    Encoder encoder = fit_encoder(*train_raw, schema);
    out.train = encoder.encode_dataset(*train_raw);
    out.test = encoder.encode_dataset(test_raw);
    out.encoder = encoder;
    out.transform = [train_raw, schema](const Dataset&, std::span<const std::size_t> tr,
                                        std::span<const std::size_t> te) {
        std::vector<RawRecord> a, b;
        for (auto i : tr) a.push_back((*train_raw)[i]);
        for (auto i : te) b.push_back((*train_raw)[i]);
        Encoder fold_encoder = fit_encoder(a, schema);
        return std::make_pair(fold_encoder.encode_dataset(a), fold_encoder.encode_dataset(b));
    };
    return out;
}

}  // namespace

PreparedData prepare_data(const BenchmarkSpec& spec, std::uint64_t seed) {
    const SeedPlan sp = seed_plan(seed);
    SplitSpec split = spec.split;
    split.seed = sp.split;
    switch (spec.data.kind) {
        case DataSource::Kind::gaussian: {
            Dataset all = synth_gaussian(spec.data.n, spec.data.minority_fraction, spec.data.dims,
                                         spec.data.separation, sp.data);
            auto [train, test] = stratified_split(all, split);
            PreparedData out;
            out.train = std::move(train);
            out.test = std::move(test);
            return out;
        }
        case DataSource::Kind::aefi: {
            const auto schema = RecordSchema::aefi_default();
            return prepare_records(
                synth_aefi(spec.data.n, spec.data.minority_fraction, schema, sp.data), schema, split);
        }
        case DataSource::Kind::csv: {
            const auto schema = spec.data.schema_path.empty()
                                    ? RecordSchema::aefi_default()
                                    : RecordSchema::load(spec.data.schema_path);
            return prepare_records(load_csv(spec.data.csv_path, schema), schema, split);
        }
    }
    throw ValidationError("unknown data source");
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

std::optional<double> minority_recall(const ConfusionMatrix& cm) {
    return cm.positive_class == 1 ? compute_metrics(cm).acc_pos : compute_metrics(cm).acc_neg;
}

json environment_stamp() {
    return json{{"library", "aefi"},
                {"library_version", "0.1.0"},
                {"compiler", __VERSION__},
                {"cxx_standard", static_cast<long>(__cplusplus)},
                {"rng", "mt19937_64"},
                {"report_format", 1}};
}

std::vector<AlgorithmSummary> summarize(const std::vector<CellResult>& cells,
                                        const std::vector<AlgorithmEntry>& algorithms) {
    std::vector<AlgorithmSummary> out;
    for (const auto& entry : algorithms) {
        AlgorithmSummary s;
        s.name = entry.name;
        std::map<std::string, std::pair<double, std::size_t>> acc;
        auto add = [&](const char* key, const std::optional<double>& v) {
            if (!v) return;
            auto& slot = acc[key];
            slot.first += *v;
            slot.second += 1;
        };
        s.confusion.positive_class = -1;
        for (const auto& c : cells) {
            if (c.name != entry.name) continue;
            if (!c.ok) {
                ++s.failed;
                continue;
            }
            ++s.ok;
            add("auc", c.auc);
            add("accuracy", c.metrics.accuracy);
            add("precision", c.metrics.precision);
            add("recall", c.metrics.acc_pos);
            add("specificity", c.metrics.acc_neg);
            add("f1", c.metrics.f1);
            add("g_mean", c.metrics.g_mean);
            add("minority_recall", minority_recall(c.confusion));
            s.confusion.tp += c.confusion.tp;
            s.confusion.fn += c.confusion.fn;
            s.confusion.fp += c.confusion.fp;
            s.confusion.tn += c.confusion.tn;
            s.confusion.positive_class = c.confusion.positive_class;
        }
        auto mean = [&](const char* key) -> std::optional<double> {
            auto it = acc.find(key);
            if (it == acc.end() || it->second.second == 0) return std::nullopt;
            return it->second.first / static_cast<double>(it->second.second);
        };
        s.auc = mean("auc");
        s.accuracy = mean("accuracy");
        s.precision = mean("precision");
        s.recall = mean("recall");
        s.specificity = mean("specificity");
        s.f1 = mean("f1");
        s.g_mean = mean("g_mean");
        s.minority_recall = mean("minority_recall");
        if (s.confusion.positive_class < 0) s.confusion.positive_class = 0;
        out.push_back(std::move(s));
    }
    return out;
}

BenchmarkReport run_benchmark(const BenchmarkSpec& spec, const AlgorithmRegistry& registry) {
    spec.validate();
    for (const auto& a : spec.algorithms)
        if (!registry.contains(a.algorithm))
            throw ValidationError("unknown algorithm '" + a.algorithm + "'");

    std::vector<PreparedData> prepared;
    prepared.reserve(spec.seeds.size());
    for (auto seed : spec.seeds) prepared.push_back(prepare_data(spec, seed));

    const std::size_t n_seeds = spec.seeds.size();
    std::vector<CellResult> cells(spec.algorithms.size() * n_seeds);
    parallel_for(
        cells.size(),
        [&](std::size_t idx) {
            const auto& entry = spec.algorithms[idx / n_seeds];
            const std::size_t si = idx % n_seeds;
            const auto& data = prepared[si];
            const SeedPlan sp = seed_plan(spec.seeds[si]);
            CellResult& cell = cells[idx];
            cell.name = entry.name;
            cell.algorithm = entry.algorithm;
            cell.seed = spec.seeds[si];
            cell.confusion.positive_class = positive_label(spec.positive_class);
            try {
                const Trainer& trainer = registry.trainer(entry.algorithm);
                Params params = entry.params;
                if (entry.tuned) {
                    SearchPlan plan = entry.plan ? *entry.plan : registry.default_plan(entry.algorithm);
                    plan.seed = sp.tuning;
                    plan.threads = 1;
                    for (const auto& [k, v] : entry.params) plan.fixed[k] = v;
                    const auto found = search(data.train, trainer, plan, data.transform);
                    params = found.best.params;
                    cell.cv_auc = found.best.mean_auc;
                }
                cell.params = params;
                const auto t0 = std::chrono::steady_clock::now();
                const TrainedModel model = trainer(data.train, params, sp.learner);
                cell.train_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                cell.scores.resize(data.test.rows());
                for (std::size_t i = 0; i < data.test.rows(); ++i)
                    cell.scores[i] = predict_score(model, data.test.row(i));
                cell.labels = data.test.y;
                cell.test_ids = data.test.ids;
                const auto e = evaluate(cell.labels, cell.scores, spec.threshold, spec.positive_class);
                cell.confusion = e.confusion;
                cell.metrics = e.metrics;
                cell.auc = e.auc;
                cell.ok = true;
            } catch (const std::exception& ex) {
                cell.ok = false;
                cell.error = ex.what();
                cell.scores.clear();
                cell.labels.clear();
                cell.test_ids.clear();
            }
        },
        spec.threads);

    BenchmarkReport report;
    report.spec = spec;
    report.environment = environment_stamp();
    report.cells = std::move(cells);
    report.summary = summarize(report.cells, spec.algorithms);
    return report;
}

const AlgorithmSummary& BenchmarkReport::summary_for(const std::string& name) const {
    for (const auto& s : summary)
        if (s.name == name) return s;
    throw ValidationError("no algorithm named '" + name + "' in report");
}

json BenchmarkReport::to_json() const {
    json cell_docs = json::array();
    for (const auto& c : cells) {
        json d{{"name", c.name},
               {"algorithm", c.algorithm},
               {"seed", c.seed},
               {"status", c.ok ? "ok" : "failed"}};
        if (!c.ok) {
            d["error"] = c.error;
        } else {
            d["params"] = aefi::to_json(c.params);
            d["cv_auc"] = opt(c.cv_auc);
            d["test_ids"] = c.test_ids;
            d["labels"] = c.labels;
            d["scores"] = c.scores;
            d["confusion"] = confusion_json(c.confusion);
            d["metrics"] = metrics_json(c.metrics);
            d["auc"] = c.auc;
        }
        cell_docs.push_back(std::move(d));
    }
    json sums = json::array();
    for (const auto& s : summary) {
        sums.push_back(json{{"name", s.name},
                            {"ok", s.ok},
                            {"failed", s.failed},
                            {"auc", opt(s.auc)},
                            {"accuracy", opt(s.accuracy)},
                            {"precision", opt(s.precision)},
                            {"recall", opt(s.recall)},
                            {"specificity", opt(s.specificity)},
                            {"f1", opt(s.f1)},
                            {"g_mean", opt(s.g_mean)},
                            {"minority_recall", opt(s.minority_recall)},
                            {"confusion", confusion_json(s.confusion)}});
    }
    return json{{"spec", spec.to_json()},
                {"environment", environment},
                {"cells", cell_docs},
                {"summary", sums}};
}

BenchmarkReport BenchmarkReport::from_json(const json& doc) {
    BenchmarkReport r;
    try {
        r.spec = BenchmarkSpec::from_json(doc.at("spec"));
        r.environment = doc.at("environment");
        for (const json& d : doc.at("cells")) {
            CellResult c;
            c.name = d.at("name").get<std::string>();
            c.algorithm = d.at("algorithm").get<std::string>();
            c.seed = d.at("seed").get<std::uint64_t>();
            c.ok = d.at("status").get<std::string>() == "ok";
            if (!c.ok) {
                c.error = d.value("error", std::string());
            } else {
                c.params = params_from_json(d.at("params"));
                c.cv_auc = opt_from(d, "cv_auc");
                c.test_ids = d.at("test_ids").get<std::vector<std::int64_t>>();
                c.labels = d.at("labels").get<std::vector<int>>();
                c.scores = d.at("scores").get<std::vector<double>>();
                c.confusion = confusion_from(d.at("confusion"));
                c.metrics = metrics_from(d.at("metrics"));
                c.auc = d.at("auc").get<double>();
            }
            r.cells.push_back(std::move(c));
        }
        for (const json& d : doc.at("summary")) {
            AlgorithmSummary s;
            s.name = d.at("name").get<std::string>();
            s.ok = d.at("ok").get<std::size_t>();
            s.failed = d.at("failed").get<std::size_t>();
            s.auc = opt_from(d, "auc");
            s.accuracy = opt_from(d, "accuracy");
            s.precision = opt_from(d, "precision");
            s.recall = opt_from(d, "recall");
            s.specificity = opt_from(d, "specificity");
            s.f1 = opt_from(d, "f1");
            s.g_mean = opt_from(d, "g_mean");
            s.minority_recall = opt_from(d, "minority_recall");
            s.confusion = confusion_from(d.at("confusion"));
            r.summary.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed benchmark report: ") + e.what());
    }
    return r;
}

std::vector<std::string> verify_report(const BenchmarkReport& report) {
    std::vector<std::string> problems;
    auto check = [&](bool ok, const std::string& what) {
        if (!ok) problems.push_back(what);
    };
    for (const auto& c : report.cells) {
        if (!c.ok) continue;
        const std::string where = c.name + " seed " + std::to_string(c.seed) + ": ";
        if (c.labels.size() != c.scores.size() || c.labels.size() != c.test_ids.size()) {
            problems.push_back(where + "stored predictions have mismatched lengths");
            continue;
        }
        Evaluation e;
        try {
            e = evaluate(c.labels, c.scores, report.spec.threshold, report.spec.positive_class);
        } catch (const std::exception& ex) {
            problems.push_back(where + ex.what());
            continue;
        }
        check(e.confusion == c.confusion, where + "confusion matrix differs");
        check(e.metrics.acc_pos == c.metrics.acc_pos, where + "recall differs");
        check(e.metrics.acc_neg == c.metrics.acc_neg, where + "specificity differs");
        check(e.metrics.precision == c.metrics.precision, where + "precision differs");
        check(e.metrics.accuracy == c.metrics.accuracy, where + "accuracy differs");
        check(e.metrics.f1 == c.metrics.f1, where + "F1 differs");
        check(e.metrics.g_mean == c.metrics.g_mean, where + "G-mean differs");
        check(e.auc == c.auc, where + "AUC differs");
        if (c.metrics.g_mean && c.metrics.acc_pos && c.metrics.acc_neg) {
            const double lhs = *c.metrics.g_mean * *c.metrics.g_mean;
            check(std::abs(lhs - *c.metrics.acc_pos * *c.metrics.acc_neg) <= 1e-9,
                  where + "G-mean squared differs from recall * specificity");
        }
    }
    const auto expected = summarize(report.cells, report.spec.algorithms);
    if (expected.size() != report.summary.size()) {
        problems.push_back("summary has the wrong number of rows");
        return problems;
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto& a = expected[i];
        const auto& b = report.summary[i];
        const std::string where = "summary " + a.name + ": ";
        check(a.name == b.name && a.ok == b.ok && a.failed == b.failed, where + "counts differ");
        check(a.auc == b.auc && a.accuracy == b.accuracy && a.precision == b.precision &&
                  a.recall == b.recall && a.specificity == b.specificity && a.f1 == b.f1 &&
                  a.g_mean == b.g_mean && a.minority_recall == b.minority_recall,
              where + "means differ");
        check(a.confusion == b.confusion, where + "summed confusion differs");
    }
    return problems;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

std::string render_json(const BenchmarkReport& report) { return report.to_json().dump(2) + "\n"; }

std::string render_csv(const BenchmarkReport& report) {
    std::ostringstream out;
    out << "algorithm,trainer,seed,status,auc,accuracy,precision,recall,specificity,f1,g_mean,"
           "minority_recall,tp,fn,fp,tn,cv_auc,params,error\n";
    for (const auto& c : report.cells) {
        out << csv_field(c.name) << ',' << c.algorithm << ',' << c.seed << ','
            << (c.ok ? "ok" : "failed") << ',';
        if (c.ok) {
            out << format_number(c.auc) << ',' << csv_number(c.metrics.accuracy) << ','
                << csv_number(c.metrics.precision) << ',' << csv_number(c.metrics.acc_pos) << ','
                << csv_number(c.metrics.acc_neg) << ',' << csv_number(c.metrics.f1) << ','
                << csv_number(c.metrics.g_mean) << ',' << csv_number(minority_recall(c.confusion))
                << ',' << c.confusion.tp << ',' << c.confusion.fn << ',' << c.confusion.fp << ','
                << c.confusion.tn << ',' << csv_number(c.cv_auc) << ','
                << csv_field(to_string(c.params)) << ",\n";
        } else {
            out << ",,,,,,,,,,,,," << csv_field(c.error) << '\n';
        }
    }
    return out.str();
}

std::string render_confusion(const ConfusionMatrix& cm) {
    const std::string pos = cm.positive_class == 1 ? "minority" : "majority";
    const std::string neg = cm.positive_class == 1 ? "majority" : "minority";
    auto cell = [](std::size_t v) {
        std::string s = std::to_string(v);
        return std::string(s.size() < 14 ? 14 - s.size() : 0, ' ') + s;
    };
    std::ostringstream out;
    out << "                  Pred " << pos << "  Pred " << neg << "\n";
    out << "Actual " << pos << "  " << cell(cm.tp) << cell(cm.fn) << "\n";
    out << "Actual " << neg << "  " << cell(cm.fp) << cell(cm.tn) << "\n";
    return out.str();
}

std::string render_markdown(const BenchmarkReport& report) {
    const auto& spec = report.spec;
    std::ostringstream out;
    out << "# Benchmark report\n\n";
    out << "- data: " << kind_name(spec.data.kind);
    if (spec.data.kind == DataSource::Kind::csv) {
        out << " " << spec.data.csv_path.generic_string();
    } else {
        out << ", n " << spec.data.n << ", minority fraction "
            << format_number(spec.data.minority_fraction);
        if (spec.data.kind == DataSource::Kind::gaussian)
            out << ", dims " << spec.data.dims << ", separation " << format_number(spec.data.separation);
    }
    out << "\n- split: test fraction " << format_number(spec.split.test_fraction)
        << (spec.split.stratified ? ", stratified" : ", unstratified") << "\n";
    out << "- seeds: " << spec.seeds.size() << "\n";
    out << "- positive class: " << spec.positive_class;
    if (spec.positive_class == "majority") out << " (specificity is the minority recall)";
    out << "\n- threshold: " << format_number(spec.threshold) << "\n\n";
    out << "Values are means over successful seeds, rounded to three decimals.\n\n";

    out << "## Common metrics\n\n";
    out << "| Algorithm | Accuracy | Precision | Recall | F1 | AUC | Seeds ok |\n";
    out << "|---|---|---|---|---|---|---|\n";
    for (const auto& s : report.summary) {
        out << "| " << s.name << " | " << show(s.accuracy) << " | " << show(s.precision) << " | "
            << show(s.recall) << " | " << show(s.f1) << " | " << show(s.auc) << " | " << s.ok << "/"
            << (s.ok + s.failed) << " |\n";
    }

    out << "\n## Imbalance metrics\n\n| Metric |";
    for (const auto& s : report.summary) out << " " << s.name << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < report.summary.size(); ++i) out << "---|";
    out << "\n";
    auto row = [&](const char* label, auto getter) {
        out << "| " << label << " |";
        for (const auto& s : report.summary) out << " " << show(getter(s)) << " |";
        out << "\n";
    };
    row("Precision", [](const AlgorithmSummary& s) { return s.precision; });
    row("Recall", [](const AlgorithmSummary& s) { return s.recall; });
    row("Specificity", [](const AlgorithmSummary& s) { return s.specificity; });
    row("F1", [](const AlgorithmSummary& s) { return s.f1; });
    row("G-mean", [](const AlgorithmSummary& s) { return s.g_mean; });
    row("AUC", [](const AlgorithmSummary& s) { return s.auc; });
    row("Minority recall", [](const AlgorithmSummary& s) { return s.minority_recall; });

    out << "\n## Confusion matrices\n\nSummed over successful seeds. Rows are the actual class, "
           "columns the predicted class.\n";
    for (const auto& s : report.summary) {
        out << "\n### " << s.name << "\n\n```\n" << render_confusion(s.confusion) << "```\n";
    }

    out << "\n## Per-seed results\n\n";
    out << "| Algorithm | Seed | Status | AUC | Accuracy | Precision | Recall | Specificity | F1 | "
           "G-mean | TP | FN | FP | TN |\n";
    out << "|---|---|---|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& c : report.cells) {
        out << "| " << c.name << " | " << c.seed << " | ";
        if (!c.ok) {
            std::string msg = c.error;
            std::replace(msg.begin(), msg.end(), '|', '/');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            out << "failed: " << msg << " | | | | | | | | | | |\n";
            continue;
        }
        out << "ok | " << format_fixed(c.auc, 3) << " | " << show(c.metrics.accuracy) << " | "
            << show(c.metrics.precision) << " | " << show(c.metrics.acc_pos) << " | "
            << show(c.metrics.acc_neg) << " | " << show(c.metrics.f1) << " | "
            << show(c.metrics.g_mean) << " | " << c.confusion.tp << " | " << c.confusion.fn << " | "
            << c.confusion.fp << " | " << c.confusion.tn << " |\n";
    }
    return out.str();
}

std::vector<fs::path> emit_report(const BenchmarkReport& report,
                                  const std::vector<ReportFormat>& formats, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
        throw StorageError("cannot create output directory " + out_dir.string());
    std::vector<fs::path> written;
    for (auto f : formats) {
        fs::path path;
        std::string content;
        switch (f) {
            case ReportFormat::json:
                path = out_dir / "report.json";
                content = render_json(report);
                break;
            case ReportFormat::csv:
                path = out_dir / "report.csv";
                content = render_csv(report);
                break;
            case ReportFormat::markdown:
                path = out_dir / "report.md";
                content = render_markdown(report);
                break;
        }
        write_file(path, content);
        written.push_back(path);
    }
    return written;
}

json timings_json(const BenchmarkReport& report) {
    json cells = json::array();
    for (const auto& c : report.cells)
        cells.push_back(json{{"name", c.name}, {"seed", c.seed}, {"train_seconds", c.train_seconds}});
    return json{{"cells", cells}};
}

// ---------------------------------------------------------------------------
// Overlap
// ---------------------------------------------------------------------------

std::set<std::int64_t> top_weight_indices(const BoostedModel& model, std::size_t k,
                                          WeightSnapshot snapshot) {
    const auto& weights =
        snapshot == WeightSnapshot::final ? model.final_distribution : model.max_distribution;
    const std::size_t n = weights.size();
    if (model.row_ids.size() != n) throw ValidationError("model weights and row ids disagree");
    if (k > n)
        throw ValidationError("requested " + std::to_string(k) + " rows from a model trained on " +
                              std::to_string(n));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (weights[a] != weights[b]) return weights[a] > weights[b];
        return model.row_ids[a] < model.row_ids[b];
    });
    std::set<std::int64_t> out;
    for (std::size_t i = 0; i < k; ++i) out.insert(model.row_ids[order[i]]);
    return out;
}

OverlapReport overlap_experiment(const Dataset& data, const SvcConfig& svc, const BoostConfig& boost,
                                 std::size_t runs, WeightSnapshot snapshot) {
    if (data.count(0) == 0 || data.count(1) == 0)
        throw ValidationError("overlap experiment needs both classes");
    if (runs == 0) throw ValidationError("overlap experiment needs at least one run");
    const SvcModel model = svc_fit(data, svc);
    const auto& support = model.support_ids;
    const std::size_t k = support.size();
    if (k == 0) throw Error("SVC produced no support vectors");
    const std::set<std::int64_t> s(support.begin(), support.end());

    OverlapReport report;
    report.n = data.rows();
    report.k = k;
    report.baseline = static_cast<double>(k) / static_cast<double>(data.rows());
    report.snapshot = snapshot;
    report.support_ids = support;
    double total = 0;
    for (std::size_t r = 0; r < runs; ++r) {
        BoostConfig cfg = boost;
        cfg.seed = derive_seed(boost.seed, r);
        cfg.init_distribution.reset();
        const auto fitted = rusboost_fit(data, cfg);
        const auto top = top_weight_indices(fitted, k, snapshot);
        std::size_t shared = 0;
        for (auto id : top) shared += s.count(id);
        const double overlap = static_cast<double>(shared) / static_cast<double>(k);
        report.runs.push_back({cfg.seed, k, overlap});
        total += overlap;
    }
    report.mean = total / static_cast<double>(runs);
    return report;
}

json OverlapReport::to_json() const {
    json run_docs = json::array();
    for (const auto& r : runs)
        run_docs.push_back(json{{"seed", r.seed}, {"k", r.k}, {"overlap", r.overlap}});
    return json{{"runs", run_docs},     {"mean", mean},
                {"n", n},               {"k", k},
                {"baseline", baseline}, {"snapshot", to_string(snapshot)},
                {"support_ids", support_ids},
                {"reference_mean", kReferenceOverlap}};
}

std::string OverlapReport::render_markdown() const {
    std::ostringstream out;
    out << "# Support-vector overlap\n\n";
    out << "- training rows n: " << n << "\n- support vectors k: " << k
        << "\n- weight snapshot: " << to_string(snapshot) << "\n\n";
    out << "| Run | Seed | Overlap |\n|---|---|---|\n";
    for (std::size_t i = 0; i < runs.size(); ++i)
        out << "| " << i + 1 << " | " << runs[i].seed << " | " << format_fixed(runs[i].overlap, 4)
            << " |\n";
    out << "\n- mean overlap: " << format_fixed(mean, 4) << "\n";
    out << "- random baseline k/n: " << format_fixed(baseline, 4) << "\n";
    out << "- reference (published, clinical data): " << format_fixed(kReferenceOverlap, 3) << "\n";
    return out.str();
}

OverlapReport run_overlap(const BenchmarkSpec& spec, std::size_t runs) {
    spec.validate();
    const std::uint64_t seed = spec.seeds.front();
    const SeedPlan sp = seed_plan(seed);
    const PreparedData data = prepare_data(spec, seed);
    Params svc_params = spec.overlap.svc;
    svc_params.try_emplace("kernel", "polynomial");
    SvcConfig svc = svc_config_from(svc_params, data.train.cols());
    svc.seed = sp.learner;
    const BoostConfig boost = boost_config_from(spec.overlap.boost, sp.learner);
    return overlap_experiment(data.train, svc, boost, runs, spec.overlap.snapshot);
}

// ---------------------------------------------------------------------------
// Tuning
// ---------------------------------------------------------------------------

std::vector<TuneResult> run_tuning(const BenchmarkSpec& spec, const AlgorithmRegistry& registry) {
    spec.validate();
    const std::uint64_t seed = spec.seeds.front();
    const SeedPlan sp = seed_plan(seed);
    const PreparedData data = prepare_data(spec, seed);
    std::vector<TuneResult> out;
    for (const auto& entry : spec.algorithms) {
        if (!entry.tuned) continue;
        SearchPlan plan = entry.plan ? *entry.plan : registry.default_plan(entry.algorithm);
        plan.seed = sp.tuning;
        plan.threads = spec.threads;
        for (const auto& [k, v] : entry.params) plan.fixed[k] = v;
        out.push_back({entry.name, search(data.train, registry.trainer(entry.algorithm), plan,
                                          data.transform)});
    }
    return out;
}

json to_json(const std::vector<TuneResult>& results) {
    json doc = json::array();
    for (const auto& r : results) {
        json board = json::array();
        for (const auto& t : r.result.leaderboard) board.push_back(to_json(t));
        doc.push_back(json{{"name", r.name}, {"best", to_json(r.result.best)}, {"leaderboard", board}});
    }
    return doc;
}

}  // namespace aefi
