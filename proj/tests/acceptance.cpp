// One PASS/FAIL line per acceptance criterion. `--pin` rewrites the pinned
// benchmark means in fixtures/b1_pinned.json from the current run.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

#include "aefi/analysis.hpp"
#include "aefi/bundle.hpp"
#include "aefi/ensembles.hpp"
#include "aefi/metrics.hpp"
#include "aefi/service.hpp"
#include "aefi/text.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace aefi;
using nlohmann::json;

namespace {

// Pinned tolerances
constexpr double kTableTol = 0.0005;       // three-decimal table cells
constexpr double kRateTableTol = 0.005;    // two-decimal table cells
constexpr double kRocTol = 1e-12;
constexpr double kNormTol = 1e-9;
constexpr double kAucSlack = 0.01;         // seeded RUSBoost may trail plain RUSBoost AUC by this much
constexpr double kPinnedTol = 1e-6;        // pinned benchmark means
constexpr double kAdaBoostAucLo = 0.65, kAdaBoostAucHi = 0.85;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void report(const std::string& name, const std::function<void(Outcome&)>& body) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ":" << o.detail.str() << " (" << format_fixed(secs, 1)
              << " s)" << std::endl;
}

std::string fx(double v, int digits = 4) { return format_fixed(v, digits); }

int run_cli(const std::string& args) {
    const std::string cmd = std::string(AEFI_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------

void metric_identities(Outcome& o) {
    const auto rf = compute_metrics({364, 6, 10, 3});
    o.require(std::abs(*rf.accuracy - 0.958) <= kTableTol, "RF accuracy");
    o.require(std::abs(*rf.precision - 0.973) <= kTableTol, "RF precision");
    o.require(std::abs(*rf.recall() - 0.984) <= kTableTol, "RF recall");
    o.require(std::abs(*rf.f1 - 0.978) <= kTableTol, "RF F1");
    const auto svc = compute_metrics({370, 0, 13, 0});
    o.require(std::abs(*svc.accuracy - 0.966) <= kTableTol, "SVC accuracy");
    o.require(std::abs(*svc.precision - 0.966) <= kTableTol, "SVC precision");
    o.require(*svc.recall() == 1.0, "SVC recall");

    struct Column {
        const char* name;
        double precision, recall, specificity, f1, g_mean;
    };
    const Column cols[] = {{"EasyEnsemble", 0.98, 0.67, 0.64, 0.80, 0.65},
                           {"BRF", 0.99, 0.66, 0.73, 0.79, 0.69},
                           {"RUSBoost", 0.98, 0.83, 0.55, 0.90, 0.67},
                           {"RUSBoost+SVC", 0.99, 0.82, 0.73, 0.90, 0.77}};
    double worst_point = 0;
    for (const auto& c : cols) {
        o.require(std::abs(*f1_from_rates(c.precision, c.recall) - c.f1) <= kRateTableTol,
                  std::string(c.name) + " F1");
        // rates are printed at two decimals: accept any G-mean reachable inside the rounding box
        const double lo = g_mean_from_rates(c.recall - 0.005, c.specificity - 0.005);
        const double hi = g_mean_from_rates(c.recall + 0.005, c.specificity + 0.005);
        o.require(c.g_mean >= lo - kRateTableTol && c.g_mean <= hi + kRateTableTol, std::string(c.name) + " G-mean");
        worst_point = std::max(worst_point, std::abs(g_mean_from_rates(c.recall, c.specificity) - c.g_mean));
    }
    o.detail << " RF row " << fx(*rf.accuracy, 3) << "/" << fx(*rf.precision, 3) << "/" << fx(*rf.recall(), 3) << "/"
             << fx(*rf.f1, 3) << ", SVC row " << fx(*svc.accuracy, 3) << "/" << fx(*svc.precision, 3) << "/"
             << fx(*svc.recall(), 3) << ", sqrt(0.82*0.73) = " << fx(g_mean_from_rates(0.82, 0.73))
             << ", largest point-estimate G-mean gap " << fx(worst_point) << " (RUSBoost column; within rounding)";
}

void auc_oracle(Outcome& o) {
    Rng rng(2024);
    std::size_t exact = 0, roc_ok = 0;
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.below(49);
        std::vector<double> s(n);
        std::vector<int> y(n);
        const bool coarse = trial % 2 == 0;  // half the instances with heavy ties
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = coarse ? static_cast<double>(rng.below(6)) / 5.0 : rng.uniform();
            y[i] = static_cast<int>(rng.below(2));
        }
        const std::size_t pos = rng.below(n);
        y[pos] = 1;
        y[(pos + 1 + rng.below(n - 1)) % n] = 0;  // both classes present
        const double a = auc(s, y);
        exact += a == oracle::pairwise_auc(s, y);
        const double gap = std::abs(trapezoid_area(roc_points(s, y)) - a);
        worst = std::max(worst, gap);
        roc_ok += gap <= kRocTol;
    }
    o.require(exact == 1000, "rank AUC differs from pairwise enumeration");
    o.require(roc_ok == 1000, "ROC trapezoid differs from rank AUC");
    o.detail << " " << exact << "/1000 exact, ROC max gap " << worst;
}

void svc_correctness(Outcome& o) {
    std::size_t kkt_ok = 0, compared = 0, agree = 0;
    for (std::uint64_t i = 0; i < 50; ++i) {
        Rng rng(500 + i);
        const std::size_t n = 6 + rng.below(40);
        const auto d = oracle::random_instance(n, 1 + rng.below(4), rng.uniform(0, 2), 500 + i);
        Kernel k;
        switch (i % 3) {
            case 0: k = {.type = KernelType::linear}; break;
            case 1: k = {.type = KernelType::polynomial, .degree = 3, .gamma = 0.5, .coef0 = 1}; break;
            default: k = {.type = KernelType::rbf, .gamma = 0.5};
        }
        const double c = std::pow(10.0, static_cast<double>(i % 4) - 1);  // 0.1 .. 100
        const SvcConfig cfg{.c = c, .kernel = k};
        const auto sol = svc_solve_dual(d, cfg);
        const auto why = oracle::kkt_violation(d, k, c, sol.alpha, sol.bias, 10 * cfg.tol);
        if (why.empty())
            ++kkt_ok;
        else
            o.detail << " [instance " << i << ": " << why << "]";
        if (n > 30) continue;
        ++compared;
        SvcConfig tight = cfg;
        tight.tol = 1e-6;
        const auto model = svc_fit(d, tight);
        const auto ref = oracle::dense_dual(d, k, c);
        bool all = true;
        Rng qrng(900 + i);
        std::vector<double> q(d.cols());
        for (std::size_t r = 0; r < d.rows() + 20; ++r) {
            std::span<const double> row;
            if (r < d.rows()) {
                row = d.row(r);
            } else {
                for (auto& v : q) v = qrng.normal() * 2;
                row = q;
            }
            all &= (svc_decision(model, row) > 0) == (oracle::dual_decision(ref, d, k, row) > 0);
        }
        agree += all;
    }
    o.require(kkt_ok == 50, "KKT violations");
    o.require(agree == compared, "predictions differ from the dense dual oracle");
    o.detail << " KKT " << kkt_ok << "/50, oracle agreement " << agree << "/" << compared << " (n <= 30)";
}

void boosting_identities(Outcome& o) {
    const auto d = synth_gaussian(400, 0.08, 5, 1.5, 11);
    BoostConfig cfg;
    cfg.rounds = 20;
    cfg.base.max_depth = 2;
    cfg.seed = 5;
    cfg.record_history = true;

    auto same = [](const BoostedModel& a, const BoostedModel& b) {
        if (a.stages.size() != b.stages.size() || a.final_distribution != b.final_distribution) return false;
        for (std::size_t t = 0; t < a.stages.size(); ++t)
            if (!(a.stages[t].tree == b.stages[t].tree) || a.stages[t].weight != b.stages[t].weight) return false;
        return true;
    };
    BoostConfig full = cfg;
    full.rus_minority_fraction = 1.0;
    o.require(same(rusboost_fit(d, full), adaboost_fit(d, cfg)), "rusboost(fraction 1) != adaboost");

    SeededRusConfig seeded;
    seeded.beta = 1.0;
    seeded.boost = cfg;
    o.require(same(svc_seeded_rusboost_fit(d, seeded).model, rusboost_fit(d, cfg)), "seeded(beta 1) != rusboost");

    double worst = 0;
    for (const auto& m : {adaboost_fit(d, cfg), rusboost_fit(d, cfg)})
        for (const auto& dist : m.history) worst = std::max(worst, std::abs(std::accumulate(dist.begin(), dist.end(), 0.0) - 1.0));
    o.require(worst <= kNormTol, "distribution not normalized");

    // eight points, hard stumps: misclassified rows must gain relative weight every round
    const auto eight = testing::make_dataset({{1}, {2}, {3}, {4}, {5}, {6}, {7}, {8}}, {0, 0, 0, 1, 0, 1, 1, 1});
    const double thresholds[] = {3.5, 4.5, 5.5, 2.5, 6.5};
    int round = 0;
    WeakLearner hard = [&](const Dataset&, std::span<const double>, Rng&) {
        CartTree t;
        t.n_features = 1;
        t.nodes = {CartNode{.feature = 0, .threshold = thresholds[round++ % 5], .left = 1, .right = 2},
                   CartNode{.weight_neg = 1, .weight_pos = 0}, CartNode{.weight_neg = 0, .weight_pos = 1}};
        return t;
    };
    BoostConfig hcfg;
    hcfg.rounds = 5;
    hcfg.record_history = true;
    const auto hm = boost(eight, hcfg, hard);
    bool invariant = hm.rounds_completed == 5;
    for (std::size_t t = 0; t < hm.stages.size(); ++t) {
        double min_wrong = 1e300, max_right = 0;
        for (std::size_t i = 0; i < 8; ++i) {
            const double ratio = hm.history[t + 1][i] / hm.history[t][i];
            if (cart_predict(hm.stages[t].tree, eight.row(i)).label != eight.y[i])
                min_wrong = std::min(min_wrong, ratio);
            else
                max_right = std::max(max_right, ratio);
        }
        invariant &= min_wrong > max_right;
    }
    o.require(invariant, "weight-ratio invariant");
    o.detail << " stage-exact identities hold, max |sum D_t - 1| = " << worst << ", ratio invariant over "
             << hm.rounds_completed << " rounds";
}

struct B1Result {
    std::map<std::string, double> auc, g_mean, minority_recall;
};

void benchmark_b1(Outcome& o, const BenchmarkSpec& spec, bool pin) {
    const auto report = run_benchmark(spec);
    const auto problems = verify_report(report);
    o.require(problems.empty(), "report verification");
    std::size_t failed_cells = 0;
    double worst_identity = 0;
    for (const auto& c : report.cells) {
        failed_cells += c.ok ? 0 : 1;
        if (c.ok && c.metrics.g_mean)
            worst_identity = std::max(worst_identity, std::abs(*c.metrics.g_mean * *c.metrics.g_mean -
                                                               *c.metrics.recall() * *c.metrics.specificity()));
    }
    o.require(worst_identity <= 1e-9, "g_mean^2 != recall*specificity");
    o.require(failed_cells == 0, std::to_string(failed_cells) + " failed cells");

    const auto& ada = report.summary_for("adaboost");
    const auto& rus = report.summary_for("rusboost");
    const auto& seeded = report.summary_for("rusboost_svc");
    const auto& rf = report.summary_for("random_forest");
    const auto& brf = report.summary_for("brf");
    o.require(*ada.auc >= kAdaBoostAucLo && *ada.auc <= kAdaBoostAucHi, "AdaBoost AUC outside the calibration window");
    o.require(*rus.auc > *ada.auc, "(a) RUSBoost AUC <= AdaBoost AUC");
    o.require(*brf.minority_recall > *rf.minority_recall, "(b) BRF minority recall <= RF");
    o.require(*seeded.g_mean >= *rus.g_mean, "(c) seeded G-mean < RUSBoost G-mean");
    o.require(*seeded.auc >= *rus.auc - kAucSlack, "(c) seeded AUC more than 0.01 below RUSBoost");

    const auto pinned_path = std::filesystem::path(AEFI_FIXTURES_DIR) / "b1_pinned.json";
    json observed = json::object();
    for (const auto& s : report.summary) {
        json row = json::object();
        row["auc"] = s.auc ? json(*s.auc) : json(nullptr);
        row["g_mean"] = s.g_mean ? json(*s.g_mean) : json(nullptr);
        row["minority_recall"] = s.minority_recall ? json(*s.minority_recall) : json(nullptr);
        observed[s.name] = row;
    }
    if (pin) {
        testing::write_file(pinned_path, observed.dump(2) + "\n");
        o.detail << " pinned means written;";
    } else if (std::filesystem::exists(pinned_path)) {
        const auto pinned = json::parse(testing::read_file(pinned_path));
        double drift = 0;
        for (const auto& [name, row] : pinned.items())
            for (const auto& [metric, value] : row.items())
                if (!value.is_null() && !observed[name][metric].is_null())
                    drift = std::max(drift, std::abs(value.get<double>() - observed[name][metric].get<double>()));
        o.require(drift <= kPinnedTol, "means drifted from the pinned values");
        o.detail << " pinned drift " << drift << ";";
    }
    o.detail << " AdaBoost AUC " << fx(*ada.auc) << ", (a) RUSBoost " << fx(*rus.auc) << " > " << fx(*ada.auc)
             << ", (b) minority recall BRF " << fx(*brf.minority_recall) << " > RF " << fx(*rf.minority_recall)
             << ", (c) G-mean " << fx(*seeded.g_mean) << " >= " << fx(*rus.g_mean) << ", AUC " << fx(*seeded.auc)
             << " >= " << fx(*rus.auc - kAucSlack) << "; " << report.cells.size() << " cells";
}

void overlap_property(Outcome& o, const BenchmarkSpec& spec) {
    const auto r = run_overlap(spec, 10);
    o.require(r.runs.size() == 10, "run count");
    o.require(r.mean >= 2 * r.baseline, "mean overlap below twice the random baseline");
    o.detail << " mean " << fx(r.mean) << " >= 2 x " << fx(r.baseline) << " (k " << r.k << ", n " << r.n
             << "); reference only: " << fx(kReferenceOverlap, 3);
}

void determinism(Outcome& o) {
    const auto dir = testing::scratch_dir("acceptance_determinism");
    const auto spec = dir / "spec.json";
    testing::write_file(spec, R"({
      "data": {"kind": "aefi", "n": 500, "minority_fraction": 0.08},
      "split": {"test_fraction": 0.29, "stratified": true},
      "algorithms": [
        {"name": "brf", "algorithm": "brf", "params": {"trees": 20}},
        {"name": "rusboost_svc", "algorithm": "rusboost_svc", "tuned": true,
         "plan": {"grid": {"beta": [1.5, 2]}, "random": {}, "n_random": 0, "folds": 3, "fixed": {"rounds": 10}}}
      ],
      "seeds": [3, 4],
      "overlap": {"svc": {"kernel": "polynomial", "degree": 3, "c": 1}, "boost": {"rounds": 10}, "runs": 2}
    })");
    auto q = [](const std::filesystem::path& p) { return "'" + p.string() + "'"; };
    std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pairs;
    for (const char* out : {"a", "b"}) {
        o.require(run_cli("bench run --spec " + q(spec) + " --out " + q(dir / out) + (out[0] == 'b' ? " --threads 2" : "")) == 0, "bench run");
        o.require(run_cli("bench overlap --spec " + q(spec) + " --runs 2 --out " + q(dir / out)) == 0, "bench overlap");
        o.require(run_cli("data synth --kind aefi --n 300 --seed 9 --out " + q(dir / out / "data.csv")) == 0, "data synth");
        o.require(run_cli("train --algo rusboost_svc --data " + q(dir / "a" / "data.csv") + " --seed 2 --params '{\"rounds\": 8}' --out " +
                          q(dir / out / "bundle.json")) == 0,
                  "train");
    }
    std::size_t files = 0;
    for (const char* f : {"report.json", "report.csv", "report.md", "overlap.json", "overlap.md", "data.csv", "bundle.json"}) {
        const auto a = testing::read_file(dir / "a" / f);
        o.require(!a.empty() && a == testing::read_file(dir / "b" / f), std::string(f) + " differs");
        ++files;
    }
    o.detail << " " << files << " files byte-identical across two runs";
}

void serialization(Outcome& o) {
    const auto schema = RecordSchema::aefi_default();
    const auto probe = clean(synth_aefi(100, 0.1, schema, 4242), schema).records;
    std::size_t families = 0;
    for (const auto& [name, params] : testing::quick_algorithms()) {
        const auto bundle = testing::trained_bundle(name, params, 8);
        const auto back = deserialize_model(serialize_model(bundle));
        std::size_t agree = 0;
        for (const auto& r : probe) agree += bundle.score(r) == back.score(r);
        o.require(agree == probe.size(), name + " scores changed");
        o.require(serialize_model(back) == serialize_model(bundle), name + " bytes changed");
        ++families;
    }
    o.detail << " " << families << " algorithms (7 model families), 100 rows each";
}

void service_contract(Outcome& o) {
    const auto dir = testing::scratch_dir("acceptance_service");
    ServiceCore core(RecordSchema::aefi_default(), dir / "records.jsonl");
    core.set_bundle(testing::trained_bundle("rusboost_svc", {{"rounds", std::int64_t{10}}}, 3));
    json features = json::object();
    for (const auto& [k, v] : testing::form_example().values) features[k] = *v;

    const auto ok = core.predict(json{{"features", features}});
    o.require(ok.status == 200, "valid predict status");
    if (ok.status == 200) {
        const bool yes = ok.body["label"] == "Yes";
        o.require(yes == (ok.body["score"].get<double>() >= ok.body["threshold"].get<double>()), "label/score mismatch");
    }
    auto missing = features;
    missing.erase("gender");
    const auto bad = core.predict(json{{"features", missing}});
    o.require(bad.status == 422 && bad.body["fields"][0]["field"] == "gender", "422 naming gender");

    std::vector<std::int64_t> ids(100);
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < 100; ++t)
        workers.emplace_back([&, t] { ids[t] = core.add_record(json{{"features", features}}).body["id"]; });
    for (auto& w : workers) w.join();
    std::sort(ids.begin(), ids.end());
    bool consecutive = true;
    for (std::size_t i = 0; i < 100; ++i) consecutive &= ids[i] == static_cast<std::int64_t>(i + 1);
    const auto text = testing::read_file(dir / "records.jsonl");
    o.require(consecutive, "ids not 1..100");
    o.require(std::count(text.begin(), text.end(), '\n') == 100, "line count");
    o.detail << " predict " << ok.status << " (label " << ok.body.value("label", "?") << "), missing gender "
             << bad.status << ", 100 concurrent appends -> ids 1..100";
}

}  // namespace

int main(int argc, char** argv) {
    const bool pin = argc > 1 && std::string(argv[1]) == "--pin";
    const auto spec = BenchmarkSpec::load(std::filesystem::path(AEFI_FIXTURES_DIR) / "b1.json");

    report("metric identities", metric_identities);
    report("auc oracle equivalence", auc_oracle);
    report("svc correctness", svc_correctness);
    report("boosting identities", boosting_identities);
    report("benchmark B1", [&](Outcome& o) { benchmark_b1(o, spec, pin); });
    report("overlap property", [&](Outcome& o) { overlap_property(o, spec); });
    report("determinism", determinism);
    report("serialization", serialization);
    report("service contract", service_contract);

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
