#include "aefi/algorithms.hpp"

#include <cmath>

#include "aefi/error.hpp"

namespace aefi {

namespace {

std::size_t get_count(const Params& p, const std::string& name, std::int64_t fallback) {
    const auto v = get_int(p, name, fallback);
    if (v < 0) throw ValidationError("parameter '" + name + "' must be non-negative");
    return static_cast<std::size_t>(v);
}

Criterion criterion_from(const std::string& s) {
    if (s == "gini") return Criterion::gini;
    if (s == "info_gain" || s == "entropy") return Criterion::info_gain;
    throw ValidationError("unknown split criterion '" + s + "'");
}

KernelType kernel_from(const std::string& s) {
    if (s == "linear") return KernelType::linear;
    if (s == "polynomial" || s == "poly") return KernelType::polynomial;
    if (s == "rbf") return KernelType::rbf;
    throw ValidationError("unknown kernel '" + s + "'");
}

TrainedModel wrap(const std::string& algorithm, const Params& params, const Dataset& train,
                  ModelVariant model) {
    TrainedModel m;
    m.algorithm = algorithm;
    m.params = params;
    m.n_features = train.cols();
    m.model = std::move(model);
    return m;
}

ParamDomain grid(const std::string& name, std::vector<ParamValue> values) {
    return ParamDomain::finite(name, std::move(values));
}

}  // namespace

CartConfig cart_config_from(const Params& p, std::uint64_t seed) {
    CartConfig c;
    c.max_depth = get_count(p, "max_depth", 0);
    c.min_samples_leaf = get_count(p, "min_samples_leaf", 1);
    c.criterion = criterion_from(get_string(p, "criterion", "gini"));
    c.max_features = get_count(p, "max_features", 0);
    c.seed = seed;
    return c;
}

ForestConfig forest_config_from(const Params& p, std::size_t n_features, std::uint64_t seed) {
    ForestConfig f;
    f.trees = get_count(p, "trees", 100);
    // forests default to floor(sqrt(d)) features per split
    const auto sqrt_d = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n_features)))));
    f.max_features = get_count(p, "max_features", 0);
    if (f.max_features == 0) f.max_features = sqrt_d;
    f.max_features = std::min(f.max_features, n_features);
    f.per_class_k = get_count(p, "per_class_k", 0);
    f.tree.max_depth = get_count(p, "max_depth", 0);
    f.tree.min_samples_leaf = get_count(p, "min_samples_leaf", 1);
    f.tree.criterion = criterion_from(get_string(p, "criterion", "gini"));
    f.seed = seed;
    return f;
}

SvcConfig svc_config_from(const Params& p, std::size_t n_features, const std::string& prefix) {
    SvcConfig s;
    s.c = get_real(p, prefix + "c", 1.0);
    s.kernel.type = kernel_from(get_string(p, prefix + "kernel", "linear"));
    s.kernel.degree = static_cast<int>(get_int(p, prefix + "degree", 3));
    const double gamma = get_real(p, prefix + "gamma", 0.0);
    s.kernel.gamma = gamma > 0 ? gamma : 1.0 / static_cast<double>(std::max<std::size_t>(1, n_features));
    s.kernel.coef0 =
        get_real(p, prefix + "coef0", s.kernel.type == KernelType::polynomial ? 1.0 : 0.0);
    s.tol = get_real(p, prefix + "tol", 1e-3);
    s.max_iter = get_count(p, prefix + "max_iter", 1'000'000);
    s.validate();
    return s;
}

BoostConfig boost_config_from(const Params& p, std::uint64_t seed) {
    BoostConfig b;
    b.rounds = get_count(p, "rounds", 50);
    b.base.max_depth = get_count(p, "max_depth", 2);
    b.base.min_samples_leaf = get_count(p, "min_samples_leaf", 1);
    b.base.criterion = criterion_from(get_string(p, "criterion", "gini"));
    b.rus_minority_fraction = get_real(p, "rus_fraction", 0.5);
    b.max_retries_per_round = get_count(p, "max_retries", 10);
    b.seed = seed;
    return b;
}

EasyConfig easy_config_from(const Params& p, std::uint64_t seed) {
    EasyConfig e;
    e.subsets = get_count(p, "subsets", 10);
    e.rounds = get_count(p, "rounds", 10);
    e.base.max_depth = get_count(p, "max_depth", 2);
    e.base.min_samples_leaf = get_count(p, "min_samples_leaf", 1);
    e.seed = seed;
    return e;
}

AlgorithmRegistry AlgorithmRegistry::builtin() {
    AlgorithmRegistry r;
    SearchPlan plan;

    plan = {};
    plan.grid = {grid("criterion", {"gini", "info_gain"}), grid("max_depth", {std::int64_t{0}, std::int64_t{4}, std::int64_t{8}})};
    plan.random = {ParamDomain::int_range("min_samples_leaf", 1, 20)};
    plan.n_random = 2;
    r.add("decision_tree",
          [](const Dataset& d, const Params& p, std::uint64_t seed) {
              const std::vector<double> w(d.rows(), 1.0);
              return wrap("decision_tree", p, d, cart_fit(d, w, cart_config_from(p, seed)));
          },
          plan);

    plan = {};
    plan.grid = {grid("trees", {std::int64_t{50}}), grid("max_features", {std::int64_t{0}, std::int64_t{4}})};
    plan.random = {ParamDomain::int_range("min_samples_leaf", 1, 5)};
    plan.n_random = 2;
    r.add("random_forest",
          [](const Dataset& d, const Params& p, std::uint64_t seed) {
              return wrap("random_forest", p, d,
                          random_forest_fit(d, forest_config_from(p, d.cols(), seed)));
          },
          plan);
    r.add("brf",
          [](const Dataset& d, const Params& p, std::uint64_t seed) {
              return wrap("brf", p, d, brf_fit(d, forest_config_from(p, d.cols(), seed)));
          },
          plan);

    plan = {};
    plan.grid = {grid("kernel", {"linear"})};
    plan.random = {ParamDomain::log_real_range("c", 1e-2, 1e2)};
    plan.n_random = 4;
    r.add("svc",
          [](const Dataset& d, const Params& p, std::uint64_t seed) {
              SvcConfig cfg = svc_config_from(p, d.cols());
              cfg.seed = seed;
              return wrap("svc", p, d, svc_fit(d, cfg));
          },
          plan);

    plan = {};
    plan.grid = {grid("iterations", {std::int64_t{500}})};
    plan.random = {ParamDomain::log_real_range("l2", 1e-4, 1e-1)};
    plan.n_random = 3;
    r.add("logistic_regression",
          [](const Dataset& d, const Params& p, std::uint64_t) {
              LogRegConfig cfg;
              cfg.learning_rate = get_real(p, "learning_rate", cfg.learning_rate);
              cfg.iterations = get_count(p, "iterations", static_cast<std::int64_t>(cfg.iterations));
              cfg.l2 = get_real(p, "l2", cfg.l2);
              return wrap("logistic_regression", p, d, logreg_fit(d, cfg));
          },
          plan);

    plan = {};
    plan.grid = {grid("k", {std::int64_t{3}, std::int64_t{5}, std::int64_t{9}, std::int64_t{15}})};
    r.add("knn",
          [](const Dataset& d, const Params& p, std::uint64_t) {
              return wrap("knn", p, d, knn_fit(d, get_count(p, "k", 5)));
          },
          plan);

    plan = {};
    // stumps fit on balanced undersamples rarely beat a pseudo-loss of 1/2
    // on the full distribution, so the grid starts at depth 2
    plan.grid = {grid("max_depth", {std::int64_t{2}, std::int64_t{3}, std::int64_t{4}})};
    plan.random = {ParamDomain::int_range("rounds", 10, 60)};
    plan.n_random = 2;
    r.add("adaboost",
          [](const Dataset& d, const Params& p, std::uint64_t seed) {
              return wrap("adaboost", p, d, adaboost_fit(d, boost_config_from(p, seed)));
          },
          plan);

    SearchPlan rus_plan = plan;
    rus_plan.grid.push_back(grid("rus_fraction", {0.5}));
    r.add("rusboost",
          [](const Dataset& d, const Params& p, std::uint64_t seed) {
              return wrap("rusboost", p, d, rusboost_fit(d, boost_config_from(p, seed)));
          },
          rus_plan);

    plan = {};
    plan.grid = {grid("max_depth", {std::int64_t{1}, std::int64_t{2}})};
    plan.random = {ParamDomain::int_range("rounds", 5, 20)};
    plan.n_random = 2;
    plan.fixed = {{"subsets", std::int64_t{10}}};
    r.add("easy_ensemble",
          [](const Dataset& d, const Params& p, std::uint64_t seed) {
              return wrap("easy_ensemble", p, d, easy_ensemble_fit(d, easy_config_from(p, seed)));
          },
          plan);

    SearchPlan seeded_plan = rus_plan;
    seeded_plan.grid.push_back(grid("beta", {1.5, 2.0, 3.0}));
    seeded_plan.fixed = {{"svc_kernel", "polynomial"}, {"svc_degree", std::int64_t{3}}};
    r.add("rusboost_svc",
          [](const Dataset& d, const Params& p, std::uint64_t seed) {
              SeededRusConfig cfg;
              Params svc_defaults = p;
              svc_defaults.try_emplace("svc_kernel", "polynomial");
              cfg.svc = svc_config_from(svc_defaults, d.cols(), "svc_");
              cfg.svc.seed = derive_seed(seed, 1);
              cfg.beta = get_real(p, "beta", 2.0);
              cfg.boost = boost_config_from(p, seed);
              auto result = svc_seeded_rusboost_fit(d, cfg);
              TrainedModel m = wrap("rusboost_svc", p, d, std::move(result.model));
              m.seed_report = std::move(result.report);
              return m;
          },
          seeded_plan);
    return r;
}

void AlgorithmRegistry::add(const std::string& name, Trainer trainer, SearchPlan default_plan) {
    entries_[name] = Entry{std::move(trainer), std::move(default_plan)};
}

bool AlgorithmRegistry::contains(const std::string& name) const { return entries_.count(name) > 0; }

const Trainer& AlgorithmRegistry::trainer(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ValidationError("unknown algorithm '" + name + "'");
    return it->second.trainer;
}

const SearchPlan& AlgorithmRegistry::default_plan(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ValidationError("unknown algorithm '" + name + "'");
    return it->second.plan;
}

std::vector<std::string> AlgorithmRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

TrainedModel train_algorithm(const std::string& name, const Dataset& train, const Params& params,
                             std::uint64_t seed) {
    static const AlgorithmRegistry registry = AlgorithmRegistry::builtin();
    return registry.trainer(name)(train, params, seed);
}

}  // namespace aefi
