#include "aefi/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "aefi/error.hpp"
#include "aefi/metrics.hpp"
#include "aefi/parallel.hpp"

namespace aefi {

using nlohmann::json;

ParamDomain ParamDomain::finite(std::string name, std::vector<ParamValue> values) {
    ParamDomain d;
    d.name = std::move(name);
    d.values = std::move(values);
    return d;
}

ParamDomain ParamDomain::int_range(std::string name, std::int64_t lo, std::int64_t hi) {
    ParamDomain d;
    d.name = std::move(name);
    d.shape = Shape::int_range;
    d.lo = static_cast<double>(lo);
    d.hi = static_cast<double>(hi);
    return d;
}

ParamDomain ParamDomain::real_range(std::string name, double lo, double hi) {
    ParamDomain d;
    d.name = std::move(name);
    d.shape = Shape::real_range;
    d.lo = lo;
    d.hi = hi;
    return d;
}

ParamDomain ParamDomain::log_real_range(std::string name, double lo, double hi) {
    ParamDomain d = real_range(std::move(name), lo, hi);
    d.shape = Shape::log_real_range;
    return d;
}

void ParamDomain::validate() const {
    if (name.empty()) throw ValidationError("parameter domain without a name");
    if (shape == Shape::finite) {
        if (values.empty()) throw ValidationError("domain '" + name + "' has no values");
        return;
    }
    if (!(lo < hi)) throw ValidationError("domain '" + name + "' needs lo < hi");
    if (shape == Shape::log_real_range && !(lo > 0))
        throw ValidationError("log domain '" + name + "' needs lo > 0");
}

ParamValue ParamDomain::draw(Rng& rng) const {
    switch (shape) {
        case Shape::int_range: {
            const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
            return static_cast<std::int64_t>(lo) + static_cast<std::int64_t>(rng.below(span));
        }
        case Shape::real_range: return rng.uniform(lo, hi);
        case Shape::log_real_range:
            return std::exp(rng.uniform(std::log(lo), std::log(hi)));
        case Shape::finite: break;
    }
    throw ValidationError("finite domain '" + name + "' is enumerated, not drawn");
}

void SearchPlan::validate() const {
    if (grid.empty() && random.empty() && fixed.empty())
        throw ValidationError("search plan is empty");
    for (const auto& d : grid) {
        d.validate();
        if (d.shape != ParamDomain::Shape::finite)
            throw ValidationError("grid domain '" + d.name + "' must be a finite list");
    }
    for (const auto& d : random) {
        d.validate();
        if (d.shape == ParamDomain::Shape::finite)
            throw ValidationError("random domain '" + d.name + "' must be a range");
    }
    if (!random.empty() && n_random == 0)
        throw ValidationError("n_random must be at least 1 when random domains exist");
    if (folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
}

json SearchPlan::to_json() const {
    json g = json::object(), r = json::object();
    for (const auto& d : grid) {
        json vals = json::array();
        for (const auto& v : d.values) vals.push_back(aefi::to_json(v));
        g[d.name] = std::move(vals);
    }
    for (const auto& d : random) {
        const char* key = d.shape == ParamDomain::Shape::int_range    ? "int"
                          : d.shape == ParamDomain::Shape::real_range ? "real"
                                                                      : "log";
        r[d.name] = json{{key, {d.lo, d.hi}}};
    }
    return json{{"grid", g},   {"random", r},           {"n_random", n_random},
                {"folds", folds}, {"seed", seed}, {"fixed", aefi::to_json(fixed)}};
}

SearchPlan SearchPlan::from_json(const json& doc) {
    SearchPlan plan;
    try {
        if (doc.contains("grid")) {
            for (const auto& [name, vals] : doc.at("grid").items()) {
                std::vector<ParamValue> values;
                for (const auto& v : vals) values.push_back(param_from_json(v));
                plan.grid.push_back(ParamDomain::finite(name, std::move(values)));
            }
        }
        if (doc.contains("random")) {
            for (const auto& [name, spec] : doc.at("random").items()) {
                if (spec.contains("int")) {
                    const auto& r = spec.at("int");
                    plan.random.push_back(
                        ParamDomain::int_range(name, r.at(0).get<std::int64_t>(), r.at(1).get<std::int64_t>()));
                } else if (spec.contains("real")) {
                    const auto& r = spec.at("real");
                    plan.random.push_back(ParamDomain::real_range(name, r.at(0), r.at(1)));
                } else if (spec.contains("log")) {
                    const auto& r = spec.at("log");
                    plan.random.push_back(ParamDomain::log_real_range(name, r.at(0), r.at(1)));
                } else {
                    throw ValidationError("random domain '" + name + "' needs int, real or log");
                }
            }
        }
        plan.n_random = doc.value("n_random", plan.n_random);
        plan.folds = doc.value("folds", plan.folds);
        plan.seed = doc.value("seed", plan.seed);
        if (doc.contains("fixed")) plan.fixed = params_from_json(doc.at("fixed"));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed search plan: ") + e.what());
    }
    plan.validate();
    return plan;
}

std::vector<Params> enumerate_candidates(const SearchPlan& plan, Rng& rng) {
    plan.validate();
    std::vector<Params> grid_points{plan.fixed};
    for (const auto& d : plan.grid) {
        std::vector<Params> expanded;
        expanded.reserve(grid_points.size() * d.values.size());
        for (const auto& p : grid_points) {
            for (const auto& v : d.values) {
                Params q = p;
                q[d.name] = v;
                expanded.push_back(std::move(q));
            }
        }
        grid_points = std::move(expanded);
    }
    if (plan.random.empty()) return grid_points;

    std::vector<Params> draws(plan.n_random);
    for (auto& draw : draws)
        for (const auto& d : plan.random) draw[d.name] = d.draw(rng);

    std::vector<Params> out;
    out.reserve(grid_points.size() * draws.size());
    for (const auto& g : grid_points) {
        for (const auto& r : draws) {
            Params p = g;
            for (const auto& [k, v] : r) p[k] = v;
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::vector<SplitIndices> stratified_folds(std::span<const int> labels, std::size_t k,
                                           std::uint64_t seed) {
    if (k < 2) throw ValidationError("cross-validation needs at least 2 folds");
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> members(k);
    for (int cls : {0, 1}) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) pool.push_back(i);
        if (pool.size() < k)
            throw SplitError("class " + std::to_string(cls) + " has " + std::to_string(pool.size()) +
                             " rows, fewer than the " + std::to_string(k) + " folds");
        rng.shuffle(pool);
        for (std::size_t i = 0; i < pool.size(); ++i) members[i % k].push_back(pool[i]);
    }
    std::vector<SplitIndices> folds(k);
    for (std::size_t f = 0; f < k; ++f) {
        folds[f].test = members[f];
        std::sort(folds[f].test.begin(), folds[f].test.end());
        for (std::size_t g = 0; g < k; ++g)
            if (g != f) folds[f].train.insert(folds[f].train.end(), members[g].begin(), members[g].end());
        std::sort(folds[f].train.begin(), folds[f].train.end());
    }
    return folds;
}

Trial cross_validate(const Dataset& data, const Trainer& trainer, const Params& params,
                     std::size_t k, std::uint64_t seed, const FoldTransform& transform) {
    const auto folds = stratified_folds(data.y, k, seed);
    Trial trial;
    trial.params = params;
    for (std::size_t f = 0; f < k; ++f) {
        Dataset train, test;
        if (transform) {
            std::tie(train, test) = transform(data, folds[f].train, folds[f].test);
        } else {
            train = data.subset(folds[f].train);
            test = data.subset(folds[f].test);
        }
        const TrainedModel model = trainer(train, params, derive_seed(seed, f + 1));
        std::vector<double> scores(test.rows());
        for (std::size_t i = 0; i < test.rows(); ++i) scores[i] = predict_score(model, test.row(i));
        trial.fold_aucs.push_back(auc(scores, test.y));
    }
    double sum = 0;
    for (double a : trial.fold_aucs) sum += a;
    trial.mean_auc = sum / static_cast<double>(k);
    return trial;
}

SearchResult search(const Dataset& data, const Trainer& trainer, const SearchPlan& plan,
                    const FoldTransform& transform) {
    Rng rng(plan.seed);
    const auto candidates = enumerate_candidates(plan, rng);
    const std::uint64_t cv_seed = derive_seed(plan.seed, 1);
    std::vector<Trial> trials(candidates.size());
    std::vector<std::exception_ptr> errors(candidates.size());
    parallel_for(
        candidates.size(),
        [&](std::size_t c) {
            try {
                trials[c] = cross_validate(data, trainer, candidates[c], plan.folds, cv_seed, transform);
            } catch (const FitError& e) {
                trials[c] = Trial{};
                trials[c].params = candidates[c];
                trials[c].error = e.what();
                errors[c] = std::current_exception();
            }
            trials[c].candidate = c;
        },
        plan.threads);
    if (std::all_of(trials.begin(), trials.end(), [](const Trial& t) { return t.failed(); }))
        std::rethrow_exception(errors.front());
    std::stable_sort(trials.begin(), trials.end(), [](const Trial& a, const Trial& b) {
        if (a.failed() != b.failed()) return b.failed();
        return a.mean_auc > b.mean_auc;
    });
    SearchResult result;
    result.best = trials.front();
    result.leaderboard = std::move(trials);
    return result;
}

json to_json(const Trial& trial) {
    return json{{"params", to_json(trial.params)},
                {"fold_aucs", trial.fold_aucs},
                {"mean_auc", trial.mean_auc},
                {"candidate", trial.candidate},
                {"error", trial.failed() ? json(trial.error) : json(nullptr)}};
}

}  // namespace aefi
