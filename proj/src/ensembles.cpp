#include "aefi/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "aefi/error.hpp"
#include "aefi/parallel.hpp"

namespace aefi {

namespace {

void require_both_classes(const Dataset& data, const char* what) {
    if (data.count(0) == 0 || data.count(1) == 0)
        throw FitError(std::string(what) + " needs both classes in the training data");
}

// Label of the smaller class; label 1 on ties.
int minority_label(const Dataset& data) { return data.count(1) <= data.count(0) ? 1 : 0; }

std::vector<double> normalized(std::span<const double> weights) {
    double sum = 0;
    for (double w : weights) {
        if (!(w >= 0) || !std::isfinite(w))
            throw ValidationError("distribution entries must be finite and non-negative");
        sum += w;
    }
    if (!(sum > 0)) throw ValidationError("distribution sums to zero");
    std::vector<double> out(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) out[i] = weights[i] / sum;
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// RUS
// ---------------------------------------------------------------------------

RusSample rus(const Dataset& data, std::span<const double> distribution, double minority_fraction,
              Rng& rng) {
    if (!(minority_fraction > 0)) throw ValidationError("rus minority fraction must be positive");
    if (!distribution.empty() && distribution.size() != data.rows())
        throw ValidationError("distribution length differs from the dataset");
    const int min_label = minority_label(data);
    std::vector<std::size_t> minority, majority;
    for (std::size_t i = 0; i < data.rows(); ++i)
        (data.y[i] == min_label ? minority : majority).push_back(i);
    if (minority.empty() || majority.empty())
        throw FitError("random undersampling needs both classes present");

    std::size_t keep = majority.size();
    if (minority_fraction < 1.0) {
        const double limit = static_cast<double>(minority.size()) * (1.0 - minority_fraction) /
                             minority_fraction;
        keep = std::min(keep, static_cast<std::size_t>(std::floor(limit + 1e-9)));
    }

    RusSample out;
    if (keep == majority.size()) {
        out.rows.resize(data.rows());
        std::iota(out.rows.begin(), out.rows.end(), std::size_t{0});
    } else {
        out.rows = minority;
        for (std::size_t k : rng.sample_without_replacement(majority.size(), keep))
            out.rows.push_back(majority[k]);
        std::sort(out.rows.begin(), out.rows.end());
    }
    out.data = data.subset(out.rows);

    std::vector<double> restricted(out.rows.size(), 1.0);
    if (!distribution.empty()) {
        for (std::size_t i = 0; i < out.rows.size(); ++i) restricted[i] = distribution[out.rows[i]];
        if (std::accumulate(restricted.begin(), restricted.end(), 0.0) <= 0)
            std::fill(restricted.begin(), restricted.end(), 1.0);
    }
    out.distribution = normalized(restricted);
    return out;
}

// ---------------------------------------------------------------------------
// Boosting
// ---------------------------------------------------------------------------

void BoostConfig::validate(std::size_t n) const {
    if (rounds == 0) throw ValidationError("boosting needs at least one round");
    if (!(rus_minority_fraction > 0 && rus_minority_fraction <= 1))
        throw ValidationError("rus_minority_fraction must lie in (0, 1]");
    if (init_distribution) {
        if (init_distribution->size() != n)
            throw ValidationError("initial distribution length differs from the dataset");
        double sum = 0;
        for (double w : *init_distribution) {
            if (!(w >= 0)) throw ValidationError("initial distribution must be non-negative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw ValidationError("initial distribution must sum to 1");
    }
}

BoostedModel boost(const Dataset& data, const BoostConfig& config, const WeakLearner& weak,
                   std::span<const double> init) {
    const std::size_t n = data.rows();
    config.validate(n);
    require_both_classes(data, "boosting");

    std::vector<double> start;
    if (!init.empty()) {
        if (init.size() != n) throw ValidationError("initial distribution length differs from the dataset");
        start.assign(init.begin(), init.end());
    } else if (config.init_distribution) {
        start = *config.init_distribution;
    } else {
        start.assign(n, 1.0);  // normalized below, exactly 1/n
    }
    std::vector<double> dist = normalized(start);

    BoostedModel model;
    model.config = config;
    model.row_ids = data.ids;
    model.max_distribution = dist;
    if (config.record_history) model.history.push_back(dist);

    constexpr double kMinLoss = 1e-10;
    Rng rng(config.seed);
    std::vector<double> h_true(n);
    for (std::size_t t = 0; t < config.rounds; ++t) {
        CartTree tree;
        double loss = 1.0;
        for (std::size_t attempt = 0; attempt <= config.max_retries_per_round; ++attempt) {
            tree = weak(data, dist, rng);
            loss = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double p = cart_predict(tree, data.row(i)).p_minority;
                h_true[i] = data.y[i] == 1 ? p : 1.0 - p;
                const double h_wrong = 1.0 - h_true[i];
                loss += dist[i] * (1.0 - h_true[i] + h_wrong);
            }
            loss *= 0.5;
            if (loss < 0.5) break;
        }
        if (loss >= 0.5) {
            model.stopped_early = true;
            break;
        }
        const bool perfect = loss <= kMinLoss;
        if (perfect) loss = kMinLoss;
        const double alpha = loss / (1.0 - loss);
        for (std::size_t i = 0; i < n; ++i) {
            const double h_wrong = 1.0 - h_true[i];
            dist[i] *= std::pow(alpha, 0.5 * (1.0 + h_true[i] - h_wrong));
        }
        dist = normalized(dist);
        for (std::size_t i = 0; i < n; ++i)
            model.max_distribution[i] = std::max(model.max_distribution[i], dist[i]);
        if (config.record_history) model.history.push_back(dist);
        model.stages.push_back({std::move(tree), std::log(1.0 / alpha), loss});
        ++model.rounds_completed;
        if (perfect) {
            model.stopped_early = model.rounds_completed < config.rounds;
            break;
        }
    }
    if (model.stages.empty())
        throw FitError("boosting completed zero rounds (pseudo-loss never dropped below 0.5)");
    model.final_distribution = std::move(dist);
    return model;
}

WeakLearner rus_tree_learner(const CartConfig& base, double minority_fraction) {
    return [base, minority_fraction](const Dataset& data, std::span<const double> dist, Rng& rng) {
        CartConfig cfg = base;
        if (minority_fraction >= 1.0) {
            cfg.seed = rng.next_u64();
            return cart_fit(data, dist, cfg);
        }
        RusSample sample = rus(data, dist, minority_fraction, rng);
        cfg.seed = rng.next_u64();
        return cart_fit(sample.data, sample.distribution, cfg);
    };
}

BoostedModel rusboost_fit(const Dataset& data, const BoostConfig& config,
                          std::span<const double> init) {
    return boost(data, config, rus_tree_learner(config.base, config.rus_minority_fraction), init);
}

BoostedModel adaboost_fit(const Dataset& data, const BoostConfig& config,
                          std::span<const double> init) {
    BoostConfig plain = config;
    plain.rus_minority_fraction = 1.0;
    return rusboost_fit(data, plain, init);
}

double boosted_score(const BoostedModel& model, std::span<const double> row) {
    double num = 0, den = 0;
    for (const auto& s : model.stages) {
        num += s.weight * cart_predict(s.tree, row).p_minority;
        den += s.weight;
    }
    // stage weights are ln(1/alpha) > 0 since every recorded loss is < 0.5
    return den > 0 ? num / den : 0.5;
}

// ---------------------------------------------------------------------------
// EasyEnsemble
// ---------------------------------------------------------------------------

EasyModel easy_ensemble_fit(const Dataset& data, const EasyConfig& config) {
    if (config.subsets == 0 || config.rounds == 0)
        throw ValidationError("EasyEnsemble needs at least one subset and one round");
    require_both_classes(data, "EasyEnsemble");
    const int min_label = minority_label(data);
    std::vector<std::size_t> minority, majority;
    for (std::size_t i = 0; i < data.rows(); ++i)
        (data.y[i] == min_label ? minority : majority).push_back(i);

    EasyModel model;
    model.members.resize(config.subsets);
    parallel_for(
        config.subsets,
        [&](std::size_t m) {
            Rng rng(derive_seed(config.seed, m));
            std::vector<std::size_t> rows = minority;
            for (std::size_t k : rng.sample_without_replacement(majority.size(), minority.size()))
                rows.push_back(majority[k]);
            std::sort(rows.begin(), rows.end());
            const Dataset subset = data.subset(rows);
            BoostConfig bc;
            bc.rounds = config.rounds;
            bc.base = config.base;
            bc.rus_minority_fraction = 1.0;
            bc.seed = rng.next_u64();
            model.members[m] = adaboost_fit(subset, bc);
        },
        config.threads);
    return model;
}

double easy_signed_score(const EasyModel& model, std::span<const double> row) {
    double score = 0;
    for (const auto& member : model.members) {
        for (const auto& s : member.stages)
            score += s.weight * (cart_predict(s.tree, row).p_minority - 0.5);
    }
    return score;
}

double easy_score(const EasyModel& model, std::span<const double> row) {
    const double s = easy_signed_score(model, row);
    return s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
}

// ---------------------------------------------------------------------------
// Forests
// ---------------------------------------------------------------------------

std::vector<std::size_t> forest_sample_rows(const Dataset& data, const ForestConfig& config,
                                            std::size_t index) {
    const std::size_t n = data.rows();
    std::vector<std::size_t> rows;
    if (!config.bootstrap) {
        rows.resize(n);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        return rows;
    }
    Rng rng(derive_seed(config.seed, index));
    if (!config.balanced) {
        rows.reserve(n);
        for (std::size_t i = 0; i < n; ++i) rows.push_back(static_cast<std::size_t>(rng.below(n)));
        return rows;
    }
    const int min_label = minority_label(data);
    std::vector<std::size_t> minority, majority;
    for (std::size_t i = 0; i < n; ++i) (data.y[i] == min_label ? minority : majority).push_back(i);
    const std::size_t k = config.per_class_k ? config.per_class_k : minority.size();
    rows.reserve(2 * k);
    for (std::size_t i = 0; i < k; ++i) rows.push_back(minority[rng.below(minority.size())]);
    for (std::size_t i = 0; i < k; ++i) rows.push_back(majority[rng.below(majority.size())]);
    return rows;
}

namespace {

ForestModel fit_forest(const Dataset& data, const ForestConfig& config) {
    if (config.trees == 0) throw ValidationError("a forest needs at least one tree");
    if (data.rows() == 0) throw FitError("cannot fit a forest on an empty dataset");
    if (config.balanced) require_both_classes(data, "balanced random forest");
    ForestModel model;
    model.trees.resize(config.trees);
    parallel_for(
        config.trees,
        [&](std::size_t t) {
            const auto rows = forest_sample_rows(data, config, t);
            const std::vector<double> weights(rows.size(), 1.0);
            CartConfig cfg = config.tree;
            cfg.max_features = config.max_features;
            cfg.seed = derive_seed(derive_seed(config.seed, t), 1);
            model.trees[t] = cart_fit_rows(data, rows, weights, cfg);
        },
        config.threads);
    return model;
}

}  // namespace

ForestModel random_forest_fit(const Dataset& data, const ForestConfig& config) {
    ForestConfig cfg = config;
    cfg.balanced = false;
    return fit_forest(data, cfg);
}

ForestModel brf_fit(const Dataset& data, const ForestConfig& config) {
    ForestConfig cfg = config;
    cfg.balanced = true;
    return fit_forest(data, cfg);
}

double forest_score(const ForestModel& model, std::span<const double> row) {
    std::size_t votes = 0;
    for (const auto& t : model.trees) votes += static_cast<std::size_t>(cart_predict(t, row).label);
    return static_cast<double>(votes) / static_cast<double>(model.trees.size());
}

// ---------------------------------------------------------------------------
// SVC-seeded RUSBoost
// ---------------------------------------------------------------------------

std::vector<double> seeded_initial_distribution(const Dataset& data,
                                                std::span<const std::int64_t> support_ids,
                                                double beta) {
    if (!(beta >= 1.0)) throw ValidationError("support-vector weight multiplier must be >= 1");
    const std::set<std::int64_t> support(support_ids.begin(), support_ids.end());
    std::vector<double> weights(data.rows(), 1.0);
    for (std::size_t i = 0; i < data.rows(); ++i)
        if (support.count(data.ids[i])) weights[i] = beta;
    return normalized(weights);
}

SeededRusResult svc_seeded_rusboost_fit(const Dataset& data, const SeededRusConfig& config) {
    if (!(config.beta >= 1.0)) throw ValidationError("support-vector weight multiplier must be >= 1");
    const SvcModel svc = svc_fit(data, config.svc);
    SeededRusResult result;
    result.report.support_ids = support_indices(svc);
    result.report.beta = config.beta;
    result.report.support_count = result.report.support_ids.size();
    // boost() normalizes its start weights; handing it the raw multipliers keeps
    // beta = 1 bit-identical to the uniform start
    const std::set<std::int64_t> support(result.report.support_ids.begin(),
                                         result.report.support_ids.end());
    std::vector<double> start(data.rows(), 1.0);
    for (std::size_t i = 0; i < data.rows(); ++i)
        if (support.count(data.ids[i])) start[i] = config.beta;
    result.model = rusboost_fit(data, config.boost, start);
    return result;
}

int predict_label(double score, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ValidationError("threshold must lie in [0, 1]");
    return score >= threshold ? 1 : 0;
}

}  // namespace aefi
