#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "aefi/dataset.hpp"
#include "aefi/learners.hpp"
#include "aefi/random.hpp"

namespace aefi {

// ---------------------------------------------------------------------------
// Random undersampling
// ---------------------------------------------------------------------------

struct RusSample {
    Dataset data;
    std::vector<double> distribution;  // restricted weights, renormalized
    std::vector<std::size_t> rows;     // source rows, ascending
};

/// Keeps every row of the smaller class and removes majority rows uniformly
/// at random until minority / (minority + majority) >= minority_fraction.
/// A fraction of 1 (or more) disables sampling.
RusSample rus(const Dataset& data, std::span<const double> distribution,
              double minority_fraction, Rng& rng);

// ---------------------------------------------------------------------------
// Boosting
// ---------------------------------------------------------------------------

struct BoostConfig {
    std::size_t rounds = 50;
    CartConfig base{.max_depth = 3};
    std::optional<std::vector<double>> init_distribution;  // nullopt = uniform
    double rus_minority_fraction = 0.5;
    std::size_t max_retries_per_round = 10;
    std::uint64_t seed = 0;
    bool record_history = false;  // keep D_1 .. D_{T+1} on the model

    void validate(std::size_t n) const;
};

struct BoostStage {
    CartTree tree;
    double weight = 0;       // ln(1 / alpha_t)
    double pseudo_loss = 0;  // epsilon_t after clamping
};

struct BoostedModel {
    std::vector<BoostStage> stages;
    std::vector<double> final_distribution;  // D_{T+1}, one entry per training row
    std::vector<double> max_distribution;    // per-row max over D_1 .. D_{T+1}
    std::vector<std::int64_t> row_ids;       // training row ids, parallel to the above
    std::vector<std::vector<double>> history;
    std::size_t rounds_completed = 0;
    bool stopped_early = false;
    BoostConfig config;
};

/// Fits the weak learner for one round. Receives the full training set,
/// the current distribution D_t and the boosting generator.
using WeakLearner =
    std::function<CartTree(const Dataset& data, std::span<const double> distribution, Rng& rng)>;

/// Binary AdaBoost.M2 around an arbitrary weak learner. `init` overrides
/// config.init_distribution when non-empty.
BoostedModel boost(const Dataset& data, const BoostConfig& config, const WeakLearner& weak,
                   std::span<const double> init = {});

/// The weak learner used by RUSBoost: undersample with D_t, fit a CART on
/// the sample with the renormalized sample distribution.
WeakLearner rus_tree_learner(const CartConfig& base, double minority_fraction);

BoostedModel adaboost_fit(const Dataset& data, const BoostConfig& config,
                          std::span<const double> init = {});
BoostedModel rusboost_fit(const Dataset& data, const BoostConfig& config,
                          std::span<const double> init = {});

/// Weighted minority vote: sum_t w_t h_t(x, 1) / sum_t w_t.
double boosted_score(const BoostedModel& model, std::span<const double> row);

// ---------------------------------------------------------------------------
// EasyEnsemble
// ---------------------------------------------------------------------------

struct EasyConfig {
    std::size_t subsets = 10;
    std::size_t rounds = 10;
    CartConfig base{.max_depth = 3};
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct EasyModel {
    std::vector<BoostedModel> members;
};

EasyModel easy_ensemble_fit(const Dataset& data, const EasyConfig& config);

/// sum over members of (sum_j w_j h_j(x, 1) - 1/2 sum_j w_j); positive means minority.
double easy_signed_score(const EasyModel& model, std::span<const double> row);
/// Logistic squashing of the signed score.
double easy_score(const EasyModel& model, std::span<const double> row);

// ---------------------------------------------------------------------------
// Forests
// ---------------------------------------------------------------------------

struct ForestConfig {
    std::size_t trees = 100;
    std::size_t max_features = 0;  // per split; 0 = all features
    bool balanced = false;
    std::size_t per_class_k = 0;   // balanced mode; 0 = minority class size
    bool bootstrap = true;         // false trains every tree on the rows as given
    CartConfig tree{};             // depth / leaf size / criterion; unbounded by default
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct ForestModel {
    std::vector<CartTree> trees;
};

/// Training multiset of tree `index` (row indices, repeats allowed).
std::vector<std::size_t> forest_sample_rows(const Dataset& data, const ForestConfig& config,
                                            std::size_t index);

ForestModel random_forest_fit(const Dataset& data, const ForestConfig& config);
ForestModel brf_fit(const Dataset& data, const ForestConfig& config);

/// Fraction of trees voting minority.
double forest_score(const ForestModel& model, std::span<const double> row);

// ---------------------------------------------------------------------------
// SVC-seeded RUSBoost
// ---------------------------------------------------------------------------

struct SeededRusConfig {
    SvcConfig svc;
    double beta = 2.0;
    BoostConfig boost;
};

struct SeedReport {
    std::vector<std::int64_t> support_ids;
    double beta = 1;
    std::size_t support_count = 0;
};

struct SeededRusResult {
    BoostedModel model;
    SeedReport report;
};

/// D_1(i) proportional to beta for rows whose id is in `support_ids`, 1 otherwise.
std::vector<double> seeded_initial_distribution(const Dataset& data,
                                                std::span<const std::int64_t> support_ids,
                                                double beta);

SeededRusResult svc_seeded_rusboost_fit(const Dataset& data, const SeededRusConfig& config);

// ---------------------------------------------------------------------------

/// score >= threshold -> 1. Throws ValidationError for thresholds outside [0, 1].
int predict_label(double score, double threshold = 0.5);

}  // namespace aefi
