#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include "aefi/ensembles.hpp"
#include "aefi/learners.hpp"
#include "aefi/params.hpp"

namespace aefi {

/// A learner implemented outside this library (e.g. a gradient-boosting
/// system plugged into the benchmark). Scores in [0, 1]; not serializable.
struct ExternalModel {
    std::string name;
    std::function<double(std::span<const double>)> score;
};

using ModelVariant = std::variant<CartTree, ForestModel, BoostedModel, EasyModel, SvcModel,
                                  LogRegModel, KnnModel, ExternalModel>;

struct TrainedModel {
    std::string algorithm;
    Params params;
    std::size_t n_features = 0;
    ModelVariant model;
    std::optional<SeedReport> seed_report;  // SVC-seeded RUSBoost only
};

/// Minority-class score in [0, 1], monotone in each family's decision value:
/// leaf fraction (tree), vote fraction (forest), normalized stage vote
/// (boosting), logistic of the signed score (EasyEnsemble, SVC), probability
/// (logistic regression), neighbour fraction (KNN).
double predict_score(const TrainedModel& model, std::span<const double> row);

int predict_label(const TrainedModel& model, std::span<const double> row, double threshold = 0.5);

/// "cart", "forest", "boosted", "easy", "svc", "logistic", "knn" or "external".
std::string family_name(const ModelVariant& model);

/// Fits a model on `train`. The seed drives every random choice of the fit.
using Trainer =
    std::function<TrainedModel(const Dataset& train, const Params& params, std::uint64_t seed)>;

}  // namespace aefi
