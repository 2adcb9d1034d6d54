#pragma once

#include <map>
#include <string>
#include <vector>

#include "aefi/model.hpp"
#include "aefi/tuning.hpp"

namespace aefi {

/// Named trainers available to the CLI, the benchmark and the tuner.
///
/// Built-in names: decision_tree, random_forest, brf, svc,
/// logistic_regression, knn, adaboost, rusboost, easy_ensemble,
/// rusboost_svc. Other learners (e.g. external gradient-boosting systems)
/// are plugged in with add(); their models score through ExternalModel.
class AlgorithmRegistry {
public:
    static AlgorithmRegistry builtin();

    void add(const std::string& name, Trainer trainer, SearchPlan default_plan = {});
    bool contains(const std::string& name) const;
    const Trainer& trainer(const std::string& name) const;
    /// Shipped tuning grid for `name` (folds and seed left at plan defaults).
    const SearchPlan& default_plan(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    struct Entry {
        Trainer trainer;
        SearchPlan plan;
    };
    std::map<std::string, Entry> entries_;
};

TrainedModel train_algorithm(const std::string& name, const Dataset& train, const Params& params,
                             std::uint64_t seed);

// Parameter decoding shared by the trainers and the tests.
CartConfig cart_config_from(const Params& params, std::uint64_t seed);
ForestConfig forest_config_from(const Params& params, std::size_t n_features, std::uint64_t seed);
SvcConfig svc_config_from(const Params& params, std::size_t n_features, const std::string& prefix = "");
BoostConfig boost_config_from(const Params& params, std::uint64_t seed);
EasyConfig easy_config_from(const Params& params, std::uint64_t seed);

}  // namespace aefi
