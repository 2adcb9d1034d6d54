#include "aefi/model.hpp"

#include <cmath>

#include "aefi/error.hpp"

namespace aefi {

namespace {

double logistic(double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

double predict_score(const TrainedModel& model, std::span<const double> row) {
    if (row.size() != model.n_features)
        throw PredictError("row has " + std::to_string(row.size()) + " features, model expects " +
                           std::to_string(model.n_features));
    return std::visit(
        overloaded{
            [&](const CartTree& m) { return cart_predict(m, row).p_minority; },
            [&](const ForestModel& m) { return forest_score(m, row); },
            [&](const BoostedModel& m) { return boosted_score(m, row); },
            [&](const EasyModel& m) { return easy_score(m, row); },
            [&](const SvcModel& m) { return logistic(svc_decision(m, row)); },
            [&](const LogRegModel& m) { return logreg_score(m, row); },
            [&](const KnnModel& m) { return knn_predict(m, row).p_minority; },
            [&](const ExternalModel& m) { return m.score(row); },
        },
        model.model);
}

int predict_label(const TrainedModel& model, std::span<const double> row, double threshold) {
    return predict_label(predict_score(model, row), threshold);
}

std::string family_name(const ModelVariant& model) {
    return std::visit(overloaded{
                          [](const CartTree&) { return "cart"; },
                          [](const ForestModel&) { return "forest"; },
                          [](const BoostedModel&) { return "boosted"; },
                          [](const EasyModel&) { return "easy"; },
                          [](const SvcModel&) { return "svc"; },
                          [](const LogRegModel&) { return "logistic"; },
                          [](const KnnModel&) { return "knn"; },
                          [](const ExternalModel&) { return "external"; },
                      },
                      model);
}

}  // namespace aefi
