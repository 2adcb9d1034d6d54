#include <algorithm>
#include <cmath>
#include <numeric>

#include "aefi/error.hpp"
#include "aefi/learners.hpp"

namespace aefi {

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + e^z) without overflow
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double linear_form(std::span<const double> params, std::span<const double> row) {
    double z = params[row.size()];
    for (std::size_t j = 0; j < row.size(); ++j) z += params[j] * row[j];
    return z;
}

void check_params(const Dataset& data, std::span<const double> params) {
    if (data.rows() == 0) throw FitError("logistic regression needs at least one row");
    if (params.size() != data.cols() + 1)
        throw ValidationError("logistic parameters must be d weights plus a bias");
}

}  // namespace

double logreg_loss(const Dataset& data, std::span<const double> params, double l2) {
    check_params(data, params);
    double loss = 0;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const double z = linear_form(params, data.row(i));
        loss += softplus(z) - data.y[i] * z;
    }
    loss /= static_cast<double>(data.rows());
    double norm = 0;
    for (std::size_t j = 0; j < data.cols(); ++j) norm += params[j] * params[j];
    return loss + 0.5 * l2 * norm;
}

std::vector<double> logreg_gradient(const Dataset& data, std::span<const double> params,
                                    double l2) {
    check_params(data, params);
    const std::size_t d = data.cols();
    std::vector<double> g(d + 1, 0.0);
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const auto row = data.row(i);
        const double r = sigmoid(linear_form(params, row)) - data.y[i];
        for (std::size_t j = 0; j < d; ++j) g[j] += r * row[j];
        g[d] += r;
    }
    const double inv_n = 1.0 / static_cast<double>(data.rows());
    for (auto& v : g) v *= inv_n;
    for (std::size_t j = 0; j < d; ++j) g[j] += l2 * params[j];
    return g;
}

LogRegModel logreg_fit(const Dataset& data, const LogRegConfig& config) {
    if (data.rows() == 0) throw FitError("logistic regression needs at least one row");
    if (!(config.learning_rate > 0) || !(config.l2 >= 0))
        throw ValidationError("logistic regression needs learning_rate > 0 and l2 >= 0");
    std::vector<double> params(data.cols() + 1, 0.0);
    for (std::size_t it = 0; it < config.iterations; ++it) {
        const auto g = logreg_gradient(data, params, config.l2);
        for (std::size_t j = 0; j < params.size(); ++j) params[j] -= config.learning_rate * g[j];
    }
    LogRegModel model;
    model.bias = params.back();
    params.pop_back();
    model.weights = std::move(params);
    model.config = config;
    for (double w : model.weights)
        if (!std::isfinite(w)) throw FitError("logistic regression diverged");
    return model;
}

double logreg_score(const LogRegModel& model, std::span<const double> row) {
    if (row.size() != model.weights.size())
        throw PredictError("row has " + std::to_string(row.size()) +
                           " features, logistic model expects " +
                           std::to_string(model.weights.size()));
    double z = model.bias;
    for (std::size_t j = 0; j < row.size(); ++j) z += model.weights[j] * row[j];
    return sigmoid(z);
}

KnnModel knn_fit(const Dataset& data, std::size_t k) {
    if (k == 0) throw ValidationError("k must be at least 1");
    if (k > data.rows())
        throw ValidationError("k = " + std::to_string(k) + " exceeds the " +
                              std::to_string(data.rows()) + " training rows");
    return KnnModel{data.x, data.y, data.ids, k};
}

Prediction knn_predict(const KnnModel& model, std::span<const double> row) {
    if (row.size() != model.x.cols())
        throw PredictError("row has " + std::to_string(row.size()) + " features, KNN expects " +
                           std::to_string(model.x.cols()));
    if (model.k > model.y.size()) throw ValidationError("k exceeds the stored rows");
    std::vector<std::pair<double, std::size_t>> dist(model.y.size());
    for (std::size_t i = 0; i < model.y.size(); ++i) {
        const auto r = model.x.row(i);
        double d2 = 0;
        for (std::size_t j = 0; j < row.size(); ++j) d2 += (r[j] - row[j]) * (r[j] - row[j]);
        dist[i] = {d2, i};
    }
    auto closer = [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return model.ids[a.second] < model.ids[b.second];
    };
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(model.k), dist.end(), closer);
    std::size_t votes = 0;
    for (std::size_t i = 0; i < model.k; ++i) votes += model.y[dist[i].second] == 1 ? 1 : 0;
    const double fraction = static_cast<double>(votes) / static_cast<double>(model.k);
    return {2 * votes > model.k ? 1 : 0, fraction};
}

}  // namespace aefi
