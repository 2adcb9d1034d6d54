#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "aefi/dataset.hpp"

namespace aefi {

/// Label plus the probability of the minority class (label 1).
struct Prediction {
    int label = 0;
    double p_minority = 0;
};

// ---------------------------------------------------------------------------
// CART
// ---------------------------------------------------------------------------

enum class Criterion { gini, info_gain };

struct CartConfig {
    std::size_t max_depth = 0;         // 0 = grow until pure
    std::size_t min_samples_leaf = 1;  // counted in training entries
    Criterion criterion = Criterion::gini;
    std::size_t max_features = 0;      // features drawn per node; 0 = all
    std::uint64_t seed = 0;
    bool operator==(const CartConfig&) const = default;
};

/// Every node keeps the weighted class mass that reached it, so leaves can
/// report weighted class fractions and tests can audit impurity decrease.
struct CartNode {
    int feature = -1;  // -1 for leaves
    double threshold = 0;
    int left = -1;
    int right = -1;
    double weight_neg = 0;
    double weight_pos = 0;

    bool is_leaf() const { return feature < 0; }
    double p_minority() const { return weight_pos / (weight_neg + weight_pos); }
    bool operator==(const CartNode&) const = default;
};

struct CartTree {
    std::vector<CartNode> nodes;  // nodes[0] is the root
    std::size_t n_features = 0;

    std::size_t depth() const;
    std::size_t leaf_count() const;
    /// Index of the leaf that `row` is routed to (x[feature] <= threshold goes left).
    std::size_t leaf_index(std::span<const double> row) const;

    bool operator==(const CartTree&) const = default;
};

/// Gini impurity 1 - sum p_c^2 of a two-class weight pair.
double gini(double weight_neg, double weight_pos);
/// Shannon entropy in bits of a two-class weight pair.
double entropy(double weight_neg, double weight_pos);
double impurity(Criterion criterion, double weight_neg, double weight_pos);

CartTree cart_fit(const Dataset& data, std::span<const double> sample_weights,
                  const CartConfig& config);

/// Fits on a multiset of rows (indices may repeat) with one weight per entry.
CartTree cart_fit_rows(const Dataset& data, std::span<const std::size_t> rows,
                       std::span<const double> weights, const CartConfig& config);

/// Leaf label is 1 only when the minority mass strictly exceeds one half.
Prediction cart_predict(const CartTree& tree, std::span<const double> row);

// ---------------------------------------------------------------------------
// Support vector classifier
// ---------------------------------------------------------------------------

enum class KernelType { linear, polynomial, rbf };

struct Kernel {
    KernelType type = KernelType::linear;
    int degree = 3;
    double gamma = 1.0;
    double coef0 = 0.0;

    double operator()(std::span<const double> a, std::span<const double> b) const;
    void validate() const;
    bool operator==(const Kernel&) const = default;
};

struct SvcConfig {
    double c = 1.0;
    Kernel kernel;
    double tol = 1e-3;
    std::size_t max_iter = 1'000'000;
    double sv_threshold = 1e-8;
    std::uint64_t seed = 0;  // the solver is deterministic; kept for provenance

    void validate() const;
    bool operator==(const SvcConfig&) const = default;
};

/// Complete dual solution over all training rows.
struct SvcSolution {
    std::vector<double> alpha;
    double bias = 0;
    bool converged = false;
    std::size_t iterations = 0;
};

/// Soft-margin dual solved by pairwise coordinate steps on the maximal
/// violating pair. Label 1 maps to +1, label 0 to -1.
SvcSolution svc_solve_dual(const Dataset& data, const SvcConfig& config);

struct SvcModel {
    SvcConfig config;
    Matrix support;                        // rows with alpha > sv_threshold
    std::vector<double> alpha;             // alpha_i of each support row
    std::vector<double> dual_coef;         // alpha_i * y_i
    std::vector<std::int64_t> support_ids; // ascending
    double bias = 0;
    bool converged = false;
    std::size_t iterations = 0;
};

SvcModel svc_fit(const Dataset& data, const SvcConfig& config);
double svc_decision(const SvcModel& model, std::span<const double> row);
std::vector<std::int64_t> support_indices(const SvcModel& model);

// ---------------------------------------------------------------------------
// Logistic regression and k-nearest neighbours
// ---------------------------------------------------------------------------

struct LogRegConfig {
    double learning_rate = 0.1;
    std::size_t iterations = 1000;
    double l2 = 1e-3;
    bool operator==(const LogRegConfig&) const = default;
};

struct LogRegModel {
    std::vector<double> weights;
    double bias = 0;
    LogRegConfig config;
};

/// Mean log-loss plus (l2/2)|w|^2. `params` holds the weights followed by the bias.
double logreg_loss(const Dataset& data, std::span<const double> params, double l2);
std::vector<double> logreg_gradient(const Dataset& data, std::span<const double> params, double l2);

LogRegModel logreg_fit(const Dataset& data, const LogRegConfig& config);
double logreg_score(const LogRegModel& model, std::span<const double> row);

struct KnnModel {
    Matrix x;
    std::vector<int> y;
    std::vector<std::int64_t> ids;
    std::size_t k = 5;
};

KnnModel knn_fit(const Dataset& data, std::size_t k);

/// Euclidean vote over the k nearest rows, distance ties to the lower row id.
/// The label is 1 only on a strict minority majority.
Prediction knn_predict(const KnnModel& model, std::span<const double> row);

}  // namespace aefi
