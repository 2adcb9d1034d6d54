#include <algorithm>
#include <cmath>
#include <numeric>

#include "aefi/error.hpp"
#include "aefi/learners.hpp"
#include "aefi/random.hpp"

namespace aefi {

double gini(double weight_neg, double weight_pos) {
    const double total = weight_neg + weight_pos;
    if (!(total > 0)) throw FitError("gini impurity of an empty node");
    const double p0 = weight_neg / total;
    const double p1 = weight_pos / total;
    return 1.0 - p0 * p0 - p1 * p1;
}

double entropy(double weight_neg, double weight_pos) {
    const double total = weight_neg + weight_pos;
    if (!(total > 0)) throw FitError("entropy of an empty node");
    double h = 0;
    for (double w : {weight_neg, weight_pos}) {
        if (w > 0) {
            const double p = w / total;
            h -= p * std::log2(p);
        }
    }
    return h;
}

double impurity(Criterion criterion, double weight_neg, double weight_pos) {
    return criterion == Criterion::gini ? gini(weight_neg, weight_pos)
                                        : entropy(weight_neg, weight_pos);
}

std::size_t CartTree::depth() const {
    if (nodes.empty()) return 0;
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        // children are always appended after their parent
        if (!nodes[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
        deepest = std::max(deepest, d[i]);
    }
    return deepest;
}

std::size_t CartTree::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const CartNode& n) { return n.is_leaf(); }));
}

std::size_t CartTree::leaf_index(std::span<const double> row) const {
    if (row.size() != n_features)
        throw PredictError("row has " + std::to_string(row.size()) + " features, tree expects " +
                           std::to_string(n_features));
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold
                                         ? n.left
                                         : n.right);
    }
    return i;
}

Prediction cart_predict(const CartTree& tree, std::span<const double> row) {
    const double p = tree.nodes[tree.leaf_index(row)].p_minority();
    return {p > 0.5 ? 1 : 0, p};
}

namespace {

struct Entry {
    std::size_t row;
    double weight;
    int label;
};

struct Split {
    int feature = -1;
    double threshold = 0;
    double gain = 0;
};

class TreeBuilder {
public:
    TreeBuilder(const Dataset& data, const CartConfig& config)
        : data_(data), config_(config), rng_(config.seed) {
        tree_.n_features = data.cols();
    }

    CartTree build(std::vector<Entry> entries) {
        grow(entries, 0);
        return std::move(tree_);
    }

private:
    int grow(std::vector<Entry>& entries, std::size_t depth) {
        double w0 = 0, w1 = 0;
        for (const auto& e : entries) (e.label == 1 ? w1 : w0) += e.weight;
        const int index = static_cast<int>(tree_.nodes.size());
        CartNode node;
        node.weight_neg = w0;
        node.weight_pos = w1;
        tree_.nodes.push_back(node);

        const bool pure = w0 == 0 || w1 == 0;
        const bool depth_ok = config_.max_depth == 0 || depth < config_.max_depth;
        if (pure || !depth_ok || entries.size() < 2 * config_.min_samples_leaf) return index;

        const Split split = best_split(entries, w0, w1);
        if (split.feature < 0) return index;

        std::vector<Entry> left, right;
        for (const auto& e : entries) {
            const double v = data_.x(e.row, static_cast<std::size_t>(split.feature));
            (v <= split.threshold ? left : right).push_back(e);
        }
        std::vector<Entry>().swap(entries);
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        auto& n = tree_.nodes[static_cast<std::size_t>(index)];
        n.feature = split.feature;
        n.threshold = split.threshold;
        n.left = l;
        n.right = r;
        return index;
    }

    std::vector<std::size_t> candidate_features() {
        const std::size_t d = data_.cols();
        if (config_.max_features == 0 || config_.max_features >= d) {
            std::vector<std::size_t> all(d);
            std::iota(all.begin(), all.end(), std::size_t{0});
            return all;
        }
        auto picked = rng_.sample_without_replacement(d, config_.max_features);
        std::sort(picked.begin(), picked.end());
        return picked;
    }

    Split best_split(const std::vector<Entry>& entries, double w0, double w1) {
        const double total = w0 + w1;
        const double parent = total * impurity(config_.criterion, w0, w1);
        const std::size_t msl = config_.min_samples_leaf;
        Split best;
        // gains below this are rounding noise, not impurity reduction
        double best_gain = 1e-12 * total;

        for (std::size_t f : candidate_features()) {
            sorted_.clear();
            for (std::size_t k = 0; k < entries.size(); ++k)
                sorted_.emplace_back(data_.x(entries[k].row, f), k);
            std::sort(sorted_.begin(), sorted_.end());

            double l0 = 0, l1 = 0;
            for (std::size_t k = 0; k + 1 < sorted_.size(); ++k) {
                const Entry& e = entries[sorted_[k].second];
                (e.label == 1 ? l1 : l0) += e.weight;
                const double v = sorted_[k].first;
                const double next = sorted_[k + 1].first;
                if (v == next) continue;
                if (k + 1 < msl || sorted_.size() - (k + 1) < msl) continue;
                const double r0 = w0 - l0, r1 = w1 - l1;
                const double wl = l0 + l1, wr = r0 + r1;
                if (!(wl > 0) || !(wr > 0)) continue;
                const double children = wl * impurity(config_.criterion, l0, l1) +
                                        wr * impurity(config_.criterion, std::max(r0, 0.0),
                                                      std::max(r1, 0.0));
                const double gain = parent - children;
                if (gain > best_gain) {
                    best_gain = gain;
                    best.feature = static_cast<int>(f);
                    double t = v + (next - v) / 2.0;
                    if (!(t < next)) t = v;
                    best.threshold = t;
                    best.gain = gain;
                }
            }
        }
        return best;
    }

    const Dataset& data_;
    const CartConfig& config_;
    Rng rng_;
    CartTree tree_;
    std::vector<std::pair<double, std::size_t>> sorted_;
};

}  // namespace

CartTree cart_fit_rows(const Dataset& data, std::span<const std::size_t> rows,
                       std::span<const double> weights, const CartConfig& config) {
    if (data.rows() == 0 || rows.empty()) throw FitError("cannot fit a tree on an empty dataset");
    if (weights.size() != rows.size()) throw FitError("one weight per training entry required");
    if (config.min_samples_leaf == 0) throw ValidationError("min_samples_leaf must be at least 1");
    if (config.max_features > data.cols())
        throw ValidationError("max_features exceeds the number of features");
    std::vector<Entry> entries;
    entries.reserve(rows.size());
    double total = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!(weights[i] >= 0) || !std::isfinite(weights[i]))
            throw FitError("sample weights must be finite and non-negative");
        if (rows[i] >= data.rows()) throw FitError("training row index out of range");
        if (weights[i] == 0) continue;
        entries.push_back({rows[i], weights[i], data.y[rows[i]]});
        total += weights[i];
    }
    if (!(total > 0)) throw FitError("sample weights sum to zero");
    return TreeBuilder(data, config).build(std::move(entries));
}

CartTree cart_fit(const Dataset& data, std::span<const double> sample_weights,
                  const CartConfig& config) {
    if (sample_weights.size() != data.rows()) throw FitError("one weight per row required");
    std::vector<std::size_t> rows(data.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return cart_fit_rows(data, rows, sample_weights, config);
}

}  // namespace aefi
