#include "aefi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "aefi/error.hpp"

namespace aefi {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

struct ClassCounts {
    std::size_t pos = 0;
    std::size_t neg = 0;
};

ClassCounts check_scored(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw MetricError("scores and labels differ in length");
    ClassCounts c;
    for (int l : labels) {
        if (l == 1)
            ++c.pos;
        else if (l == 0)
            ++c.neg;
        else
            throw MetricError("labels must be 0 or 1");
    }
    if (c.pos == 0 || c.neg == 0) throw MetricError("AUC needs both classes present");
    return c;
}

// Row order sorted by descending score.
std::vector<std::size_t> order_desc(std::span<const double> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

}  // namespace

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions,
                          int positive_class) {
    if (labels.size() != predictions.size())
        throw MetricError("labels and predictions differ in length");
    if (labels.empty()) throw MetricError("confusion matrix needs at least one row");
    ConfusionMatrix cm;
    cm.positive_class = positive_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool actual = labels[i] == positive_class;
        const bool predicted = predictions[i] == positive_class;
        if (actual && predicted)
            ++cm.tp;
        else if (actual)
            ++cm.fn;
        else if (predicted)
            ++cm.fp;
        else
            ++cm.tn;
    }
    return cm;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
    MetricsReport r;
    r.acc_pos = ratio(cm.tp, cm.tp + cm.fn);
    r.acc_neg = ratio(cm.tn, cm.tn + cm.fp);
    r.precision = ratio(cm.tp, cm.tp + cm.fp);
    r.accuracy = ratio(cm.tp + cm.tn, cm.total());
    // 2PR/(P+R) = 2TP/(2TP+FP+FN); undefined exactly when P or R is
    if (r.precision && r.acc_pos) r.f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn);
    if (r.acc_pos && r.acc_neg) r.g_mean = std::sqrt(*r.acc_pos * *r.acc_neg);
    return r;
}

std::optional<double> f1_from_rates(double precision, double recall) {
    if (precision + recall == 0.0) return std::nullopt;
    return 2.0 * precision * recall / (precision + recall);
}

double g_mean_from_rates(double acc_pos, double acc_neg) { return std::sqrt(acc_pos * acc_neg); }

double auc(std::span<const double> scores, std::span<const int> labels) {
    const auto counts = check_scored(scores, labels);
    // Doubled average ranks stay integral, so the statistic is an exact
    // ratio of integers: (2*R_pos - P(P+1)) / (2*P*N).
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::uint64_t doubled_rank_sum = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        // ranks i+1 .. j+1, doubled average = i + j + 2
        const std::uint64_t doubled = static_cast<std::uint64_t>(i + j + 2);
        for (std::size_t k = i; k <= j; ++k)
            if (labels[idx[k]] == 1) doubled_rank_sum += doubled;
        i = j + 1;
    }
    const std::uint64_t p = counts.pos;
    const std::uint64_t n = counts.neg;
    const std::uint64_t numerator = doubled_rank_sum - p * (p + 1);
    return static_cast<double>(numerator) / static_cast<double>(2 * p * n);
}

std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const int> labels) {
    const auto counts = check_scored(scores, labels);
    const auto idx = order_desc(scores);
    // integer corners; a corner on the segment between its neighbours is dropped
    std::vector<std::pair<std::size_t, std::size_t>> corners{{0, 0}};
    auto collinear = [](auto a, auto b, auto c) {
        const auto lhs = static_cast<long double>(b.first - a.first) * static_cast<long double>(c.second - a.second);
        const auto rhs = static_cast<long double>(b.second - a.second) * static_cast<long double>(c.first - a.first);
        return lhs == rhs;
    };
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < idx.size()) {
        const double s = scores[idx[i]];
        while (i < idx.size() && scores[idx[i]] == s) {
            (labels[idx[i]] == 1 ? tp : fp)++;
            ++i;
        }
        const std::pair<std::size_t, std::size_t> next{fp, tp};
        if (corners.size() >= 2 && collinear(corners[corners.size() - 2], corners.back(), next))
            corners.back() = next;
        else
            corners.push_back(next);
    }
    std::vector<RocPoint> curve;
    for (const auto& [f, t] : corners)
        curve.push_back({static_cast<double>(f) / static_cast<double>(counts.neg),
                         static_cast<double>(t) / static_cast<double>(counts.pos)});
    return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
    double area = 0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
    return area;
}

}  // namespace aefi
