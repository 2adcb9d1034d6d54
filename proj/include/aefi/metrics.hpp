#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace aefi {

/// Counts laid out as in the usual confusion table: rows are the actual
/// class (positive first), columns the predicted class.
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fn = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    int positive_class = 1;

    std::size_t total() const { return tp + fn + fp + tn; }
    /// The same predictions viewed with the other class as positive.
    ConfusionMatrix swapped() const { return {tn, fp, fn, tp, 1 - positive_class}; }

    bool operator==(const ConfusionMatrix&) const = default;
};

/// Rates with a zero denominator are nullopt, never NaN or 0.
struct MetricsReport {
    std::optional<double> acc_pos;    // TPR, recall
    std::optional<double> acc_neg;    // TNR, specificity
    std::optional<double> precision;
    std::optional<double> accuracy;
    std::optional<double> f1;
    std::optional<double> g_mean;

    std::optional<double> recall() const { return acc_pos; }
    std::optional<double> specificity() const { return acc_neg; }
};

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions,
                          int positive_class);

MetricsReport compute_metrics(const ConfusionMatrix& cm);

/// F1 and G-mean from rates alone (used to check published tables that
/// print rates rather than counts).
std::optional<double> f1_from_rates(double precision, double recall);
double g_mean_from_rates(double acc_pos, double acc_neg);

/// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half. Label 1 is the positive class.
double auc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
    double fpr = 0;
    double tpr = 0;
};

/// Threshold sweep over the distinct scores, highest first, from (0,0) to (1,1).
/// Corners lying on a straight segment between their neighbours are merged.
std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const int> labels);

double trapezoid_area(std::span<const RocPoint> curve);

}  // namespace aefi
