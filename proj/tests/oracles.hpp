#pragma once

// Independent reference implementations used to check the library.
// None of these share code with the functions they check.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aefi/dataset.hpp"
#include "aefi/learners.hpp"

namespace oracle {

/// AUC by enumerating every (positive, negative) pair.
double pairwise_auc(std::span<const double> scores, std::span<const int> labels);

struct DualResult {
    std::vector<double> alpha;
    double bias = 0;
    double residual = 0;  // final projected-gradient step length
};

/// Soft-margin dual solved densely by accelerated projected gradient ascent.
/// The projection onto {0 <= a <= C, y'a = 0} is found by bisection on the
/// hyperplane multiplier.
DualResult dense_dual(const aefi::Dataset& data, const aefi::Kernel& kernel, double c,
                      std::size_t max_iter = 200000, double tol = 1e-12);

double dual_decision(const DualResult& sol, const aefi::Dataset& data, const aefi::Kernel& kernel,
                     std::span<const double> row);

/// Kernel written out independently of aefi::Kernel.
double kernel_value(const aefi::Kernel& k, std::span<const double> a, std::span<const double> b);

/// KKT audit of a dual solution at tolerance `tol`. Returns a description of
/// the first violation, or an empty string.
std::string kkt_violation(const aefi::Dataset& data, const aefi::Kernel& kernel, double c,
                          std::span<const double> alpha, double bias, double tol);

/// Small random two-class instance: Gaussian clusters in `dims` dimensions
/// with at least two rows of each class.
aefi::Dataset random_instance(std::size_t n, std::size_t dims, double separation, std::uint64_t seed);

}  // namespace oracle
