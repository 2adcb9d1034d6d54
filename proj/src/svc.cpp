#include <algorithm>
#include <cmath>
#include <limits>

#include "aefi/error.hpp"
#include "aefi/learners.hpp"

namespace aefi {

double Kernel::operator()(std::span<const double> a, std::span<const double> b) const {
    switch (type) {
        case KernelType::linear: {
            double dot = 0;
            for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
            return dot;
        }
        case KernelType::polynomial: {
            double dot = 0;
            for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
            return std::pow(gamma * dot + coef0, degree);
        }
        case KernelType::rbf: {
            double d2 = 0;
            for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
            return std::exp(-gamma * d2);
        }
    }
    return 0;
}

void Kernel::validate() const {
    if (type == KernelType::polynomial && degree < 1)
        throw ValidationError("polynomial kernel degree must be at least 1");
    if (type != KernelType::linear && !(gamma > 0)) throw ValidationError("kernel gamma must be positive");
}

void SvcConfig::validate() const {
    if (!(c > 0)) throw ValidationError("SVC C must be positive");
    if (!(tol > 0)) throw ValidationError("SVC tol must be positive");
    if (!(sv_threshold > 0)) throw ValidationError("SVC sv_threshold must be positive");
    if (max_iter == 0) throw ValidationError("SVC max_iter must be positive");
    kernel.validate();
}

namespace {

// Kernel rows, cached as a full Gram matrix for desk-scale data and
// recomputed on demand beyond that.
class KernelRows {
public:
    static constexpr std::size_t kGramLimit = 3000;

    KernelRows(const Dataset& data, const Kernel& kernel) : data_(data), kernel_(kernel) {
        const std::size_t n = data.rows();
        if (n <= kGramLimit) {
            gram_.resize(n * n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i; j < n; ++j)
                    gram_[i * n + j] = gram_[j * n + i] = kernel(data.row(i), data.row(j));
        }
        diag_.resize(n);
        for (std::size_t i = 0; i < n; ++i) diag_[i] = at(i, i);
    }

    double at(std::size_t i, std::size_t j) const {
        if (!gram_.empty()) return gram_[i * data_.rows() + j];
        return kernel_(data_.row(i), data_.row(j));
    }

    std::span<const double> row(std::size_t i, std::vector<double>& scratch) const {
        const std::size_t n = data_.rows();
        if (!gram_.empty()) return {gram_.data() + i * n, n};
        scratch.resize(n);
        for (std::size_t j = 0; j < n; ++j) scratch[j] = kernel_(data_.row(i), data_.row(j));
        return scratch;
    }

    double diag(std::size_t i) const { return diag_[i]; }

private:
    const Dataset& data_;
    const Kernel& kernel_;
    std::vector<double> gram_;
    std::vector<double> diag_;
};

constexpr double kTau = 1e-12;

}  // namespace

SvcSolution svc_solve_dual(const Dataset& data, const SvcConfig& config) {
    config.validate();
    const std::size_t n = data.rows();
    if (n == 0) throw FitError("cannot fit an SVC on an empty dataset");
    if (data.count(1) == 0 || data.count(0) == 0)
        throw FitError("SVC needs both classes in the training data");

    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = data.y[i] == 1 ? 1.0 : -1.0;
    const KernelRows k(data, config.kernel);
    const double c = config.c;

    SvcSolution sol;
    sol.alpha.assign(n, 0.0);
    auto& alpha = sol.alpha;
    std::vector<double> grad(n, -1.0);  // gradient of 1/2 a'Qa - e'a
    std::vector<double> scratch_i, scratch_j;

    auto in_up = [&](std::size_t t) { return y[t] > 0 ? alpha[t] < c : alpha[t] > 0; };
    auto in_low = [&](std::size_t t) { return y[t] > 0 ? alpha[t] > 0 : alpha[t] < c; };

    for (sol.iterations = 0; sol.iterations < config.max_iter; ++sol.iterations) {
        std::size_t i = n, j = n;
        double g_max = -std::numeric_limits<double>::infinity();
        double g_min = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -y[t] * grad[t];
            if (in_up(t) && v > g_max) {
                g_max = v;
                i = t;
            }
            if (in_low(t) && v < g_min) {
                g_min = v;
                j = t;
            }
        }
        if (i == n || j == n || g_max - g_min < config.tol) {
            sol.converged = true;
            break;
        }

        const auto ki = k.row(i, scratch_i);
        const auto kj = k.row(j, scratch_j);
        const double qij = y[i] * y[j] * ki[j];
        const double old_i = alpha[i], old_j = alpha[j];
        if (y[i] != y[j]) {
            double quad = k.diag(i) + k.diag(j) + 2.0 * qij;
            if (quad <= 0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = -diff;
            }
            if (diff > 0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = k.diag(i) + k.diag(j) - 2.0 * qij;
            if (quad <= 0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = sum;
                }
                if (alpha[i] < 0) {
                    alpha[i] = 0;
                    alpha[j] = sum;
                }
            }
        }
        const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < n; ++t)
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
    }

    // bias: average over margin vectors, else the midpoint of the feasible interval
    const double eps = config.sv_threshold;
    double upper = std::numeric_limits<double>::infinity();
    double lower = -std::numeric_limits<double>::infinity();
    double free_sum = 0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (alpha[t] >= c - eps) {
            if (y[t] < 0)
                upper = std::min(upper, yg);
            else
                lower = std::max(lower, yg);
        } else if (alpha[t] <= eps) {
            if (y[t] > 0)
                upper = std::min(upper, yg);
            else
                lower = std::max(lower, yg);
        } else {
            free_sum += yg;
            ++free_count;
        }
    }
    double rho;
    if (free_count > 0)
        rho = free_sum / static_cast<double>(free_count);
    else if (std::isfinite(upper) && std::isfinite(lower))
        rho = (upper + lower) / 2.0;
    else
        rho = std::isfinite(upper) ? upper : lower;
    sol.bias = -rho;
    return sol;
}

SvcModel svc_fit(const Dataset& data, const SvcConfig& config) {
    SvcSolution sol = svc_solve_dual(data, config);
    SvcModel model;
    model.config = config;
    model.bias = sol.bias;
    model.converged = sol.converged;
    model.iterations = sol.iterations;

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < data.rows(); ++i)
        if (sol.alpha[i] > config.sv_threshold) order.push_back(i);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return data.ids[a] < data.ids[b]; });
    model.support = Matrix(0, data.cols());
    for (std::size_t i : order) {
        model.support.append_row(data.row(i));
        model.alpha.push_back(sol.alpha[i]);
        model.dual_coef.push_back(data.y[i] == 1 ? sol.alpha[i] : -sol.alpha[i]);
        model.support_ids.push_back(data.ids[i]);
    }
    if (order.empty()) model.support = Matrix(0, data.cols());
    return model;
}

double svc_decision(const SvcModel& model, std::span<const double> row) {
    if (row.size() != model.support.cols())
        throw PredictError("row has " + std::to_string(row.size()) + " features, SVC expects " +
                           std::to_string(model.support.cols()));
    double f = model.bias;
    for (std::size_t i = 0; i < model.support.rows(); ++i)
        f += model.dual_coef[i] * model.config.kernel(model.support.row(i), row);
    return f;
}

std::vector<std::int64_t> support_indices(const SvcModel& model) { return model.support_ids; }

}  // namespace aefi
