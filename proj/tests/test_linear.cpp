#include <algorithm>
#include <cmath>
#include <numeric>

#include "aefi/learners.hpp"
#include "aefi/random.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace aefi;

TEST_SUITE("linear") {
    TEST_CASE("zero weights score one half") {
        LogRegModel model;
        model.weights = {0, 0, 0};
        const std::vector<double> row{3, -1, 8};
        CHECK(logreg_score(model, row) == 0.5);
    }

    TEST_CASE("separable pair is learned") {
        const auto d = testing::make_dataset({{-1}, {1}}, {0, 1});
        const auto model = logreg_fit(d, {.iterations = 2000});
        CHECK(logreg_score(model, d.row(0)) < 0.5);
        CHECK(logreg_score(model, d.row(1)) > 0.5);
    }

    TEST_CASE("analytic gradient matches central differences") {
        const auto d = synth_gaussian(60, 0.3, 3, 1.0, 2);
        Rng rng(8);
        for (int point = 0; point < 5; ++point) {
            std::vector<double> p(d.cols() + 1);
            for (auto& v : p) v = rng.uniform(-1, 1);
            const auto grad = logreg_gradient(d, p, 0.01);
            for (std::size_t j = 0; j < p.size(); ++j) {
                const double h = 1e-5;
                auto up = p, down = p;
                up[j] += h;
                down[j] -= h;
                const double numeric = (logreg_loss(d, up, 0.01) - logreg_loss(d, down, 0.01)) / (2 * h);
                CHECK(std::abs(grad[j] - numeric) <= 1e-5 * std::max(1.0, std::abs(numeric)));
            }
        }
    }

    TEST_CASE("knn with k equal to n votes the global majority") {
        const auto d = testing::make_dataset({{0}, {1}, {2}, {3}, {4}}, {0, 0, 1, 0, 1});
        const auto model = knn_fit(d, 5);
        for (double q : {-10.0, 2.0, 40.0}) {
            const std::vector<double> row{q};
            CHECK(knn_predict(model, row).label == 0);
            CHECK(knn_predict(model, row).p_minority == 0.4);
        }
    }

    TEST_CASE("1-nn returns the label of an identical training row") {
        const auto d = synth_gaussian(40, 0.25, 2, 1.0, 3);
        const auto model = knn_fit(d, 1);
        for (std::size_t i = 0; i < d.rows(); ++i) CHECK(knn_predict(model, d.row(i)).label == d.y[i]);
    }

    TEST_CASE("3-nn on a hand-built set agrees with a full distance sort") {
        const auto d = testing::make_dataset({{0, 0}, {1, 0}, {0, 2}, {3, 3}, {-1, -1}}, {1, 1, 0, 0, 0});
        const auto model = knn_fit(d, 3);
        Rng rng(6);
        for (int q = 0; q < 50; ++q) {
            const std::vector<double> query{rng.uniform(-2, 4), rng.uniform(-2, 4)};
            std::vector<std::size_t> order(d.rows());
            std::iota(order.begin(), order.end(), std::size_t{0});
            auto dist = [&](std::size_t i) {
                const double a = d.x(i, 0) - query[0], b = d.x(i, 1) - query[1];
                return a * a + b * b;
            };
            std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dist(a) < dist(b); });
            int minority = 0;
            for (std::size_t i = 0; i < 3; ++i) minority += d.y[order[i]];
            CHECK(knn_predict(model, query).label == (minority >= 2 ? 1 : 0));
        }
    }
}
