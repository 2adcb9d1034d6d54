#include <cmath>

#include "aefi/dataset.hpp"
#include "aefi/learners.hpp"
#include "aefi/random.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace aefi;

namespace {

std::vector<double> uniform_weights(std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

}  // namespace

TEST_SUITE("cart") {
    TEST_CASE("impurity values") {
        CHECK(gini(10, 0) == 0.0);
        CHECK(gini(5, 5) == 0.5);
        CHECK(gini(9, 1) == doctest::Approx(0.18).epsilon(1e-12));
        CHECK(entropy(5, 5) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(entropy(4, 0) == 0.0);
    }

    TEST_CASE("separable pair needs a single split") {
        const auto d = testing::make_dataset({{0}, {1}}, {0, 1});
        const auto tree = cart_fit(d, uniform_weights(2), {});
        CHECK(tree.nodes.size() == 3);
        CHECK(tree.depth() == 1);
        CHECK(cart_predict(tree, d.row(0)).label == 0);
        CHECK(cart_predict(tree, d.row(1)).label == 1);
    }

    TEST_CASE("pure root stays a leaf") {
        const auto d = testing::make_dataset({{0}, {1}, {2}}, {0, 0, 0});
        const auto tree = cart_fit(d, uniform_weights(3), {});
        CHECK(tree.leaf_count() == 1);
        const std::vector<double> far{100.0};
        CHECK(cart_predict(tree, far).p_minority == cart_predict(tree, d.row(0)).p_minority);
    }

    TEST_CASE("leaf probability is the weighted minority fraction") {
        CartNode leaf;
        leaf.weight_neg = 3;
        leaf.weight_pos = 1;
        CHECK(leaf.p_minority() == 0.25);
        CartTree tree;
        tree.nodes = {leaf};
        tree.n_features = 1;
        const std::vector<double> row{0.0};
        CHECK(cart_predict(tree, row).p_minority == 0.25);
        CHECK(cart_predict(tree, row).label == 0);
    }

    TEST_CASE("leaves predict their weighted majority") {
        Rng rng(4);
        const auto d = synth_gaussian(200, 0.2, 3, 1.0, 4);
        std::vector<double> w(d.rows());
        for (std::size_t i = 0; i < d.rows(); ++i) w[i] = d.y[i] == 1 ? 1.0 : 1e-3 * rng.uniform();
        const auto tree = cart_fit(d, w, {.max_depth = 3});
        for (std::size_t i = 0; i < d.rows(); ++i) {
            const auto& leaf = tree.nodes[tree.leaf_index(d.row(i))];
            const int expected = leaf.weight_pos > leaf.weight_neg ? 1 : 0;
            CHECK(cart_predict(tree, d.row(i)).label == expected);
            if (d.y[i] == 1) CHECK(expected == 1);  // almost all mass sits on minority rows
        }
    }

    TEST_CASE("splits never increase weighted impurity") {
        for (auto criterion : {Criterion::gini, Criterion::info_gain}) {
            const auto d = synth_gaussian(300, 0.3, 4, 1.0, 9);
            const auto tree = cart_fit(d, uniform_weights(d.rows()), {.criterion = criterion});
            for (const auto& node : tree.nodes) {
                if (node.is_leaf()) continue;
                const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
                const auto& r = tree.nodes[static_cast<std::size_t>(node.right)];
                const double total = node.weight_neg + node.weight_pos;
                const double before = impurity(criterion, node.weight_neg, node.weight_pos);
                const double after =
                    ((l.weight_neg + l.weight_pos) * impurity(criterion, l.weight_neg, l.weight_pos) +
                     (r.weight_neg + r.weight_pos) * impurity(criterion, r.weight_neg, r.weight_pos)) /
                    total;
                CHECK(after <= before + 1e-12);
            }
        }
    }

    TEST_CASE("unbounded tree reproduces distinct training rows") {
        const auto d = synth_gaussian(150, 0.2, 3, 0.5, 2);
        const auto tree = cart_fit(d, uniform_weights(d.rows()), {});
        for (std::size_t i = 0; i < d.rows(); ++i) CHECK(cart_predict(tree, d.row(i)).label == d.y[i]);
    }

    TEST_CASE("depth and leaf size limits hold") {
        const auto d = synth_gaussian(300, 0.3, 4, 0.5, 6);
        const auto tree = cart_fit(d, uniform_weights(d.rows()), {.max_depth = 2});
        CHECK(tree.depth() <= 2);
        CHECK(tree.leaf_count() <= 4);
    }

    TEST_CASE("repeated rows act as weights") {
        const auto d = synth_gaussian(80, 0.25, 2, 1.0, 3);
        std::vector<std::size_t> rows;
        std::vector<double> entry_w;
        std::vector<double> direct_w(d.rows(), 0.0);
        for (std::size_t i = 0; i < d.rows(); ++i) {
            rows.push_back(i);
            entry_w.push_back(1.0);
            direct_w[i] += 1.0;
            if (i % 3 == 0) {
                rows.push_back(i);
                entry_w.push_back(1.0);
                direct_w[i] += 1.0;
            }
        }
        const auto a = cart_fit_rows(d, rows, entry_w, {.max_depth = 3});
        const auto b = cart_fit(d, direct_w, {.max_depth = 3});
        for (std::size_t i = 0; i < d.rows(); ++i)
            CHECK(cart_predict(a, d.row(i)).p_minority ==
                  doctest::Approx(cart_predict(b, d.row(i)).p_minority).epsilon(1e-12));
    }

    TEST_CASE("equal seeds give equal feature-sampled trees") {
        const auto d = synth_gaussian(200, 0.2, 6, 1.0, 1);
        const CartConfig cfg{.max_features = 2, .seed = 5};
        CHECK(cart_fit(d, uniform_weights(d.rows()), cfg) == cart_fit(d, uniform_weights(d.rows()), cfg));
    }
}
