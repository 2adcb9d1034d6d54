#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "aefi/algorithms.hpp"
#include "aefi/error.hpp"
#include "aefi/tuning.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace aefi;

namespace {

TrainedModel constant_model(const Dataset& train) {
    return {"constant", {}, train.cols(), ExternalModel{"constant", [](std::span<const double>) { return 0.5; }}, {}};
}

// Looks rows up by exact feature values; anything unseen scores one half.
TrainedModel lookup_model(const Dataset& train) {
    auto table = std::make_shared<std::map<std::vector<double>, int>>();
    for (std::size_t i = 0; i < train.rows(); ++i)
        (*table)[std::vector<double>(train.row(i).begin(), train.row(i).end())] = train.y[i];
    return {"lookup", {}, train.cols(), ExternalModel{"lookup", [table](std::span<const double> row) {
                auto it = table->find(std::vector<double>(row.begin(), row.end()));
                return it == table->end() ? 0.5 : static_cast<double>(it->second);
            }}, {}};
}

TrainedModel nearest_model(const Dataset& train, std::uint64_t seed) {
    return train_algorithm("knn", train, {{"k", std::int64_t{1}}}, seed);
}

Dataset shuffled_labels(Dataset d, std::uint64_t seed) {
    Rng rng(seed);
    rng.shuffle(d.y);
    return d;
}

}  // namespace

TEST_SUITE("tuning") {
    TEST_CASE("grid enumerates the product in lexicographic order") {
        SearchPlan plan;
        plan.grid = {ParamDomain::finite("a", {std::int64_t{1}, std::int64_t{2}}),
                     ParamDomain::finite("b", {std::string("x"), std::string("y")})};
        plan.n_random = 0;
        Rng rng(1);
        const auto c = enumerate_candidates(plan, rng);
        REQUIRE(c.size() == 4);
        const std::vector<std::pair<std::int64_t, std::string>> expected{{1, "x"}, {1, "y"}, {2, "x"}, {2, "y"}};
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(get_int(c[i], "a", 0) == expected[i].first);
            CHECK(get_string(c[i], "b", "") == expected[i].second);
        }
    }

    TEST_CASE("random draws only") {
        SearchPlan plan;
        plan.random = {ParamDomain::int_range("n", 1, 5), ParamDomain::real_range("r", 0, 1)};
        plan.n_random = 7;
        Rng rng(2);
        const auto c = enumerate_candidates(plan, rng);
        CHECK(c.size() == 7);
        for (const auto& p : c) {
            CHECK(get_int(p, "n", 0) >= 1);
            CHECK(get_int(p, "n", 0) <= 5);
        }
    }

    TEST_CASE("log-range draws are log-uniform") {
        const auto dom = ParamDomain::log_real_range("c", 1e-3, 1e3);
        Rng rng(3);
        std::vector<double> logs;
        for (int i = 0; i < 1000; ++i) logs.push_back(std::log10(std::get<double>(dom.draw(rng))));
        std::sort(logs.begin(), logs.end());
        double ks = 0;
        for (std::size_t i = 0; i < logs.size(); ++i) {
            const double cdf = (logs[i] + 3) / 6;
            ks = std::max({ks, std::abs(cdf - static_cast<double>(i) / 1000), std::abs(cdf - static_cast<double>(i + 1) / 1000)});
        }
        CHECK(ks < 1.63 / std::sqrt(1000.0));  // 1% critical value
    }

    TEST_CASE("plans round-trip through json") {
        auto plan = SearchPlan::from_json(nlohmann::json::parse(R"({
            "grid": {"max_depth": [2, 3]},
            "random": {"rounds": {"int": [10, 60]}, "c": {"log": [0.01, 100]}},
            "n_random": 3, "folds": 4, "seed": 9, "fixed": {"kernel": "linear"}
        })"));
        CHECK(plan.folds == 4);
        CHECK(plan.n_random == 3);
        CHECK(SearchPlan::from_json(plan.to_json()).to_json() == plan.to_json());
        CHECK_THROWS(SearchPlan::from_json(nlohmann::json::parse(R"({"folds": 1})")));
    }

    TEST_CASE("folds partition the rows and keep class balance") {
        const auto d = synth_gaussian(200, 0.1, 2, 1.0, 1);
        const auto folds = stratified_folds(d.y, 5, 4);
        REQUIRE(folds.size() == 5);
        std::multiset<std::size_t> all;
        for (const auto& f : folds) {
            all.insert(f.test.begin(), f.test.end());
            CHECK(f.train.size() + f.test.size() == d.rows());
            std::size_t pos = 0;
            for (auto i : f.test) pos += static_cast<std::size_t>(d.y[i]);
            CHECK(pos == 4);
        }
        CHECK(all.size() == d.rows());
        CHECK(std::set<std::size_t>(all.begin(), all.end()).size() == d.rows());
        const auto again = stratified_folds(d.y, 5, 4);
        for (std::size_t f = 0; f < 5; ++f) CHECK(again[f].test == folds[f].test);
    }

    TEST_CASE("constant scores give one half on every fold") {
        const auto d = synth_gaussian(100, 0.2, 2, 1.0, 2);
        const auto t = cross_validate(d, [](const Dataset& tr, const Params&, std::uint64_t) { return constant_model(tr); }, {}, 5, 1);
        for (double a : t.fold_aucs) CHECK(a == 0.5);
        CHECK(t.mean_auc == 0.5);
    }

    TEST_CASE("held-out folds never reach the trainer") {
        const auto d = synth_gaussian(120, 0.25, 3, 4.0, 3);
        const auto t = cross_validate(d, [](const Dataset& tr, const Params&, std::uint64_t) { return lookup_model(tr); }, {}, 2, 1);
        for (double a : t.fold_aucs) CHECK(a == 0.5);

        const Trainer nn = [](const Dataset& tr, const Params&, std::uint64_t s) { return nearest_model(tr, s); };
        CHECK(cross_validate(d, nn, {}, 2, 1).mean_auc > 0.8);
        double permuted = 0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) permuted += cross_validate(shuffled_labels(d, seed), nn, {}, 2, seed).mean_auc;
        CHECK(std::abs(permuted / 10 - 0.5) <= 0.1);
    }

    TEST_CASE("cross validation is deterministic") {
        const auto d = synth_gaussian(150, 0.2, 3, 1.0, 4);
        const Trainer tree = [](const Dataset& tr, const Params& p, std::uint64_t s) { return train_algorithm("decision_tree", tr, p, s); };
        const auto a = cross_validate(d, tree, {{"max_depth", std::int64_t{3}}}, 5, 7);
        const auto b = cross_validate(d, tree, {{"max_depth", std::int64_t{3}}}, 5, 7);
        CHECK(a.fold_aucs == b.fold_aucs);
    }

    TEST_CASE("search") {
        const auto d = synth_gaussian(150, 0.2, 3, 3.0, 5);
        const Trainer by_kind = [](const Dataset& tr, const Params& p, std::uint64_t s) {
            const auto kind = get_string(p, "kind", "");
            if (kind == "broken") throw FitError("cannot fit");
            return kind == "constant" ? constant_model(tr) : nearest_model(tr, s);
        };
        SearchPlan plan;
        plan.n_random = 0;
        plan.folds = 3;

        SUBCASE("single candidate is best") {
            plan.grid = {ParamDomain::finite("kind", {std::string("constant")})};
            const auto r = search(d, by_kind, plan);
            CHECK(r.leaderboard.size() == 1);
            CHECK(get_string(r.best.params, "kind", "") == "constant");
        }
        SUBCASE("memorizer beats the constant scorer, failures rank last") {
            plan.grid = {ParamDomain::finite("kind", {std::string("broken"), std::string("constant"), std::string("memorize")})};
            const auto r = search(d, by_kind, plan);
            REQUIRE(r.leaderboard.size() == 3);
            CHECK(get_string(r.best.params, "kind", "") == "memorize");
            CHECK(get_string(r.leaderboard[1].params, "kind", "") == "constant");
            CHECK(r.leaderboard[2].failed());
            CHECK(r.leaderboard[2].candidate == 0);
            CHECK(to_json(r.leaderboard[2])["error"] == "cannot fit");
            CHECK(to_json(r.best)["error"].is_null());
        }
        SUBCASE("the error propagates when every candidate fails") {
            plan.grid = {ParamDomain::finite("kind", {std::string("broken")})};
            CHECK_THROWS_AS(search(d, by_kind, plan), FitError);
        }
        SUBCASE("leaderboard is reproducible and thread-independent") {
            plan.grid = {ParamDomain::finite("kind", {std::string("constant"), std::string("memorize")})};
            plan.random = {ParamDomain::real_range("unused", 0, 1)};
            plan.n_random = 3;
            const auto a = search(d, by_kind, plan);
            plan.threads = 3;
            const auto b = search(d, by_kind, plan);
            REQUIRE(a.leaderboard.size() == 6);
            for (std::size_t i = 0; i < a.leaderboard.size(); ++i)
                CHECK(to_json(a.leaderboard[i]) == to_json(b.leaderboard[i]));
        }
    }

    TEST_CASE("registry plans are valid") {
        const auto reg = AlgorithmRegistry::builtin();
        for (const auto& name : reg.names()) {
            CAPTURE(name);
            CHECK_NOTHROW(reg.default_plan(name).validate());
        }
        CHECK(reg.contains("rusboost_svc"));
        CHECK_FALSE(reg.contains("xgboost"));
    }
}
