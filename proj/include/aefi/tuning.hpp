#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aefi/dataset.hpp"
#include "aefi/model.hpp"
#include "aefi/params.hpp"
#include "aefi/random.hpp"

namespace aefi {

struct ParamDomain {
    enum class Shape { finite, int_range, real_range, log_real_range };

    std::string name;
    Shape shape = Shape::finite;
    std::vector<ParamValue> values;  // finite only
    double lo = 0;                   // ranges only
    double hi = 0;

    static ParamDomain finite(std::string name, std::vector<ParamValue> values);
    static ParamDomain int_range(std::string name, std::int64_t lo, std::int64_t hi);
    static ParamDomain real_range(std::string name, double lo, double hi);
    static ParamDomain log_real_range(std::string name, double lo, double hi);

    void validate() const;
    ParamValue draw(Rng& rng) const;  // ranges only
};

/// Finite domains are searched exhaustively, range domains by seeded random draws.
struct SearchPlan {
    std::vector<ParamDomain> grid;
    std::vector<ParamDomain> random;
    std::size_t n_random = 10;
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    Params fixed;  // merged into every candidate
    unsigned threads = 1;

    void validate() const;
    nlohmann::json to_json() const;
    /// Accepts {"grid": {name: [values]}, "random": {name: {"int"|"real"|"log": [lo, hi]}},
    /// "n_random", "folds", "seed", "fixed"}.
    static SearchPlan from_json(const nlohmann::json& doc);
};

/// Grid product (first domain varies slowest) crossed with n_random draws
/// over the range domains.
std::vector<Params> enumerate_candidates(const SearchPlan& plan, Rng& rng);

struct Trial {
    Params params;
    std::vector<double> fold_aucs;
    double mean_auc = 0;
    std::size_t candidate = 0;  // position in enumeration order
    std::string error;          // non-empty when a fold could not be fit

    bool failed() const { return !error.empty(); }
};

/// k stratified folds; each fold's `test` holds its rows, `train` the rest.
std::vector<SplitIndices> stratified_folds(std::span<const int> labels, std::size_t k,
                                           std::uint64_t seed);

/// Produces the (train, test) datasets for one fold. The default takes row
/// subsets; record pipelines refit their encoder on the training rows here.
using FoldTransform = std::function<std::pair<Dataset, Dataset>(
    const Dataset& data, std::span<const std::size_t> train_rows,
    std::span<const std::size_t> test_rows)>;

Trial cross_validate(const Dataset& data, const Trainer& trainer, const Params& params,
                     std::size_t k, std::uint64_t seed, const FoldTransform& transform = {});

struct SearchResult {
    Trial best;
    std::vector<Trial> leaderboard;  // mean AUC descending, ties by candidate order, failures last
};

/// A candidate whose fit throws on any fold is kept on the leaderboard as a
/// failed trial. The error propagates only when every candidate fails.
SearchResult search(const Dataset& data, const Trainer& trainer, const SearchPlan& plan,
                    const FoldTransform& transform = {});

nlohmann::json to_json(const Trial& trial);

}  // namespace aefi
