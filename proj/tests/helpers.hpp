#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aefi/dataset.hpp"

namespace testing {

/// The record shown on the entry form screenshot.
inline aefi::RawRecord form_example(std::int64_t id = 0) {
    aefi::RawRecord r;
    r.id = id;
    r.values = {
        {"vaccination_times", "4"},
        {"vaccination_dose", "0.5"},
        {"gender", "Male"},
        {"fever", "Normal"},
        {"local_redness_swelling", "Normal"},
        {"local_induration", "Normal"},
        {"vaccination_age", "0-258days"},
        {"inoculation_organization_form", "Unknown"},
        {"vaccine_name", "PPV23"},
        {"inoculation_route", "Oral"},
        {"inoculation_interval", "0-9days"},
        {"inoculation_site", "Deltoid muscle of upper arm"},
    };
    return r;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("aefi_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

/// Dataset from explicit rows; ids are the row positions.
inline aefi::Dataset make_dataset(const std::vector<std::vector<double>>& rows,
                                  const std::vector<int>& labels) {
    aefi::Dataset d;
    const std::size_t cols = rows.empty() ? 0 : rows[0].size();
    d.x = aefi::Matrix(0, cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        d.x.append_row(rows[i]);
        d.ids.push_back(static_cast<std::int64_t>(i));
    }
    d.y = labels;
    for (std::size_t c = 0; c < cols; ++c) d.columns.push_back("x" + std::to_string(c));
    return d;
}

}  // namespace testing

#include "aefi/algorithms.hpp"
#include "aefi/bundle.hpp"

namespace testing {

/// Bundle trained on generated form records with the default schema.
inline aefi::ModelBundle trained_bundle(const std::string& algorithm, const aefi::Params& params,
                                        std::uint64_t seed = 1, std::size_t n = 300) {
    using namespace aefi;
    const auto schema = RecordSchema::aefi_default();
    const auto records = clean(synth_aefi(n, 0.1, schema, seed), schema).records;
    ModelBundle bundle;
    bundle.encoder = fit_encoder(records, schema);
    bundle.model = train_algorithm(algorithm, bundle.encoder.encode_dataset(records), params, seed);
    bundle.metadata.algorithm = algorithm;
    bundle.metadata.params = params;
    bundle.metadata.seed = seed;
    bundle.metadata.trained_at = "2024-01-01T00:00:00Z";
    return bundle;
}

/// Small settings per built-in algorithm so every family trains quickly.
inline std::vector<std::pair<std::string, aefi::Params>> quick_algorithms() {
    using P = aefi::Params;
    using I = std::int64_t;
    return {
        {"decision_tree", P{{"max_depth", I{4}}}},
        {"random_forest", P{{"trees", I{10}}}},
        {"brf", P{{"trees", I{10}}}},
        {"svc", P{{"kernel", std::string("rbf")}, {"c", 1.0}}},
        {"logistic_regression", P{}},
        {"knn", P{{"k", I{5}}}},
        {"adaboost", P{{"rounds", I{5}}}},
        {"rusboost", P{{"rounds", I{5}}}},
        {"easy_ensemble", P{{"subsets", I{3}}, {"rounds", I{4}}}},
        {"rusboost_svc", P{{"rounds", I{5}}, {"beta", 2.0}}},
    };
}

}  // namespace testing
