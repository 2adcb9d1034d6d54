#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "aefi/dataset.hpp"
#include "aefi/model.hpp"
#include "json.hpp"

namespace aefi {

inline constexpr int kBundleFormatVersion = 1;

struct BundleMetadata {
    std::string algorithm;
    Params params;
    std::optional<std::string> trained_at;  // supplied by the caller; never read from a clock
    std::optional<double> holdout_auc;
    std::uint64_t seed = 0;
    double threshold = 0.5;

    nlohmann::json to_json() const;
    static BundleMetadata from_json(const nlohmann::json& doc);
};

/// Everything needed to score a raw record: schema and fitted encoder,
/// the model, and the operating threshold.
struct ModelBundle {
    int format_version = kBundleFormatVersion;
    Encoder encoder;
    TrainedModel model;
    BundleMetadata metadata;

    const RecordSchema& schema() const { return encoder.schema(); }

    /// Minority ("Yes") score of a raw record.
    double score(const RawRecord& record) const;
};

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& doc);

/// Canonical text: sorted keys, shortest round-trip number rendering, so
/// equal bundles serialize to equal bytes.
std::string serialize_model(const ModelBundle& bundle);
/// Throws ParseError on malformed documents and VersionError on an unknown format_version.
ModelBundle deserialize_model(std::string_view text);

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace aefi
