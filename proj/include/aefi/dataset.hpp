#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace aefi {

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

enum class FeatureKind { numeric, categorical, binned };
enum class MissingPolicy { fill_mode, fill_median, map_to_unknown };

inline constexpr std::string_view kUnknownLevel = "Unknown";

/// Closed integer interval [lo, hi] parsed from a label such as "0-258days".
struct Bin {
    std::string label;
    double lo = 0;
    double hi = 0;
};

struct FeatureSpec {
    std::string name;
    std::string label;  // display text for forms; empty means use name
    FeatureKind kind = FeatureKind::categorical;
    std::string unit;                 // numeric only
    std::vector<std::string> levels;  // categorical and binned
    std::vector<Bin> bins;            // binned only; every level except "Unknown"
    MissingPolicy missing_policy = MissingPolicy::fill_mode;

    bool has_unknown() const;
    std::optional<std::size_t> level_index(std::string_view level) const;

    /// Maps a raw cell to its level label. Binned features accept either a
    /// label or a number that falls inside one of the bins. Returns nullopt
    /// when the value is not a declared level.
    std::optional<std::string> canonical_level(std::string_view raw) const;

    /// Throws SchemaError when the spec is malformed.
    void validate() const;
};

/// Parses "lo-hi<suffix>" bin labels, e.g. "0-258days" -> [0, 258].
std::optional<Bin> parse_bin_label(std::string_view label);

struct RecordSchema {
    std::vector<FeatureSpec> features;
    std::string target = "hospitalization";
    std::string positive_level = "Yes";  // encoded as 1 (minority)
    std::string negative_level = "No";   // encoded as 0 (majority)
    std::string age_feature = "vaccination_age";
    double max_age_days = 6570;

    void validate() const;
    const FeatureSpec* find(std::string_view name) const;

    /// The twelve-field vaccination-reaction record used by the entry form.
    static RecordSchema aefi_default();

    nlohmann::json to_json() const;
    static RecordSchema from_json(const nlohmann::json& doc);
    static RecordSchema load(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct RawRecord {
    std::int64_t id = 0;
    std::map<std::string, std::optional<std::string>> values;

    std::optional<std::string> get(const std::string& name) const;
};

/// Reads a header-first CSV. Empty cells become missing values; columns not
/// named by the schema are ignored. Numeric cells are checked on load.
std::vector<RawRecord> load_csv(const std::filesystem::path& path, const RecordSchema& schema);
std::vector<RawRecord> parse_csv(std::istream& in, const RecordSchema& schema);
void write_csv(const std::filesystem::path& path, std::span<const RawRecord> records,
               const RecordSchema& schema);

struct CleanReport {
    std::size_t filled = 0;
    std::size_t dropped = 0;
    std::map<std::string, std::size_t> filled_by_feature;
};

struct CleanResult {
    std::vector<RawRecord> records;
    CleanReport report;
};

/// Drops over-age records, then fills missing feature values per policy.
CleanResult clean(std::span<const RawRecord> records, const RecordSchema& schema);

/// Vaccination age in days for a raw cell (number, or bin label -> lower bound).
std::optional<double> age_in_days(const FeatureSpec& spec, std::string_view raw);

// ---------------------------------------------------------------------------
// Numeric data
// ---------------------------------------------------------------------------

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    void append_row(std::span<const double> values);
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Encoded feature matrix with binary labels: 1 = minority/"Yes", 0 = majority/"No".
struct Dataset {
    Matrix x;
    std::vector<int> y;
    std::vector<std::int64_t> ids;
    std::vector<std::string> columns;

    std::size_t rows() const { return y.size(); }
    std::size_t cols() const { return x.cols(); }
    std::span<const double> row(std::size_t i) const { return x.row(i); }
    std::size_t count(int label) const;

    /// Rows in the given order; indices may repeat (bootstrap multisets).
    Dataset subset(std::span<const std::size_t> rows) const;

    /// Throws ValidationError on size mismatch, non-binary labels or non-finite cells.
    void validate() const;

    bool operator==(const Dataset&) const = default;
};

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

struct FeatureBlock {
    std::string name;
    FeatureKind kind = FeatureKind::numeric;
    std::size_t offset = 0;
    std::size_t width = 0;
    double mean = 0;  // numeric only
    double sd = 1;    // numeric only
    std::vector<std::string> levels;
};

class Encoder {
public:
    Encoder() = default;
    Encoder(RecordSchema schema, std::vector<FeatureBlock> blocks);

    std::size_t dim() const { return dim_; }
    const RecordSchema& schema() const { return schema_; }
    const std::vector<FeatureBlock>& blocks() const { return blocks_; }
    std::vector<std::string> column_names() const;

    /// Deterministic d-dimensional row. Throws EncodingError on missing
    /// values, unparseable numbers, or unseen categories without an
    /// "Unknown" level.
    std::vector<double> encode(const RawRecord& record) const;

    /// Encodes records into a dataset; every record must carry a target label.
    Dataset encode_dataset(std::span<const RawRecord> records) const;

    int encode_label(std::string_view value) const;

    nlohmann::json to_json() const;
    static Encoder from_json(const nlohmann::json& doc);

private:
    RecordSchema schema_;
    std::vector<FeatureBlock> blocks_;
    std::size_t dim_ = 0;
};

Encoder fit_encoder(std::span<const RawRecord> records, const RecordSchema& schema);

// ---------------------------------------------------------------------------
// Splitting and generators
// ---------------------------------------------------------------------------

struct SplitSpec {
    double test_fraction = 0.29;
    bool stratified = true;
    std::uint64_t seed = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Partition of [0, labels.size()); both sides in ascending order.
SplitIndices split_indices(std::span<const int> labels, const SplitSpec& spec);
std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, const SplitSpec& spec);

/// Two unit-variance isotropic Gaussian clouds whose means are `separation`
/// apart along the all-ones diagonal. Exactly round(n * minority_fraction)
/// rows are labelled 1.
Dataset synth_gaussian(std::size_t n, double minority_fraction, std::size_t dims,
                       double separation, std::uint64_t seed);

/// Schema-conformant vaccination-reaction records drawn from fixed
/// class-conditional frequency tables (see dataset.cpp).
std::vector<RawRecord> synth_aefi(std::size_t n, double minority_fraction,
                                  const RecordSchema& schema, std::uint64_t seed);

std::size_t minority_count(std::size_t n, double minority_fraction);

}  // namespace aefi
