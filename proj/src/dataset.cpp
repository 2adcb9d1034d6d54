#include "aefi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "aefi/error.hpp"
#include "aefi/random.hpp"
#include "aefi/text.hpp"

namespace aefi {

using nlohmann::json;

namespace {

const char* kind_name(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::numeric: return "numeric";
        case FeatureKind::categorical: return "categorical";
        case FeatureKind::binned: return "binned";
    }
    return "?";
}

FeatureKind parse_kind(const std::string& s) {
    if (s == "numeric") return FeatureKind::numeric;
    if (s == "categorical") return FeatureKind::categorical;
    if (s == "binned") return FeatureKind::binned;
    throw SchemaError("unknown feature kind '" + s + "'");
}

const char* policy_name(MissingPolicy p) {
    switch (p) {
        case MissingPolicy::fill_mode: return "fill_mode";
        case MissingPolicy::fill_median: return "fill_median";
        case MissingPolicy::map_to_unknown: return "map_to_unknown";
    }
    return "?";
}

MissingPolicy parse_policy(const std::string& s) {
    if (s == "fill_mode") return MissingPolicy::fill_mode;
    if (s == "fill_median") return MissingPolicy::fill_median;
    if (s == "map_to_unknown") return MissingPolicy::map_to_unknown;
    throw SchemaError("unknown missing_policy '" + s + "'");
}

FeatureSpec numeric(std::string name, std::string label, std::string unit) {
    FeatureSpec f;
    f.name = std::move(name);
    f.label = std::move(label);
    f.kind = FeatureKind::numeric;
    f.unit = std::move(unit);
    f.missing_policy = MissingPolicy::fill_median;
    return f;
}

FeatureSpec categorical(std::string name, std::string label, std::vector<std::string> levels,
                        MissingPolicy policy = MissingPolicy::fill_mode) {
    FeatureSpec f;
    f.name = std::move(name);
    f.label = std::move(label);
    f.kind = FeatureKind::categorical;
    f.levels = std::move(levels);
    f.missing_policy = policy;
    return f;
}

FeatureSpec binned(std::string name, std::string label, std::vector<std::string> levels) {
    FeatureSpec f;
    f.name = std::move(name);
    f.label = std::move(label);
    f.kind = FeatureKind::binned;
    f.levels = std::move(levels);
    for (const auto& l : f.levels)
        if (l != kUnknownLevel) f.bins.push_back(*parse_bin_label(l));
    return f;
}

}  // namespace

// ---------------------------------------------------------------------------
// FeatureSpec / RecordSchema
// ---------------------------------------------------------------------------

std::optional<Bin> parse_bin_label(std::string_view label) {
    // "<lo>-<hi><suffix>", integers, lo <= hi
    std::size_t i = 0;
    auto read_int = [&](double& out) {
        const std::size_t start = i;
        while (i < label.size() && label[i] >= '0' && label[i] <= '9') ++i;
        if (i == start) return false;
        out = *parse_number(label.substr(start, i - start));
        return true;
    };
    Bin bin;
    bin.label = std::string(label);
    if (!read_int(bin.lo)) return std::nullopt;
    if (i >= label.size() || label[i] != '-') return std::nullopt;
    ++i;
    if (!read_int(bin.hi)) return std::nullopt;
    if (bin.hi < bin.lo) return std::nullopt;
    return bin;
}

bool FeatureSpec::has_unknown() const { return level_index(kUnknownLevel).has_value(); }

std::optional<std::size_t> FeatureSpec::level_index(std::string_view level) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] == level) return i;
    return std::nullopt;
}

std::optional<std::string> FeatureSpec::canonical_level(std::string_view raw) const {
    raw = trim(raw);
    if (level_index(raw)) return std::string(raw);
    if (kind == FeatureKind::binned) {
        if (auto v = parse_number(raw)) {
            for (const auto& b : bins)
                if (*v >= b.lo && *v <= b.hi) return b.label;
        }
    }
    return std::nullopt;
}

void FeatureSpec::validate() const {
    if (name.empty()) throw SchemaError("feature with empty name");
    if (kind == FeatureKind::numeric) {
        if (!levels.empty()) throw SchemaError("numeric feature '" + name + "' declares levels");
        if (missing_policy == MissingPolicy::map_to_unknown)
            throw SchemaError("numeric feature '" + name + "' cannot map to Unknown");
        return;
    }
    if (levels.empty()) throw SchemaError("feature '" + name + "' has no levels");
    std::set<std::string> seen;
    for (const auto& l : levels) {
        if (l.empty()) throw SchemaError("feature '" + name + "' has an empty level");
        if (!seen.insert(l).second)
            throw SchemaError("feature '" + name + "' repeats level '" + l + "'");
    }
    if (missing_policy == MissingPolicy::fill_median)
        throw SchemaError("feature '" + name + "': fill_median needs a numeric feature");
    if (missing_policy == MissingPolicy::map_to_unknown && !has_unknown())
        throw SchemaError("feature '" + name + "': map_to_unknown needs an \"Unknown\" level");
    if (kind == FeatureKind::binned) {
        std::size_t expected = levels.size() - (has_unknown() ? 1 : 0);
        if (bins.size() != expected)
            throw SchemaError("feature '" + name + "' has unparseable bin labels");
        for (std::size_t i = 1; i < bins.size(); ++i)
            if (bins[i].lo <= bins[i - 1].hi)
                throw SchemaError("feature '" + name + "' has overlapping or unordered bins");
    }
}

void RecordSchema::validate() const {
    if (features.empty()) throw SchemaError("schema has no features");
    std::set<std::string> names;
    for (const auto& f : features) {
        f.validate();
        if (!names.insert(f.name).second) throw SchemaError("duplicate feature '" + f.name + "'");
    }
    if (target.empty()) throw SchemaError("schema has no target");
    if (names.count(target)) throw SchemaError("target '" + target + "' is also a feature");
    if (positive_level.empty() || negative_level.empty() || positive_level == negative_level)
        throw SchemaError("target levels must be two distinct values");
    if (!(max_age_days > 0)) throw SchemaError("max_age_days must be positive");
    if (!age_feature.empty() && !names.count(age_feature))
        throw SchemaError("age feature '" + age_feature + "' is not in the schema");
}

const FeatureSpec* RecordSchema::find(std::string_view name) const {
    for (const auto& f : features)
        if (f.name == name) return &f;
    return nullptr;
}

RecordSchema RecordSchema::aefi_default() {
    RecordSchema s;
    const std::vector<std::string> reaction{"Normal", "Mild", "Moderate", "Severe"};
    s.features = {
        numeric("vaccination_times", "Vaccination times", "doses"),
        numeric("vaccination_dose", "Vaccination dose", "mL"),
        categorical("gender", "Gender", {"Male", "Female"}),
        categorical("fever", "Fever", reaction),
        categorical("local_redness_swelling", "Local redness and swelling", reaction),
        categorical("local_induration", "Local induration", reaction),
        binned("vaccination_age", "Vaccination age",
               {"0-258days", "259-365days", "366-730days", "731-1095days", "1096-2190days",
                "2191-6570days"}),
        categorical("inoculation_organization_form", "Inoculation organization form",
                    {"Fixed clinic", "Outreach session", "School campaign", "Unknown"},
                    MissingPolicy::map_to_unknown),
        categorical("vaccine_name", "Vaccine name",
                    {"PPV23", "HepB", "DTaP", "MMR", "JE", "MPSV-A", "BCG", "OPV", "Varicella",
                     "Influenza"}),
        categorical("inoculation_route", "Inoculation route",
                    {"Intramuscular", "Subcutaneous", "Oral", "Intradermal"}),
        binned("inoculation_interval", "Inoculation interval",
               {"0-9days", "10-29days", "30-89days", "90-3650days"}),
        categorical("inoculation_site", "Inoculation site",
                    {"Deltoid muscle of upper arm", "Anterolateral thigh", "Buttock",
                     "Oral cavity", "Forearm"}),
    };
    return s;
}

json RecordSchema::to_json() const {
    json features_doc = json::array();
    for (const auto& f : features) {
        json doc{{"name", f.name},
                 {"label", f.label.empty() ? f.name : f.label},
                 {"kind", kind_name(f.kind)},
                 {"missing_policy", policy_name(f.missing_policy)}};
        if (f.kind == FeatureKind::numeric)
            doc["unit"] = f.unit;
        else
            doc["levels"] = f.levels;
        features_doc.push_back(std::move(doc));
    }
    return json{{"features", std::move(features_doc)},
                {"target", {{"name", target}, {"levels", {positive_level, negative_level}}}},
                {"age_feature", age_feature},
                {"max_age_days", max_age_days}};
}

RecordSchema RecordSchema::from_json(const json& doc) {
    RecordSchema s;
    try {
        for (const auto& fd : doc.at("features")) {
            FeatureSpec f;
            f.name = fd.at("name").get<std::string>();
            f.label = fd.value("label", f.name);
            f.kind = parse_kind(fd.at("kind").get<std::string>());
            f.unit = fd.value("unit", std::string{});
            if (fd.contains("levels")) f.levels = fd.at("levels").get<std::vector<std::string>>();
            const std::string default_policy =
                f.kind == FeatureKind::numeric ? "fill_median" : "fill_mode";
            f.missing_policy = parse_policy(fd.value("missing_policy", default_policy));
            if (f.kind == FeatureKind::binned) {
                for (const auto& l : f.levels) {
                    if (l == kUnknownLevel) continue;
                    auto bin = parse_bin_label(l);
                    if (!bin) throw SchemaError("feature '" + f.name + "': bad bin label '" + l + "'");
                    f.bins.push_back(*bin);
                }
            }
            s.features.push_back(std::move(f));
        }
        if (doc.contains("target")) {
            const auto& t = doc.at("target");
            if (t.is_string()) {
                s.target = t.get<std::string>();
            } else {
                s.target = t.value("name", s.target);
                if (t.contains("levels")) {
                    auto levels = t.at("levels").get<std::vector<std::string>>();
                    if (levels.size() != 2) throw SchemaError("target must have exactly two levels");
                    s.positive_level = levels[0];
                    s.negative_level = levels[1];
                }
            }
        }
        s.age_feature = doc.value("age_feature", s.age_feature);
        s.max_age_days = doc.value("max_age_days", s.max_age_days);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed schema document: ") + e.what());
    }
    s.validate();
    return s;
}

RecordSchema RecordSchema::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open schema file " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw SchemaError("schema file " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(doc);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

std::optional<std::string> RawRecord::get(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) return std::nullopt;
    return it->second;
}

namespace {

// Splits one logical CSV line. Quoted fields may contain commas and doubled
// quotes; embedded newlines are not supported.
std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

std::vector<RawRecord> parse_csv(std::istream& in, const RecordSchema& schema) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("CSV input is empty (no header)");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = std::string(trim(h));

    auto column_of = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    };
    std::vector<std::pair<const FeatureSpec*, std::size_t>> columns;
    for (const auto& f : schema.features) {
        auto col = column_of(f.name);
        if (!col) throw SchemaError("CSV is missing required column '" + f.name + "'");
        columns.emplace_back(&f, *col);
    }
    const auto target_col = column_of(schema.target);

    std::vector<RawRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(cells.size()));
        RawRecord rec;
        rec.id = static_cast<std::int64_t>(records.size());
        for (const auto& [spec, col] : columns) {
            std::string_view cell = trim(cells[col]);
            if (cell.empty()) {
                rec.values[spec->name] = std::nullopt;
                continue;
            }
            if (spec->kind == FeatureKind::numeric && !parse_number(cell))
                throw ParseError("line " + std::to_string(line_no) + ", column '" + spec->name +
                                 "': cannot parse '" + std::string(cell) + "' as a number");
            rec.values[spec->name] = std::string(cell);
        }
        if (target_col) {
            std::string_view cell = trim(cells[*target_col]);
            rec.values[schema.target] =
                cell.empty() ? std::nullopt : std::optional<std::string>(std::string(cell));
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<RawRecord> load_csv(const std::filesystem::path& path, const RecordSchema& schema) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open CSV file " + path.string());
    return parse_csv(in, schema);
}

void write_csv(const std::filesystem::path& path, std::span<const RawRecord> records,
               const RecordSchema& schema) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StorageError("cannot write CSV file " + path.string());
    for (const auto& f : schema.features) out << csv_escape(f.name) << ',';
    out << csv_escape(schema.target) << '\n';
    for (const auto& r : records) {
        for (const auto& f : schema.features) out << csv_escape(r.get(f.name).value_or("")) << ',';
        out << csv_escape(r.get(schema.target).value_or("")) << '\n';
    }
    if (!out) throw StorageError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

std::optional<double> age_in_days(const FeatureSpec& spec, std::string_view raw) {
    if (auto v = parse_number(raw)) return v;
    if (spec.kind == FeatureKind::binned) {
        for (const auto& b : spec.bins)
            if (b.label == trim(raw)) return b.lo;
    }
    return std::nullopt;
}

namespace {

std::string mode_of(const FeatureSpec& spec, std::span<const RawRecord> records) {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : records) {
        auto v = r.get(spec.name);
        if (!v) continue;
        std::string key = *v;
        if (spec.kind == FeatureKind::numeric) {
            key = format_number(*parse_number(*v));
        } else if (auto canon = spec.canonical_level(*v)) {
            key = *canon;
        }
        ++counts[key];
    }
    if (counts.empty())
        throw CleaningError("feature '" + spec.name + "' has no observed values; no mode exists");
    // ties: declared level order, then numeric/lexicographic order
    auto rank = [&](const std::string& key) {
        if (auto i = spec.level_index(key)) return static_cast<double>(*i);
        return static_cast<double>(spec.levels.size());
    };
    auto less = [&](const std::string& a, const std::string& b) {
        if (rank(a) != rank(b)) return rank(a) < rank(b);
        if (spec.kind == FeatureKind::numeric) return *parse_number(a) < *parse_number(b);
        return a < b;
    };
    const std::string* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [key, count] : counts) {
        if (!best || count > best_count || (count == best_count && less(key, *best))) {
            best = &key;
            best_count = count;
        }
    }
    return *best;
}

std::string median_of(const FeatureSpec& spec, std::span<const RawRecord> records) {
    std::vector<double> values;
    for (const auto& r : records)
        if (auto v = r.get(spec.name)) values.push_back(*parse_number(*v));
    if (values.empty())
        throw CleaningError("feature '" + spec.name + "' has no observed values; no median exists");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const double median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    return format_number(median);
}

}  // namespace

CleanResult clean(std::span<const RawRecord> records, const RecordSchema& schema) {
    CleanResult result;
    const FeatureSpec* age = schema.age_feature.empty() ? nullptr : schema.find(schema.age_feature);
    for (const auto& r : records) {
        if (age) {
            if (auto raw = r.get(age->name)) {
                auto days = age_in_days(*age, *raw);
                if (days && *days > schema.max_age_days) {
                    ++result.report.dropped;
                    continue;
                }
            }
        }
        result.records.push_back(r);
    }

    for (const auto& spec : schema.features) {
        const bool any_missing = std::any_of(result.records.begin(), result.records.end(),
                                             [&](const RawRecord& r) { return !r.get(spec.name); });
        if (!any_missing) continue;
        std::string fill;
        switch (spec.missing_policy) {
            case MissingPolicy::fill_mode: fill = mode_of(spec, result.records); break;
            case MissingPolicy::fill_median:
                if (spec.kind != FeatureKind::numeric)
                    throw CleaningError("fill_median on non-numeric feature '" + spec.name + "'");
                fill = median_of(spec, result.records);
                break;
            case MissingPolicy::map_to_unknown: fill = std::string(kUnknownLevel); break;
        }
        for (auto& r : result.records) {
            auto& slot = r.values[spec.name];
            if (!slot) {
                slot = fill;
                ++result.report.filled;
                ++result.report.filled_by_feature[spec.name];
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

void Matrix::append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) throw ValidationError("row width mismatch in Matrix::append_row");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

std::size_t Dataset::count(int label) const {
    return static_cast<std::size_t>(std::count(y.begin(), y.end(), label));
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.x = Matrix(rows.size(), cols());
    out.y.reserve(rows.size());
    out.ids.reserve(rows.size());
    out.columns = columns;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = row(rows[i]);
        std::copy(src.begin(), src.end(), out.x.row(i).begin());
        out.y.push_back(y[rows[i]]);
        out.ids.push_back(ids[rows[i]]);
    }
    return out;
}

void Dataset::validate() const {
    if (x.rows() != y.size() || ids.size() != y.size())
        throw ValidationError("dataset row counts disagree");
    if (!columns.empty() && columns.size() != x.cols())
        throw ValidationError("dataset column names disagree with width");
    for (int label : y)
        if (label != 0 && label != 1) throw ValidationError("dataset labels must be 0 or 1");
    for (double v : x.data())
        if (!std::isfinite(v)) throw ValidationError("dataset contains a non-finite value");
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

Encoder::Encoder(RecordSchema schema, std::vector<FeatureBlock> blocks)
    : schema_(std::move(schema)), blocks_(std::move(blocks)) {
    dim_ = 0;
    for (auto& b : blocks_) {
        b.offset = dim_;
        dim_ += b.width;
    }
}

std::vector<std::string> Encoder::column_names() const {
    std::vector<std::string> names;
    names.reserve(dim_);
    for (const auto& b : blocks_) {
        if (b.kind == FeatureKind::numeric)
            names.push_back(b.name);
        else
            for (const auto& l : b.levels) names.push_back(b.name + "=" + l);
    }
    return names;
}

std::vector<double> Encoder::encode(const RawRecord& record) const {
    std::vector<double> row(dim_, 0.0);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const auto& block = blocks_[i];
        const auto& spec = schema_.features[i];
        auto raw = record.get(block.name);
        if (!raw) throw EncodingError("feature '" + block.name + "' is missing");
        if (block.kind == FeatureKind::numeric) {
            auto v = parse_number(*raw);
            if (!v)
                throw EncodingError("feature '" + block.name + "': '" + *raw + "' is not a number");
            row[block.offset] = (*v - block.mean) / block.sd;
            continue;
        }
        std::string level = spec.canonical_level(*raw).value_or(std::string(trim(*raw)));
        auto it = std::find(block.levels.begin(), block.levels.end(), level);
        if (it == block.levels.end())
            it = std::find(block.levels.begin(), block.levels.end(), kUnknownLevel);
        if (it == block.levels.end())
            throw EncodingError("feature '" + block.name + "': unseen value '" + *raw + "'");
        row[block.offset + static_cast<std::size_t>(it - block.levels.begin())] = 1.0;
    }
    return row;
}

int Encoder::encode_label(std::string_view value) const {
    value = trim(value);
    if (value == schema_.positive_level) return 1;
    if (value == schema_.negative_level) return 0;
    throw EncodingError("target '" + schema_.target + "': unknown value '" + std::string(value) +
                        "'");
}

Dataset Encoder::encode_dataset(std::span<const RawRecord> records) const {
    Dataset ds;
    ds.x = Matrix(0, dim_);
    ds.columns = column_names();
    for (const auto& r : records) {
        auto label = r.get(schema_.target);
        if (!label) throw EncodingError("record " + std::to_string(r.id) + " has no target value");
        ds.y.push_back(encode_label(*label));
        ds.x.append_row(encode(r));
        ds.ids.push_back(r.id);
    }
    return ds;
}

json Encoder::to_json() const {
    json blocks = json::array();
    for (const auto& b : blocks_) {
        json doc{{"name", b.name}, {"kind", kind_name(b.kind)}};
        if (b.kind == FeatureKind::numeric) {
            doc["mean"] = b.mean;
            doc["sd"] = b.sd;
        } else {
            doc["levels"] = b.levels;
        }
        blocks.push_back(std::move(doc));
    }
    return json{{"schema", schema_.to_json()}, {"blocks", std::move(blocks)}};
}

Encoder Encoder::from_json(const json& doc) {
    RecordSchema schema = RecordSchema::from_json(doc.at("schema"));
    std::vector<FeatureBlock> blocks;
    for (const auto& bd : doc.at("blocks")) {
        FeatureBlock b;
        b.name = bd.at("name").get<std::string>();
        b.kind = parse_kind(bd.at("kind").get<std::string>());
        if (b.kind == FeatureKind::numeric) {
            b.mean = bd.at("mean").get<double>();
            b.sd = bd.at("sd").get<double>();
            b.width = 1;
        } else {
            b.levels = bd.at("levels").get<std::vector<std::string>>();
            b.width = b.levels.size();
        }
        blocks.push_back(std::move(b));
    }
    if (blocks.size() != schema.features.size())
        throw SchemaError("encoder blocks do not match schema features");
    for (std::size_t i = 0; i < blocks.size(); ++i)
        if (blocks[i].name != schema.features[i].name)
            throw SchemaError("encoder block order does not match schema");
    return Encoder(std::move(schema), std::move(blocks));
}

Encoder fit_encoder(std::span<const RawRecord> records, const RecordSchema& schema) {
    if (records.empty()) throw EncodingError("cannot fit an encoder on zero records");
    std::vector<FeatureBlock> blocks;
    for (const auto& spec : schema.features) {
        FeatureBlock b;
        b.name = spec.name;
        b.kind = spec.kind;
        if (spec.kind == FeatureKind::numeric) {
            double sum = 0;
            std::vector<double> values;
            values.reserve(records.size());
            for (const auto& r : records) {
                auto raw = r.get(spec.name);
                if (!raw) throw EncodingError("feature '" + spec.name + "' is missing; clean first");
                auto v = parse_number(*raw);
                if (!v)
                    throw EncodingError("feature '" + spec.name + "': '" + *raw +
                                        "' is not a number");
                values.push_back(*v);
                sum += *v;
            }
            b.mean = sum / static_cast<double>(values.size());
            double ss = 0;
            for (double v : values) ss += (v - b.mean) * (v - b.mean);
            const double sd = std::sqrt(ss / static_cast<double>(values.size()));
            b.sd = sd > 0 ? sd : 1.0;
            b.width = 1;
        } else {
            b.levels = spec.levels;
            std::set<std::string> extra;
            for (const auto& r : records) {
                auto raw = r.get(spec.name);
                if (!raw) throw EncodingError("feature '" + spec.name + "' is missing; clean first");
                if (spec.canonical_level(*raw)) continue;
                // binned values outside every bin are never given their own column
                if (spec.kind == FeatureKind::categorical) extra.insert(std::string(trim(*raw)));
            }
            b.levels.insert(b.levels.end(), extra.begin(), extra.end());
            b.width = b.levels.size();
        }
        blocks.push_back(std::move(b));
    }
    return Encoder(schema, std::move(blocks));
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

SplitIndices split_indices(std::span<const int> labels, const SplitSpec& spec) {
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
        throw SplitError("test_fraction must lie in (0, 1)");
    Rng rng(spec.seed);
    SplitIndices out;
    auto take = [&](std::vector<std::size_t> pool, bool clamp_both) {
        rng.shuffle(pool);
        auto t = static_cast<std::size_t>(
            std::llround(static_cast<double>(pool.size()) * spec.test_fraction));
        if (clamp_both) t = std::clamp<std::size_t>(t, 1, pool.size() - 1);
        out.test.insert(out.test.end(), pool.begin(), pool.begin() + static_cast<long>(t));
        out.train.insert(out.train.end(), pool.begin() + static_cast<long>(t), pool.end());
    };
    if (spec.stratified) {
        for (int cls : {0, 1}) {
            std::vector<std::size_t> pool;
            for (std::size_t i = 0; i < labels.size(); ++i)
                if (labels[i] == cls) pool.push_back(i);
            if (pool.size() < 2)
                throw SplitError("stratified split needs at least 2 rows of class " +
                                 std::to_string(cls) + ", found " + std::to_string(pool.size()));
            take(std::move(pool), true);
        }
    } else {
        if (labels.size() < 2) throw SplitError("split needs at least 2 rows");
        std::vector<std::size_t> pool(labels.size());
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        take(std::move(pool), true);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, const SplitSpec& spec) {
    auto idx = split_indices(dataset.y, spec);
    return {dataset.subset(idx.train), dataset.subset(idx.test)};
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

std::size_t minority_count(std::size_t n, double minority_fraction) {
    if (!(minority_fraction > 0.0 && minority_fraction < 0.5))
        throw ValidationError("minority_fraction must lie in (0, 0.5)");
    if (static_cast<double>(n) * minority_fraction < 2.0)
        throw ValidationError("n * minority_fraction must be at least 2");
    return static_cast<std::size_t>(std::llround(static_cast<double>(n) * minority_fraction));
}

namespace {

std::vector<int> shuffled_labels(std::size_t n, std::size_t minority, Rng& rng) {
    std::vector<int> labels(n, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<long>(minority), 1);
    rng.shuffle(labels);
    return labels;
}

}  // namespace

Dataset synth_gaussian(std::size_t n, double minority_fraction, std::size_t dims,
                       double separation, std::uint64_t seed) {
    if (dims == 0) throw ValidationError("dims must be positive");
    if (!(separation >= 0.0)) throw ValidationError("separation must be non-negative");
    const std::size_t minority = minority_count(n, minority_fraction);
    Rng rng(seed);
    Dataset ds;
    ds.y = shuffled_labels(n, minority, rng);
    ds.x = Matrix(n, dims);
    const double shift = separation / std::sqrt(static_cast<double>(dims));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dims; ++j)
            ds.x(i, j) = rng.normal() + (ds.y[i] == 1 ? shift : 0.0);
        ds.ids.push_back(static_cast<std::int64_t>(i));
    }
    for (std::size_t j = 0; j < dims; ++j) ds.columns.push_back("x" + std::to_string(j));
    return ds;
}

namespace {

// Class-conditional frequency tables for the default schema. Each entry is
// {majority weights, minority weights}, indexed like the feature's levels
// (numeric features list their value set explicitly). Hospitalized children
// skew towards stronger reactions, younger ages and shorter intervals.
struct FrequencyTable {
    std::vector<std::string> values;
    std::vector<double> majority;
    std::vector<double> minority;
};

const std::map<std::string, FrequencyTable>& aefi_tables() {
    static const std::map<std::string, FrequencyTable> tables{
        {"vaccination_times", {{"1", "2", "3", "4"}, {.40, .30, .20, .10}, {.25, .25, .25, .25}}},
        {"vaccination_dose", {{"0.2", "0.5", "1"}, {.20, .60, .20}, {.10, .50, .40}}},
        {"gender", {{}, {.52, .48}, {.60, .40}}},
        {"fever", {{}, {.55, .25, .15, .05}, {.20, .20, .30, .30}}},
        {"local_redness_swelling", {{}, {.60, .25, .10, .05}, {.35, .25, .20, .20}}},
        {"local_induration", {{}, {.70, .20, .07, .03}, {.45, .25, .15, .15}}},
        {"vaccination_age", {{}, {.30, .15, .20, .12, .13, .10}, {.45, .15, .15, .10, .10, .05}}},
        {"inoculation_organization_form", {{}, {.70, .15, .10, .05}, {.60, .20, .10, .10}}},
        {"vaccine_name",
         {{},
          {.05, .15, .20, .12, .10, .10, .08, .08, .06, .06},
          {.10, .05, .25, .15, .15, .10, .05, .03, .06, .06}}},
        {"inoculation_route", {{}, {.55, .30, .10, .05}, {.60, .25, .05, .10}}},
        {"inoculation_interval", {{}, {.20, .30, .30, .20}, {.35, .30, .20, .15}}},
        {"inoculation_site", {{}, {.50, .20, .15, .10, .05}, {.50, .25, .10, .05, .10}}},
    };
    return tables;
}

std::size_t draw_index(const std::vector<double>& weights, Rng& rng) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    return weights.size() - 1;
}

// Features that occasionally arrive blank, so generated files exercise cleaning.
constexpr double kMissingRate = 0.01;
const std::set<std::string> kSometimesMissing{"gender", "inoculation_organization_form"};

}  // namespace

std::vector<RawRecord> synth_aefi(std::size_t n, double minority_fraction,
                                  const RecordSchema& schema, std::uint64_t seed) {
    schema.validate();
    const std::size_t minority = minority_count(n, minority_fraction);
    Rng rng(seed);
    const auto labels = shuffled_labels(n, minority, rng);
    const auto& tables = aefi_tables();

    std::vector<RawRecord> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        RawRecord rec;
        rec.id = static_cast<std::int64_t>(i);
        const bool yes = labels[i] == 1;
        for (const auto& spec : schema.features) {
            std::vector<std::string> values =
                spec.kind == FeatureKind::numeric ? std::vector<std::string>{} : spec.levels;
            std::vector<double> weights;
            auto t = tables.find(spec.name);
            if (t != tables.end()) {
                if (!t->second.values.empty()) values = t->second.values;
                weights = yes ? t->second.minority : t->second.majority;
                if (spec.kind != FeatureKind::numeric) weights.resize(values.size(), 0.0);
            }
            std::string value;
            if (spec.kind == FeatureKind::numeric && values.empty()) {
                value = format_number(std::round(rng.normal() * 1000.0) / 1000.0);
            } else {
                if (weights.size() != values.size()) weights.assign(values.size(), 1.0);
                const std::size_t k = draw_index(weights, rng);
                value = values[k];
                if (spec.kind == FeatureKind::binned && spec.name == schema.age_feature) {
                    // ages are emitted as day counts inside the chosen bin
                    const Bin& bin = spec.bins[k];
                    const auto span = static_cast<std::uint64_t>(bin.hi - bin.lo) + 1;
                    value = format_number(bin.lo + static_cast<double>(rng.below(span)));
                }
            }
            const bool drop = kSometimesMissing.count(spec.name) && rng.uniform() < kMissingRate;
            rec.values[spec.name] = drop ? std::nullopt : std::optional<std::string>(value);
        }
        rec.values[schema.target] = yes ? schema.positive_level : schema.negative_level;
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace aefi
