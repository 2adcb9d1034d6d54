#include "aefi/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <ctime>
#include <fstream>

#include "aefi/error.hpp"
#include "aefi/text.hpp"
#include "httplib.h"

namespace aefi {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

json StoredRecord::to_json() const {
    return json{{"id", id},
                {"received_at", received_at},
                {"features", features},
                {"outcome", outcome ? json(*outcome) : json(nullptr)}};
}

StoredRecord StoredRecord::from_json(const json& doc) {
    StoredRecord r;
    r.id = doc.at("id").get<std::int64_t>();
    r.received_at = doc.at("received_at").get<std::string>();
    r.features = doc.at("features").get<std::map<std::string, std::string>>();
    if (!doc.at("outcome").is_null()) r.outcome = doc.at("outcome").get<std::string>();
    return r;
}

RecordStore::RecordStore(std::filesystem::path path) : path_(std::move(path)) {
    for (const auto& r : read_all()) {
        if (r.id <= last_id_)
            throw StorageError("record store " + path_.string() + " has non-increasing ids");
        last_id_ = r.id;
        ++count_;
    }
}

std::vector<StoredRecord> RecordStore::read_all() const {
    std::vector<StoredRecord> out;
    std::ifstream in(path_);
    if (!in) return out;  // a store that does not exist yet is empty
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            out.push_back(StoredRecord::from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw StorageError(path_.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::int64_t RecordStore::append(const std::map<std::string, std::string>& features,
                                 const std::optional<std::string>& outcome,
                                 const std::string& received_at) {
    std::lock_guard lock(mutex_);
    StoredRecord r{last_id_ + 1, received_at, features, outcome};
    const std::string line = r.to_json().dump() + "\n";

    const int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) throw StorageError("cannot open " + path_.string() + ": " + std::strerror(errno));
    std::size_t written = 0;
    while (written < line.size()) {
        const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            const int err = errno;
            ::close(fd);
            throw StorageError("cannot append to " + path_.string() + ": " + std::strerror(err));
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        const int err = errno;
        ::close(fd);
        throw StorageError("cannot sync " + path_.string() + ": " + std::strerror(err));
    }
    ::close(fd);
    last_id_ = r.id;
    ++count_;
    return r.id;
}

std::vector<StoredRecord> RecordStore::list(std::size_t limit, std::size_t offset) const {
    std::vector<StoredRecord> all;
    {
        std::lock_guard lock(mutex_);
        all = read_all();
    }
    std::vector<StoredRecord> page;
    for (std::size_t i = offset; i < all.size() && page.size() < limit; ++i)
        page.push_back(all[all.size() - 1 - i]);
    return page;
}

std::size_t RecordStore::size() const {
    std::lock_guard lock(mutex_);
    return count_;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::vector<FieldIssue> validate_features(const RecordSchema& schema, const json& features,
                                          RawRecord& out) {
    std::vector<FieldIssue> issues;
    if (!features.is_object()) {
        issues.push_back({"features", "must be an object of feature values"});
        return issues;
    }
    for (const auto& [key, value] : features.items())
        if (!schema.find(key)) issues.push_back({key, "is not a field of the record schema"});

    out.values.clear();
    for (const auto& f : schema.features) {
        auto it = features.find(f.name);
        if (it == features.end() || it->is_null()) {
            issues.push_back({f.name, "is required"});
            continue;
        }
        std::string text;
        if (it->is_string()) {
            text = std::string(trim(it->get<std::string>()));
        } else if (it->is_number() && f.kind != FeatureKind::categorical) {
            text = format_number(it->get<double>());
        } else {
            issues.push_back({f.name, "must be a string"});
            continue;
        }
        if (text.empty()) {
            issues.push_back({f.name, "is required"});
            continue;
        }
        if (f.kind == FeatureKind::numeric) {
            if (!parse_number(text)) {
                issues.push_back({f.name, "must be a number"});
                continue;
            }
            out.values[f.name] = text;
        } else {
            auto level = f.canonical_level(text);
            if (!level) {
                std::string allowed;
                for (const auto& l : f.levels) allowed += (allowed.empty() ? "" : ", ") + l;
                issues.push_back({f.name, "must be one of: " + allowed});
                continue;
            }
            out.values[f.name] = *level;
        }
    }
    return issues;
}

namespace {

ApiResponse error_response(int status, const std::string& kind, const std::string& message) {
    return {status, json{{"error", kind}, {"message", message}}};
}

ApiResponse validation_response(const std::vector<FieldIssue>& issues) {
    json fields = json::array();
    for (const auto& i : issues) fields.push_back(json{{"field", i.field}, {"message", i.message}});
    return {422, json{{"error", "validation"}, {"fields", fields}}};
}

std::optional<std::size_t> parse_count(const std::optional<std::string>& text, std::size_t fallback,
                                       bool& ok) {
    if (!text) return fallback;
    const auto v = parse_number(*text);
    if (!v || *v < 0 || *v != static_cast<double>(static_cast<std::size_t>(*v))) {
        ok = false;
        return std::nullopt;
    }
    return static_cast<std::size_t>(*v);
}

}  // namespace

std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------
// Core
// ---------------------------------------------------------------------------

ServiceCore::ServiceCore(RecordSchema schema, std::filesystem::path store_path,
                         std::function<std::string()> clock)
    : schema_(std::move(schema)), store_(std::move(store_path)), clock_(std::move(clock)) {
    schema_.validate();
}

void ServiceCore::set_bundle(ModelBundle bundle) {
    auto next = std::make_shared<const ModelBundle>(std::move(bundle));
    std::lock_guard lock(bundle_mutex_);
    bundle_ = std::move(next);
}

std::shared_ptr<const ModelBundle> ServiceCore::bundle() const {
    std::lock_guard lock(bundle_mutex_);
    return bundle_;
}

json ServiceCore::reload_model(const std::filesystem::path& path) {
    ModelBundle loaded = load_bundle(path);  // throws before anything is swapped
    json meta = loaded.metadata.to_json();
    set_bundle(std::move(loaded));
    return meta;
}

ApiResponse ServiceCore::predict(const json& body) const {
    const auto snapshot = bundle();
    if (!snapshot) return error_response(503, "unavailable", "no model is loaded");
    if (!body.is_object() || !body.contains("features"))
        return validation_response({{"features", "request body must carry a features object"}});
    for (const auto& [key, value] : body.items())
        if (key != "features") return validation_response({{key, "is not a request field"}});

    RawRecord record;
    const auto issues = validate_features(snapshot->schema(), body.at("features"), record);
    if (!issues.empty()) return validation_response(issues);
    double score = 0;
    try {
        score = snapshot->score(record);
    } catch (const EncodingError& e) {
        return validation_response({{"features", e.what()}});
    } catch (const Error& e) {
        return error_response(500, "prediction", e.what());
    }
    const double threshold = snapshot->metadata.threshold;
    const auto& schema = snapshot->schema();
    return {200, json{{"label", score >= threshold ? schema.positive_level : schema.negative_level},
                      {"score", score},
                      {"threshold", threshold},
                      {"model", snapshot->metadata.to_json()}}};
}

ApiResponse ServiceCore::add_record(const json& body) {
    if (!body.is_object() || !body.contains("features"))
        return validation_response({{"features", "request body must carry a features object"}});
    std::vector<FieldIssue> issues;
    for (const auto& [key, value] : body.items())
        if (key != "features" && key != "outcome") issues.push_back({key, "is not a request field"});
    RawRecord record;
    auto feature_issues = validate_features(schema_, body.at("features"), record);
    issues.insert(issues.end(), feature_issues.begin(), feature_issues.end());
    std::optional<std::string> outcome;
    if (body.contains("outcome") && !body.at("outcome").is_null()) {
        const json& o = body.at("outcome");
        if (o.is_string() &&
            (o.get<std::string>() == schema_.positive_level || o.get<std::string>() == schema_.negative_level))
            outcome = o.get<std::string>();
        else
            issues.push_back({"outcome", "must be \"" + schema_.positive_level + "\", \"" +
                                             schema_.negative_level + "\" or null"});
    }
    if (!issues.empty()) return validation_response(issues);

    std::map<std::string, std::string> features;
    for (const auto& [k, v] : record.values) features[k] = *v;
    try {
        const auto id = store_.append(features, outcome, clock_());
        return {201, json{{"id", id}}};
    } catch (const StorageError& e) {
        return error_response(500, "storage", e.what());
    }
}

ApiResponse ServiceCore::list_records(const std::optional<std::string>& limit,
                                      const std::optional<std::string>& offset) const {
    bool ok = true;
    const auto lim = parse_count(limit, 50, ok);
    const auto off = parse_count(offset, 0, ok);
    if (!ok) return error_response(400, "bad_request", "limit and offset must be non-negative integers");
    try {
        json records = json::array();
        for (const auto& r : store_.list(*lim, *off)) records.push_back(r.to_json());
        return {200, json{{"records", records}, {"total", store_.size()}}};
    } catch (const StorageError& e) {
        return error_response(500, "storage", e.what());
    }
}

ApiResponse ServiceCore::model_info() const {
    const auto snapshot = bundle();
    if (!snapshot) return error_response(503, "unavailable", "no model is loaded");
    json meta = snapshot->metadata.to_json();
    meta["format_version"] = snapshot->format_version;
    meta["family"] = family_name(snapshot->model.model);
    meta["n_features"] = snapshot->model.n_features;
    return {200, meta};
}

ApiResponse ServiceCore::reload(const json& body) {
    if (!body.is_object() || !body.contains("path") || !body.at("path").is_string())
        return error_response(400, "bad_request", "body must be {\"path\": <bundle path>}");
    try {
        reload_model(body.at("path").get<std::string>());
    } catch (const Error& e) {
        return error_response(400, "reload_failed", e.what());
    }
    return model_info();
}

ApiResponse ServiceCore::get_schema() const { return {200, schema_.to_json()}; }

// ---------------------------------------------------------------------------
// HTTP
// ---------------------------------------------------------------------------

namespace {

void send(httplib::Response& res, const ApiResponse& api) {
    res.status = api.status;
    res.set_content(api.body.dump(), "application/json");
}

template <typename Handler>
httplib::Server::Handler json_route(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = req.body.empty() ? json::object() : json::parse(req.body);
        } catch (const json::parse_error& e) {
            send(res, error_response(400, "bad_request", std::string("body is not valid JSON: ") + e.what()));
            return;
        }
        send(res, handler(body));
    };
}

std::optional<std::string> param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    return req.get_param_value(name);
}

}  // namespace

void mount_routes(httplib::Server& server, ServiceCore& core, const std::filesystem::path& static_dir) {
    server.Post("/api/v1/predict", json_route([&core](const json& b) { return core.predict(b); }));
    server.Post("/api/v1/records", json_route([&core](const json& b) { return core.add_record(b); }));
    server.Get("/api/v1/records", [&core](const httplib::Request& req, httplib::Response& res) {
        send(res, core.list_records(param(req, "limit"), param(req, "offset")));
    });
    server.Get("/api/v1/model", [&core](const httplib::Request&, httplib::Response& res) {
        send(res, core.model_info());
    });
    server.Post("/api/v1/model/reload", json_route([&core](const json& b) { return core.reload(b); }));
    server.Get("/api/v1/schema", [&core](const httplib::Request&, httplib::Response& res) {
        send(res, core.get_schema());
    });
    server.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            std::string what = "internal error";
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                what = e.what();
            } catch (...) {
            }
            send(res, error_response(500, "internal", what));
        });
    if (!static_dir.empty() && !server.set_mount_point("/", static_dir.string()))
        throw ValidationError("static asset directory " + static_dir.string() + " does not exist");
}

void serve(ServiceCore& core, const ServerOptions& options) {
    httplib::Server server;
    mount_routes(server, core, options.static_dir);
    if (!server.bind_to_port(options.host, options.port))
        throw Error("cannot listen on " + options.host + ":" + std::to_string(options.port));
    server.listen_after_bind();
}

}  // namespace aefi
