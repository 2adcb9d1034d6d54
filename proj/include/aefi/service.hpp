#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "aefi/bundle.hpp"
#include "aefi/dataset.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace aefi {

struct StoredRecord {
    std::int64_t id = 0;
    std::string received_at;  // UTC, ISO 8601
    std::map<std::string, std::string> features;
    std::optional<std::string> outcome;

    nlohmann::json to_json() const;
    static StoredRecord from_json(const nlohmann::json& doc);
};

/// JSON-lines file that only ever grows. One mutex serializes writers, and
/// every append is flushed to disk before its id is returned.
class RecordStore {
public:
    explicit RecordStore(std::filesystem::path path);

    std::int64_t append(const std::map<std::string, std::string>& features,
                        const std::optional<std::string>& outcome, const std::string& received_at);
    /// Newest first.
    std::vector<StoredRecord> list(std::size_t limit, std::size_t offset) const;
    std::size_t size() const;
    const std::filesystem::path& path() const { return path_; }

private:
    std::vector<StoredRecord> read_all() const;

    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::int64_t last_id_ = 0;
    std::size_t count_ = 0;
};

struct FieldIssue {
    std::string field;
    std::string message;
};

/// Checks a {name: value} object against the schema: every feature present,
/// no unknown keys, numbers parse, levels are declared. On success `out`
/// holds canonical strings.
std::vector<FieldIssue> validate_features(const RecordSchema& schema, const nlohmann::json& features,
                                          RawRecord& out);

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

std::string utc_now();

/// Transport-independent request handling. Predictions read an immutable
/// bundle snapshot, so a reload never disturbs requests already running.
class ServiceCore {
public:
    ServiceCore(RecordSchema schema, std::filesystem::path store_path,
                std::function<std::string()> clock = utc_now);

    void set_bundle(ModelBundle bundle);
    std::shared_ptr<const ModelBundle> bundle() const;
    /// Loads and swaps in a bundle; on any error the current one keeps serving.
    nlohmann::json reload_model(const std::filesystem::path& path);

    const RecordSchema& schema() const { return schema_; }
    RecordStore& store() { return store_; }

    ApiResponse predict(const nlohmann::json& body) const;
    ApiResponse add_record(const nlohmann::json& body);
    ApiResponse list_records(const std::optional<std::string>& limit,
                             const std::optional<std::string>& offset) const;
    ApiResponse model_info() const;
    ApiResponse reload(const nlohmann::json& body);
    ApiResponse get_schema() const;

private:
    RecordSchema schema_;
    RecordStore store_;
    std::function<std::string()> clock_;
    mutable std::mutex bundle_mutex_;
    std::shared_ptr<const ModelBundle> bundle_;
};

/// Registers the /api/v1 routes (and the static asset directory when given).
void mount_routes(httplib::Server& server, ServiceCore& core,
                  const std::filesystem::path& static_dir = {});

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path static_dir;
};

/// Blocks until the server stops.
void serve(ServiceCore& core, const ServerOptions& options);

}  // namespace aefi
