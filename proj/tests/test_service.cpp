#include <algorithm>
#include <atomic>
#include <thread>

#include "aefi/error.hpp"
#include "aefi/service.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "httplib.h"

using namespace aefi;
using nlohmann::json;

namespace {

json features_of(const RawRecord& r) {
    json f = json::object();
    for (const auto& [k, v] : r.values)
        if (v) f[k] = *v;
    return f;
}

json form_body() { return json{{"features", features_of(testing::form_example())}}; }

std::string fixed_clock() { return "2024-05-01T12:00:00Z"; }

ModelBundle constant_bundle(double score, double threshold) {
    auto bundle = testing::trained_bundle("decision_tree", {{"max_depth", std::int64_t{1}}});
    bundle.model.model = ExternalModel{"constant", [score](std::span<const double>) { return score; }};
    bundle.metadata.threshold = threshold;
    return bundle;
}

std::size_t file_lines(const std::filesystem::path& p) {
    const auto text = testing::read_file(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_SUITE("service") {
    TEST_CASE("predict") {
        const auto dir = testing::scratch_dir("svc_predict");
        ServiceCore core(RecordSchema::aefi_default(), dir / "records.jsonl", fixed_clock);

        SUBCASE("no model loaded") {
            CHECK(core.predict(form_body()).status == 503);
            CHECK(core.model_info().status == 503);
        }
        SUBCASE("the form example gets a consistent answer") {
            core.set_bundle(testing::trained_bundle("rusboost", {{"rounds", std::int64_t{5}}}));
            const auto res = core.predict(form_body());
            REQUIRE(res.status == 200);
            const double score = res.body["score"];
            const double threshold = res.body["threshold"];
            const std::string label = res.body["label"];
            CHECK((label == "Yes" || label == "No"));
            CHECK((label == "Yes") == (score >= threshold));
            CHECK(score >= 0);
            CHECK(score <= 1);
            CHECK(res.body["model"]["algorithm"] == "rusboost");
        }
        SUBCASE("missing gender is named") {
            core.set_bundle(testing::trained_bundle("decision_tree", {}));
            auto body = form_body();
            body["features"].erase("gender");
            const auto res = core.predict(body);
            CHECK(res.status == 422);
            CHECK(res.body["error"] == "validation");
            REQUIRE(res.body["fields"].size() == 1);
            CHECK(res.body["fields"][0]["field"] == "gender");
        }
        SUBCASE("bad values and unknown fields are named") {
            core.set_bundle(testing::trained_bundle("decision_tree", {}));
            auto body = form_body();
            body["features"]["vaccination_dose"] = "lots";
            body["features"]["vaccine_name"] = "XYZ";
            body["features"]["shoe_size"] = "9";
            const auto res = core.predict(body);
            CHECK(res.status == 422);
            std::set<std::string> named;
            for (const auto& f : res.body["fields"]) named.insert(f["field"]);
            CHECK(named == std::set<std::string>{"vaccination_dose", "vaccine_name", "shoe_size"});
        }
        SUBCASE("numbers may be sent as numbers") {
            core.set_bundle(testing::trained_bundle("decision_tree", {}));
            auto body = form_body();
            body["features"]["vaccination_dose"] = 0.5;
            body["features"]["vaccination_age"] = 100;  // falls in the first age bin
            CHECK(core.predict(body).status == 200);
        }
        SUBCASE("a score equal to the threshold is positive") {
            core.set_bundle(constant_bundle(0.37, 0.37));
            const auto res = core.predict(form_body());
            REQUIRE(res.status == 200);
            CHECK(res.body["label"] == "Yes");
            core.set_bundle(constant_bundle(0.369, 0.37));
            CHECK(core.predict(form_body()).body["label"] == "No");
        }
        SUBCASE("schema endpoint lists the twelve fields") {
            const auto res = core.get_schema();
            CHECK(res.status == 200);
            CHECK(res.body["features"].size() == 12);
        }
    }

    TEST_CASE("record store") {
        const auto dir = testing::scratch_dir("svc_store");
        const auto path = dir / "records.jsonl";
        ServiceCore core(RecordSchema::aefi_default(), path, fixed_clock);

        SUBCASE("sequential ids and paging") {
            CHECK(core.list_records(std::nullopt, std::nullopt).body["records"].empty());
            auto body = form_body();
            body["outcome"] = "No";
            CHECK(core.add_record(body).body["id"] == 1);
            body["outcome"] = nullptr;
            CHECK(core.add_record(body).body["id"] == 2);
            CHECK(file_lines(path) == 2);
            for (int i = 0; i < 3; ++i) core.add_record(body);

            const auto page = core.list_records("2", std::nullopt);
            CHECK(page.status == 200);
            CHECK(page.body["total"] == 5);
            REQUIRE(page.body["records"].size() == 2);
            CHECK(page.body["records"][0]["id"] == 5);
            CHECK(page.body["records"][1]["id"] == 4);
            CHECK(core.list_records("10", "7").body["records"].empty());
            CHECK(core.list_records("-1", std::nullopt).status == 400);
            CHECK(core.list_records("abc", std::nullopt).status == 400);

            const auto first = core.list_records("1", "4").body["records"][0];
            CHECK(first["id"] == 1);
            CHECK(first["outcome"] == "No");
            CHECK(first["received_at"] == fixed_clock());
            CHECK(first["features"]["gender"] == "Male");
        }
        SUBCASE("bad outcomes and features are rejected without writing") {
            auto body = form_body();
            body["outcome"] = "Maybe";
            CHECK(core.add_record(body).status == 422);
            body = form_body();
            body["features"].erase("fever");
            CHECK(core.add_record(body).status == 422);
            CHECK_FALSE((std::filesystem::exists(path) && file_lines(path) > 0));
        }
        SUBCASE("the file only grows") {
            for (int i = 0; i < 3; ++i) core.add_record(form_body());
            const auto before = testing::read_file(path);
            for (int i = 0; i < 3; ++i) core.add_record(form_body());
            const auto after = testing::read_file(path);
            CHECK(after.size() > before.size());
            CHECK(after.compare(0, before.size(), before) == 0);
        }
        SUBCASE("a reopened store continues the id sequence") {
            core.add_record(form_body());
            core.add_record(form_body());
            ServiceCore reopened(RecordSchema::aefi_default(), path, fixed_clock);
            CHECK(reopened.add_record(form_body()).body["id"] == 3);
        }
    }

    TEST_CASE("concurrent appends get consecutive ids") {
        const auto dir = testing::scratch_dir("svc_concurrent");
        const auto path = dir / "records.jsonl";
        ServiceCore core(RecordSchema::aefi_default(), path, fixed_clock);
        std::vector<std::int64_t> ids(100, 0);
        std::vector<std::thread> workers;
        for (int t = 0; t < 100; ++t)
            workers.emplace_back([&, t] { ids[static_cast<std::size_t>(t)] = core.add_record(form_body()).body["id"]; });
        for (auto& w : workers) w.join();
        std::sort(ids.begin(), ids.end());
        for (std::size_t i = 0; i < 100; ++i) CHECK(ids[i] == static_cast<std::int64_t>(i + 1));
        CHECK(file_lines(path) == 100);
        CHECK(core.store().size() == 100);
    }

    TEST_CASE("reloading bundles") {
        const auto dir = testing::scratch_dir("svc_reload");
        ServiceCore core(RecordSchema::aefi_default(), dir / "records.jsonl", fixed_clock);
        const auto a = testing::trained_bundle("logistic_regression", {}, 1);
        auto b = testing::trained_bundle("logistic_regression", {{"l2", 0.5}}, 2);
        b.metadata.algorithm = "second";
        save_bundle(dir / "a.json", a);
        save_bundle(dir / "b.json", b);
        testing::write_file(dir / "corrupt.json", "{\"format_version\": 1, \"schema\": ");

        REQUIRE(core.reload(json{{"path", (dir / "a.json").string()}}).status == 200);
        const auto info = core.model_info().body;
        CHECK(info["family"] == "logistic");

        SUBCASE("same bundle keeps the metadata") {
            CHECK(core.reload(json{{"path", (dir / "a.json").string()}}).body == info);
        }
        SUBCASE("corrupt bundle is refused and the old one keeps serving") {
            const auto before = core.predict(form_body()).body;
            const auto res = core.reload(json{{"path", (dir / "corrupt.json").string()}});
            CHECK(res.status == 400);
            CHECK(core.model_info().body == info);
            CHECK(core.predict(form_body()).body == before);
            CHECK(core.reload(json{{"nope", 1}}).status == 400);
        }
        SUBCASE("requests see either the old or the new model, switching once") {
            const double score_a = core.predict(form_body()).body["score"];
            const double score_b = b.score(testing::form_example());
            REQUIRE(score_a != score_b);

            std::atomic<bool> done{false};
            std::vector<std::string> seen;
            std::thread reader([&] {
                while (!done) {
                    const auto res = core.predict(form_body());
                    const double s = res.body["score"];
                    const std::string algo = res.body["model"]["algorithm"];
                    seen.push_back(s == score_a && algo == "logistic_regression" ? "a"
                                   : s == score_b && algo == "second"          ? "b"
                                                                               : "mixed");
                }
            });
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            CHECK(core.reload(json{{"path", (dir / "b.json").string()}}).status == 200);
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            done = true;
            reader.join();
            CHECK(std::count(seen.begin(), seen.end(), "mixed") == 0);
            const auto first_b = std::find(seen.begin(), seen.end(), "b");
            CHECK(first_b != seen.end());
            CHECK(std::find(first_b, seen.end(), "a") == seen.end());
        }
    }

    TEST_CASE("http round-trip") {
        const auto dir = testing::scratch_dir("svc_http");
        testing::write_file(dir / "index.html", "<html>form</html>");
        ServiceCore core(RecordSchema::aefi_default(), dir / "records.jsonl", fixed_clock);
        core.set_bundle(testing::trained_bundle("decision_tree", {{"max_depth", std::int64_t{3}}}));
        httplib::Server server;
        mount_routes(server, core, dir);
        const int port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        std::thread loop([&] { server.listen_after_bind(); });
        server.wait_until_ready();

        httplib::Client client("127.0.0.1", port);
        auto res = client.Post("/api/v1/predict", form_body().dump(), "application/json");
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(json::parse(res->body).contains("label"));

        auto bad = form_body();
        bad["features"].erase("gender");
        res = client.Post("/api/v1/predict", bad.dump(), "application/json");
        REQUIRE(res);
        CHECK(res->status == 422);
        CHECK(json::parse(res->body)["fields"][0]["field"] == "gender");

        res = client.Post("/api/v1/predict", "{not json", "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);

        res = client.Post("/api/v1/records", form_body().dump(), "application/json");
        REQUIRE(res);
        CHECK(res->status == 201);
        CHECK(json::parse(res->body)["id"] == 1);

        res = client.Get("/api/v1/records?limit=5");
        REQUIRE(res);
        CHECK(json::parse(res->body)["total"] == 1);

        res = client.Get("/api/v1/schema");
        REQUIRE(res);
        CHECK(json::parse(res->body)["features"].size() == 12);

        res = client.Get("/api/v1/model");
        REQUIRE(res);
        CHECK(json::parse(res->body)["family"] == "cart");

        res = client.Get("/index.html");
        REQUIRE(res);
        CHECK(res->body == "<html>form</html>");

        server.stop();
        loop.join();
    }
}
