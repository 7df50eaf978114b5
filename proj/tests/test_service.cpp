#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "support/fixtures.hpp"
#include "tokviz/response.hpp"
#include "tokviz/service.hpp"

using namespace tokviz;

namespace {

class Running {
public:
    explicit Running(ServiceOptions options = {}) : service_([&] {
        options.host = "127.0.0.1";
        options.port = 0;
        return options;
    }()) {
        REQUIRE(service_.bind());
        thread_ = std::thread([this] { service_.run(); });
        service_.wait_until_ready();
    }
    ~Running() {
        service_.stop();
        thread_.join();
    }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", service_.port());
        c.set_read_timeout(30, 0);
        return c;
    }

private:
    Service service_;
    std::thread thread_;
};

std::string golden_content() {
    const auto b = fixtures::golden_bytes();
    return {b.begin(), b.end()};
}

httplib::MultipartFormDataItems form(const std::string& file, const std::string& scheme, const std::string& config = "") {
    httplib::MultipartFormDataItems items = {{"file", file, "song.mid", "audio/midi"}, {"scheme", scheme, "", ""}};
    if (!config.empty()) items.push_back({"config", config, "", "application/json"});
    return items;
}

}  // namespace

TEST_CASE("health and tokenizer listing") {
    Running server;
    auto c = server.client();
    auto health = c.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(Json::parse(health->body)["version"] == std::string(version()));

    auto list = c.Get("/api/tokenizers");
    REQUIRE(list);
    CHECK(list->status == 200);
    CHECK(list->get_header_value("Content-Type") == "application/json");
    const Json d = Json::parse(list->body);
    REQUIRE(d.size() == 6);
    CHECK(d[0]["scheme"] == "REMI");
    CHECK(d[0]["compoundWidth"] == 0);
    CHECK(d[5]["scheme"] == "Octuple");
    CHECK(d[5]["compoundWidth"] == 8);
}

TEST_CASE("tokenize returns the same bytes as the library") {
    Running server;
    auto c = server.client();
    auto res = c.Post("/api/tokenize", form(golden_content(), "REMI"));
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == tokenize_body(fixtures::golden_bytes(), Scheme::REMI, GridConfig{}));
    CHECK(res->body == fixtures::read_text(fixtures::golden_path("remi_response.json")));

    GridConfig four;
    four.positionsPerBeat = 4;
    auto custom = c.Post("/api/tokenize", form(golden_content(), "octuple", R"({"positionsPerBeat": 4})"));
    REQUIRE(custom);
    CHECK(custom->status == 200);
    CHECK(custom->body == tokenize_body(fixtures::golden_bytes(), Scheme::Octuple, four));
}

TEST_CASE("request errors") {
    Running server;
    auto c = server.client();

    auto notMultipart = c.Post("/api/tokenize", "{}", "application/json");
    REQUIRE(notMultipart);
    CHECK(notMultipart->status == 400);

    auto noFile = c.Post("/api/tokenize", httplib::MultipartFormDataItems{{"scheme", "REMI", "", ""}});
    REQUIRE(noFile);
    CHECK(noFile->status == 400);

    auto badField = c.Post("/api/tokenize", form(golden_content(), "REMI", R"({"positionsPerBeat": 0})"));
    REQUIRE(badField);
    CHECK(badField->status == 422);
    CHECK(Json::parse(badField->body)["field"] == "positionsPerBeat");

    auto badJson = c.Post("/api/tokenize", form(golden_content(), "REMI", "{nope"));
    REQUIRE(badJson);
    CHECK(badJson->status == 422);
    CHECK(Json::parse(badJson->body)["field"] == "config");

    auto badScheme = c.Post("/api/tokenize", form(golden_content(), "ABC"));
    REQUIRE(badScheme);
    CHECK(badScheme->status == 422);
    CHECK(Json::parse(badScheme->body)["field"] == "scheme");

    auto noScheme = c.Post("/api/tokenize", httplib::MultipartFormDataItems{{"file", golden_content(), "a.mid", ""}});
    REQUIRE(noScheme);
    CHECK(noScheme->status == 422);

    auto broken = c.Post("/api/tokenize", form("MThd\x00\x00", "REMI"));
    REQUIRE(broken);
    CHECK(broken->status == 400);
    const Json err = Json::parse(broken->body);
    CHECK(err["error"] == "BadHeader");
    CHECK(err.contains("offset"));

    auto missing = c.Get("/api/nothing");
    REQUIRE(missing);
    CHECK(missing->status == 404);
}

TEST_CASE("uploads over the limit are rejected") {
    ServiceOptions o;
    o.maxUploadBytes = 1024;
    Running server(o);
    auto c = server.client();
    auto res = c.Post("/api/tokenize", form(std::string(2048, 'x'), "REMI"));
    REQUIRE(res);
    CHECK(res->status == 413);

    auto huge = c.Post("/api/tokenize", form(std::string(200 * 1024, 'x'), "REMI"));
    REQUIRE(huge);
    CHECK(huge->status == 413);

    auto ok = c.Post("/api/tokenize", form(golden_content(), "REMI"));
    REQUIRE(ok);
    CHECK(ok->status == 200);
}

TEST_CASE("CORS headers when an origin is configured") {
    ServiceOptions o;
    o.corsOrigin = "http://localhost:5173";
    Running server(o);
    auto c = server.client();
    auto res = c.Get("/api/tokenizers");
    REQUIRE(res);
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
    auto pre = c.Options("/api/tokenize");
    REQUIRE(pre);
    CHECK(pre->status == 204);

    Running plain;
    auto res2 = plain.client().Get("/api/tokenizers");
    REQUIRE(res2);
    CHECK_FALSE(res2->has_header("Access-Control-Allow-Origin"));
}

TEST_CASE("concurrent requests get identical answers") {
    Running server;
    const std::string expected = tokenize_body(fixtures::golden_bytes(), Scheme::TSD, GridConfig{});
    std::vector<std::thread> threads;
    std::atomic<int> good{0};
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&] {
            auto c = server.client();
            for (int k = 0; k < 10; ++k) {
                auto res = c.Post("/api/tokenize", form(golden_content(), "TSD"));
                if (res && res->status == 200 && res->body == expected) ++good;
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(good == 80);
}
