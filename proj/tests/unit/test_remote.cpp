#include "handsdown/decoders.hpp"

#include "doctest.h"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <thread>

using namespace handsdown;

namespace {

/// Local HTTP decoder whose behaviour is picked per request by `mode`.
class MockEndpoint {
public:
    MockEndpoint() {
        server_.Post("/decode", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests_;
            last_body_ = req.body;
            const std::string m = mode_;
            if (m == "slow") std::this_thread::sleep_for(std::chrono::milliseconds(400));
            if (m == "error") {
                res.status = 503;
                return;
            }
            if (m == "garbage") {
                res.set_content("not json", "application/json");
                return;
            }
            if (m == "duplicates") {
                res.set_content(R"({"candidates":[{"word":"eligible","score":-2.0},{"word":"legible","score":-3.0},)"
                                R"({"word":"eligible","score":-0.5}]})",
                                "application/json");
                return;
            }
            res.set_content(R"({"candidates":[{"word":"eligible","score":-0.1}]})", "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockEndpoint() {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
    void set_mode(std::string m) { mode_ = std::move(m); }
    int requests() const { return requests_; }
    std::string last_body() const { return last_body_; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::string mode_ = "ok";
    std::atomic<int> requests_{0};
    std::string last_body_;
};

/// Fallback that always proposes one fixed word.
class FixedDecoder final : public Decoder {
public:
    std::string_view id() const override { return "ngram"; }
    DecodeResult decode(const DecodeInput& input, int k) const override {
        return finish_ranking({{"fallback", -1.0, "ngram", false}}, input.letters, k, id());
    }
};

}  // namespace

TEST_CASE("remote decoding against a mock endpoint") {
    MockEndpoint mock;
    FixedDecoder fallback;
    RemoteDecoderConfig cfg;
    cfg.endpoint = mock.endpoint();
    cfg.timeout_ms = 150;
    const RemoteDecoder remote(cfg, fallback);
    const DecodeInput in{"ekigible", std::nullopt};

    SUBCASE("pass-through") {
        const DecodeResult r = remote.decode(in, 5);
        CHECK_FALSE(r.degraded);
        REQUIRE(r.ranked.size() == 2);
        CHECK(r.ranked[0].word == "eligible");
        CHECK(r.ranked[0].score == -0.1);
        CHECK(r.ranked[0].source == "remote");
        CHECK(r.ranked[1].literal);
        const auto body = nlohmann::json::parse(mock.last_body());
        CHECK(body == nlohmann::json{{"noisy", "ekigible"}, {"k", 5}});
    }
    SUBCASE("timeout falls back, flagged degraded") {
        mock.set_mode("slow");
        const DecodeResult r = remote.decode(in, 5);
        CHECK(r.degraded);
        CHECK(r.ranked.front().word == "fallback");
    }
    SUBCASE("duplicates keep the best score") {
        mock.set_mode("duplicates");
        const DecodeResult r = remote.decode(in, 5);
        REQUIRE(r.ranked.size() == 3);
        CHECK(r.ranked[0].word == "eligible");
        CHECK(r.ranked[0].score == -0.5);
        CHECK(r.ranked[1].word == "legible");
    }
    SUBCASE("non-2xx and malformed bodies fall back") {
        mock.set_mode("error");
        CHECK(remote.decode(in, 5).degraded);
        mock.set_mode("garbage");
        CHECK(remote.decode(in, 5).degraded);
    }
}

TEST_CASE("unreachable endpoint falls back") {
    FixedDecoder fallback;
    RemoteDecoderConfig cfg;
    cfg.endpoint = "http://127.0.0.1:1";
    cfg.timeout_ms = 100;
    const RemoteDecoder remote(cfg, fallback);
    const DecodeResult r = remote.decode({"thw", std::nullopt}, 5);
    CHECK(r.degraded);
    CHECK(r.ranked.front().word == "fallback");
}

TEST_CASE("remote config validation and response parsing") {
    FixedDecoder fallback;
    RemoteDecoderConfig cfg;
    cfg.timeout_ms = 0;
    CHECK_THROWS_AS(RemoteDecoder(cfg, fallback), std::invalid_argument);
    cfg = {};
    cfg.endpoint = "127.0.0.1:8081";
    CHECK_THROWS_AS(RemoteDecoder(cfg, fallback), std::invalid_argument);

    CHECK_THROWS(parse_remote_response("[]"));
    CHECK_THROWS(parse_remote_response(R"({"candidates":[{"word":"a"}]})"));
    const auto c = parse_remote_response(R"({"candidates":[{"word":"b","score":-1},{"word":"a","score":-1}]})");
    REQUIRE(c.size() == 2);
    CHECK(c[0].word == "a");
}
