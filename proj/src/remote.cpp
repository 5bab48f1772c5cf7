#include "handsdown/decoders.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <unordered_map>

namespace handsdown {

using nlohmann::json;

void RemoteDecoderConfig::validate() const {
    if (!(timeout_ms > 0)) throw std::invalid_argument("remote timeout must be positive");
    if (max_in_flight < 1) throw std::invalid_argument("remote in-flight budget must be positive");
    if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0) {
        throw std::invalid_argument("remote endpoint must be an http:// or https:// address");
    }
}

struct RemoteDecoder::State {
    std::atomic<int> in_flight{0};
};

RemoteDecoder::RemoteDecoder(RemoteDecoderConfig cfg, const Decoder& fallback)
    : cfg_(std::move(cfg)), fallback_(&fallback), state_(std::make_unique<State>()) {
    cfg_.validate();
}

RemoteDecoder::~RemoteDecoder() = default;

std::vector<Candidate> parse_remote_response(std::string_view body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("remote response is not JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("candidates") || !doc["candidates"].is_array()) {
        throw std::runtime_error("remote response lacks a candidates array");
    }
    std::unordered_map<std::string, double> best;
    for (const json& c : doc["candidates"]) {
        if (!c.is_object() || !c.contains("word") || !c["word"].is_string() || !c.contains("score") ||
            !c["score"].is_number()) {
            throw std::runtime_error("malformed remote candidate");
        }
        const std::string word = c["word"].get<std::string>();
        const double score = c["score"].get<double>();
        if (!std::isfinite(score)) throw std::runtime_error("non-finite remote score");
        const auto [it, inserted] = best.emplace(word, score);
        if (!inserted) it->second = std::max(it->second, score);
    }
    std::vector<Candidate> out;
    out.reserve(best.size());
    for (const auto& [w, s] : best) out.push_back(Candidate{w, s, "remote", false});
    sort_candidates(out);
    return out;
}

DecodeResult RemoteDecoder::decode(const DecodeInput& input, int k) const {
    if (input.letters.empty()) throw std::invalid_argument("empty letter sequence");
    auto degrade = [&] {
        DecodeResult res = fallback_->decode(input, k);
        res.degraded = true;
        return res;
    };

    if (state_->in_flight.fetch_add(1) >= cfg_.max_in_flight) {
        state_->in_flight.fetch_sub(1);
        return degrade();
    }
    struct Release {
        std::atomic<int>& n;
        ~Release() { n.fetch_sub(1); }
    } release{state_->in_flight};

    std::vector<Candidate> cands;
    try {
        httplib::Client client(cfg_.endpoint);
        const auto timeout = std::chrono::microseconds(static_cast<long long>(cfg_.timeout_ms * 1000.0));
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        const json body{{"noisy", input.letters}, {"k", k}};
        const auto res = client.Post(cfg_.path, body.dump(), "application/json");
        if (!res || res->status < 200 || res->status >= 300) return degrade();
        cands = parse_remote_response(res->body);
    } catch (const std::exception&) {
        return degrade();
    }
    return finish_ranking(std::move(cands), input.letters, k, id());
}

}  // namespace handsdown
