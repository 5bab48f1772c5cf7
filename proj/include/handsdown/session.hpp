#pragma once

// Typing-session engine: JSON protocol messages in, JSON messages out.
// Transport (WebSocket, replay) lives outside this file.

#include "handsdown/decoders.hpp"
#include "handsdown/geometry.hpp"
#include "handsdown/metrics.hpp"
#include "handsdown/touch.hpp"

#include <atomic>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace handsdown {

struct LatencyRecord {
    double decode_ms = 0.0;
    double outbound_ms = 0.0;  // decode result to serialized reply
    double inbound_ms = 0.0;   // message arrival to decode start
    double end_to_end_ms = 0.0;
};

struct EngineConfig {
    PipelineConfig pipeline;
    int k = 5;
    std::string layout_name = "qwerty";
    std::map<std::string, std::vector<std::string>> phrase_sets;  // name -> phrases
};

/// Shared, immutable resources for many sessions. Safe to share between
/// connection threads.
class SessionEngine {
public:
    SessionEngine(const KeyLayout& layout, const DecoderRegistry& registry, EngineConfig cfg);

    const KeyLayout& layout() const { return *layout_; }
    const DecoderRegistry& registry() const { return *registry_; }
    const EngineConfig& config() const { return cfg_; }
    std::string next_session_id();

private:
    const KeyLayout* layout_;
    const DecoderRegistry* registry_;
    EngineConfig cfg_;
    std::atomic<std::size_t> opened_{0};
};

class Session;

/// One client connection. The first message must be "open"; every client
/// message yields at least one reply.
class Connection {
public:
    explicit Connection(SessionEngine& engine);
    ~Connection();

    /// Handles one client frame and returns the server frames, in order.
    std::vector<std::string> handle(std::string_view message);

    bool is_open() const { return session_ != nullptr; }
    const Session* session() const { return session_.get(); }

    /// Message log: {"dir":"in"|"out","msg":...} per line.
    void set_message_log(std::ostream* out) { message_log_ = out; }
    /// Touch log in the touch-log schema.
    void set_touch_log(std::ostream* out) { touch_log_ = out; }

private:
    SessionEngine* engine_;
    std::unique_ptr<Session> session_;
    std::ostream* message_log_ = nullptr;
    std::ostream* touch_log_ = nullptr;
};

class Session {
public:
    Session(std::string id, std::string backend, const SessionEngine& engine, std::vector<std::string> phrases,
            double start_t);

    const std::string& id() const { return id_; }
    const std::string& backend() const { return backend_; }
    const std::vector<std::string>& committed() const { return committed_; }
    std::string committed_text() const;
    const std::string& intermediate() const { return letters_; }
    bool suggestions_active() const { return suggestions_active_; }
    const std::vector<Candidate>& suggestions() const { return suggestions_; }
    const std::vector<LatencyRecord>& latencies() const { return latencies_; }
    std::optional<std::string> target_phrase() const;
    int word_index() const { return word_index_; }

    // Each returns the reply frames as JSON text.
    std::vector<std::string> touch(RawTouchEvent e, double arrival_ms);
    std::vector<std::string> space(std::optional<double> t, double arrival_ms);
    std::vector<std::string> backspace(std::optional<double> t);
    std::vector<std::string> enter(std::optional<double> t);
    std::vector<std::string> suggest(int rank);

private:
    std::vector<std::string> fire_control(ControlKey key, double t, double arrival_ms);
    std::string recompute_intermediate();
    std::vector<TouchThread> word_threads(bool include_open) const;
    void start_word();
    double clock(std::optional<double> t);

    std::string id_;
    std::string backend_;
    const SessionEngine* engine_;
    std::vector<std::string> phrases_;
    std::size_t phrase_index_ = 0;

    ThreadTracker tracker_;
    HandStateCloud cloud_;           // state at the start of the current word
    std::vector<std::optional<ControlKey>> control_key_;  // by thread id
    std::size_t word_first_thread_ = 0;
    int word_index_ = 0;
    std::string letters_;
    PipelineOutput live_;

    std::vector<std::string> committed_;
    std::vector<Candidate> suggestions_;
    bool suggestions_active_ = false;
    bool touched_since_commit_ = false;
    std::vector<LatencyRecord> latencies_;
    std::vector<SessionEvent> events_;  // for correction statistics
    double phrase_start_ = 0.0;
    double last_t_ = 0.0;
};

/// Committed text rebuilt from server frames (commit, replace, delete,
/// phrase_result resets).
std::string fold_committed(const std::vector<std::string>& server_frames);

struct ReplayReport {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::size_t mismatches = 0;
    std::string first_mismatch;
    std::string committed_text;           // fold of the replayed frames
    std::vector<double> decode_ms;        // per commit
};

/// Feeds the "in" frames of a message log through a fresh connection and
/// compares the replies with the recorded "out" frames, ignoring latency
/// fields.
ReplayReport replay_message_log(std::istream& log, SessionEngine& engine);

}  // namespace handsdown
