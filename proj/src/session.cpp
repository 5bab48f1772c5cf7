#include "handsdown/session.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <istream>
#include <ostream>

namespace handsdown {

using nlohmann::json;

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string error_frame(std::string_view code, std::string_view msg) {
    return json{{"kind", "error"}, {"code", code}, {"msg", msg}}.dump();
}

std::string ack_frame(std::string_view of) { return json{{"kind", "ack"}, {"of", of}}.dump(); }

json latency_json(const LatencyRecord& r) {
    return json{{"decode", r.decode_ms}, {"outbound", r.outbound_ms}, {"inbound", r.inbound_ms},
                {"end_to_end", r.end_to_end_ms}};
}

std::string join_words(const std::vector<std::string>& words) {
    std::string s;
    for (const std::string& w : words) {
        if (!s.empty()) s += ' ';
        s += w;
    }
    return s;
}

std::optional<double> optional_time(const json& msg) {
    if (!msg.contains("t") || msg["t"].is_null()) return std::nullopt;
    return msg["t"].get<double>();
}

}  // namespace

// ---------------------------------------------------------------------------

SessionEngine::SessionEngine(const KeyLayout& layout, const DecoderRegistry& registry, EngineConfig cfg)
    : layout_(&layout), registry_(&registry), cfg_(std::move(cfg)) {
    cfg_.pipeline.validate();
    if (cfg_.k < 1) throw std::invalid_argument("k must be positive");
}

std::string SessionEngine::next_session_id() { return "s" + std::to_string(++opened_); }

// ---------------------------------------------------------------------------

Session::Session(std::string id, std::string backend, const SessionEngine& engine, std::vector<std::string> phrases,
                 double start_t)
    : id_(std::move(id)),
      backend_(std::move(backend)),
      engine_(&engine),
      phrases_(std::move(phrases)),
      tracker_(engine.config().pipeline),
      cloud_(engine.config().pipeline.cloud),
      phrase_start_(start_t),
      last_t_(start_t) {
    engine.registry().get(backend_);
    events_.push_back({SessionEventKind::Start, start_t});
}

std::string Session::committed_text() const { return join_words(committed_); }

std::optional<std::string> Session::target_phrase() const {
    if (phrase_index_ < phrases_.size()) return phrases_[phrase_index_];
    return std::nullopt;
}

double Session::clock(std::optional<double> t) {
    if (t) last_t_ = std::max(last_t_, *t);
    return last_t_;
}

std::vector<TouchThread> Session::word_threads(bool include_open) const {
    std::vector<TouchThread> out;
    const auto& all = tracker_.threads();
    for (std::size_t i = word_first_thread_; i < all.size(); ++i) {
        if (control_key_[i]) continue;
        if (!include_open && all[i].open) continue;
        out.push_back(all[i]);
    }
    return out;
}

std::string Session::recompute_intermediate() {
    const std::vector<TouchThread> threads = word_threads(true);
    HandStateCloud scratch = cloud_;
    live_ = resolve_word(threads, scratch, engine_->layout(), engine_->config().pipeline);
    letters_ = live_.letters;
    json marks = json::array();
    for (const TouchThread& th : threads) {
        const bool intent = std::any_of(live_.representatives.begin(), live_.representatives.end(),
                                        [&](const Representative& r) { return r.thread == th.id; });
        marks.push_back(json{{"pos", {th.x_start.x, th.x_start.y}}, {"intent", intent}});
    }
    return json{{"kind", "intermediate"}, {"letters", letters_}, {"marks", std::move(marks)}}.dump();
}

void Session::start_word() {
    word_first_thread_ = tracker_.threads().size();
    ++word_index_;
    letters_.clear();
    live_ = {};
}

std::vector<std::string> Session::touch(RawTouchEvent e, double arrival_ms) {
    e.session = id_;
    e.word_id = word_index_;
    const ThreadTracker::Result r = tracker_.ingest(e);
    last_t_ = std::max(last_t_, e.t);
    touched_since_commit_ = true;
    suggestions_active_ = false;
    control_key_.resize(tracker_.threads().size());
    if (r.opened) control_key_[static_cast<std::size_t>(r.thread)] = engine_->layout().control_at(e.pos);
    if (r.thread >= 0) {
        const auto key = control_key_[static_cast<std::size_t>(r.thread)];
        if (key) {
            if (r.closed) return fire_control(*key, e.t, arrival_ms);
            return {json{{"kind", "intermediate"}, {"letters", letters_}, {"marks", json::array()}}.dump()};
        }
    }
    return {recompute_intermediate()};
}

std::vector<std::string> Session::fire_control(ControlKey key, double t, double arrival_ms) {
    switch (key) {
        case ControlKey::Space: return space(t, arrival_ms);
        case ControlKey::Backspace: return backspace(t);
        case ControlKey::Enter: return enter(t);
    }
    return {};
}

std::vector<std::string> Session::space(std::optional<double> t_opt, double arrival_ms) {
    clock(t_opt);
    if (letters_.empty()) return {ack_frame("space")};

    // Final resolution of the word against the word-start cloud.
    const std::vector<TouchThread> threads = word_threads(true);
    HandStateCloud next = cloud_;
    const PipelineOutput out = resolve_word(threads, next, engine_->layout(), engine_->config().pipeline);

    DecodeInput input;
    input.letters = out.letters;
    std::vector<Point> touches;
    for (const Representative& r : out.representatives) touches.push_back(r.pos);
    input.touches = std::move(touches);

    const double decode_start = now_ms();
    const DecodeResult res = decode(input, backend_, engine_->registry(), engine_->config().k);
    const double decode_end = now_ms();

    committed_.push_back(res.ranked.front().word);
    suggestions_.assign(res.ranked.begin() + 1, res.ranked.end());
    suggestions_active_ = true;
    touched_since_commit_ = false;
    events_.push_back({SessionEventKind::Commit, last_t_});
    cloud_ = std::move(next);
    start_word();

    json sugg = json::array();
    for (std::size_t i = 0; i < suggestions_.size(); ++i) {
        sugg.push_back(json{{"rank", i + 2}, {"word", suggestions_[i].word}, {"literal", suggestions_[i].literal}});
    }
    json frame{{"kind", "commit"},
               {"word", committed_.back()},
               {"literal", input.letters},
               {"suggestions", std::move(sugg)},
               {"backend", res.backend},
               {"degraded", res.degraded}};
    LatencyRecord lat;
    lat.decode_ms = res.latency_ms;
    lat.inbound_ms = std::max(0.0, decode_start - arrival_ms);
    const double sent = now_ms();
    lat.outbound_ms = std::max(0.0, sent - decode_end);
    lat.end_to_end_ms = std::max(lat.decode_ms, sent - arrival_ms);
    latencies_.push_back(lat);
    frame["latency"] = latency_json(lat);
    return {frame.dump()};
}

std::vector<std::string> Session::backspace(std::optional<double> t_opt) {
    const double t = clock(t_opt);
    const bool mid_word = !letters_.empty() || !word_threads(true).empty();
    if (mid_word) {
        // Drop the word's touches; the cloud stays at its word-start state.
        start_word();
        --word_index_;
        events_.push_back({SessionEventKind::Cleared, t});
        return {json{{"kind", "intermediate"}, {"letters", ""}, {"marks", json::array()}}.dump()};
    }
    if (committed_.empty()) return {ack_frame("backspace")};
    const std::string word = committed_.back();
    committed_.pop_back();
    suggestions_active_ = false;
    events_.push_back({SessionEventKind::WordDeleted, t});
    return {json{{"kind", "delete"}, {"word", word}}.dump()};
}

std::vector<std::string> Session::suggest(int rank) {
    if (!suggestions_active_) {
        if (touched_since_commit_ && !committed_.empty()) return {error_frame("stale", "a touch occurred since the last commit")};
        return {error_frame("no_suggestions", "no active suggestions")};
    }
    if (rank < 2 || rank > static_cast<int>(suggestions_.size()) + 1) {
        return {error_frame("bad_rank", "rank must be between 2 and " + std::to_string(suggestions_.size() + 1))};
    }
    const Candidate& c = suggestions_[static_cast<std::size_t>(rank - 2)];
    committed_.back() = c.word;
    suggestions_active_ = false;
    return {json{{"kind", "replace"}, {"word", c.word}, {"rank", rank}, {"literal", c.literal}}.dump()};
}

std::vector<std::string> Session::enter(std::optional<double> t_opt) {
    const double t = clock(t_opt);
    const auto target = target_phrase();
    if (!target) return {error_frame("no_phrase", "no target phrase configured")};
    std::vector<std::string> frames;
    if (!letters_.empty()) frames = space(t, now_ms());

    const std::string transcribed = committed_text();
    const double minutes = (t - phrase_start_) / 60000.0;
    const CorrectionStats cs = correction_stats(events_);
    json lat = json::array();
    for (const LatencyRecord& r : latencies_) lat.push_back(latency_json(r));
    json frame{{"kind", "phrase_result"},
               {"target", *target},
               {"transcribed", transcribed},
               {"wpm", minutes > 0 ? wpm(transcribed.size(), minutes) : 0.0},
               {"wer", wer(transcribed, *target)},
               {"cer", cs.cer},
               {"corrections_per_minute", cs.per_minute},
               {"latencies", std::move(lat)}};

    ++phrase_index_;
    const auto next = target_phrase();
    frame["next"] = next ? json(*next) : json(nullptr);
    frames.push_back(frame.dump());

    committed_.clear();
    suggestions_.clear();
    suggestions_active_ = false;
    latencies_.clear();
    events_.clear();
    events_.push_back({SessionEventKind::Start, t});
    phrase_start_ = t;
    return frames;
}

// ---------------------------------------------------------------------------

Connection::Connection(SessionEngine& engine) : engine_(&engine) {}
Connection::~Connection() = default;

std::vector<std::string> Connection::handle(std::string_view message) {
    const double arrival = now_ms();
    std::vector<std::string> out;
    std::optional<RawTouchEvent> accepted_touch;
    json msg;
    try {
        msg = json::parse(message);
        if (!msg.is_object() || !msg.contains("kind") || !msg["kind"].is_string()) {
            throw std::runtime_error("message must be an object with a string kind");
        }
    } catch (const std::exception& e) {
        out.push_back(error_frame("bad_message", e.what()));
        msg = json(nullptr);
    }
    if (message_log_) {
        *message_log_ << json{{"dir", "in"}, {"msg", msg.is_null() ? json(std::string(message)) : msg}}.dump() << '\n';
    }

    if (out.empty()) {
        const std::string kind = msg["kind"].get<std::string>();
        try {
            if (kind == "open") {
                if (session_) {
                    out.push_back(error_frame("already_open", "session already open"));
                } else {
                    const std::string backend = msg.value("backend", std::string("ngram"));
                    const std::string layout = msg.value("layout", engine_->config().layout_name);
                    std::vector<std::string> phrases;
                    if (msg.contains("phrase_set") && !msg["phrase_set"].is_null()) {
                        const auto name = msg["phrase_set"].get<std::string>();
                        const auto& sets = engine_->config().phrase_sets;
                        const auto it = sets.find(name);
                        if (it == sets.end()) throw std::invalid_argument("unknown phrase set: " + name);
                        phrases = it->second;
                    }
                    if (layout != engine_->config().layout_name) {
                        out.push_back(error_frame("unknown_layout", "unknown layout: " + layout));
                    } else if (!engine_->registry().contains(backend)) {
                        out.push_back(error_frame("unknown_backend", "unknown backend: " + backend));
                    } else {
                        session_ = std::make_unique<Session>(engine_->next_session_id(), backend, *engine_,
                                                             std::move(phrases), optional_time(msg).value_or(0.0));
                        const auto phrase = session_->target_phrase();
                        out.push_back(json{{"kind", "opened"},
                                           {"session", session_->id()},
                                           {"backend", backend},
                                           {"phrase", phrase ? json(*phrase) : json(nullptr)}}
                                          .dump());
                    }
                }
            } else if (!session_) {
                out.push_back(error_frame("not_open", "open a session first"));
            } else if (kind == "touch") {
                if (!msg.contains("e") || !msg["e"].is_object()) throw RejectedEvent("touch message lacks an event");
                RawTouchEvent e = parse_touch_event(msg["e"].dump());
                out = session_->touch(e, arrival);
                e.session = session_->id();
                accepted_touch = e;
            } else if (kind == "space") {
                out = session_->space(optional_time(msg), arrival);
            } else if (kind == "backspace") {
                out = session_->backspace(optional_time(msg));
            } else if (kind == "enter") {
                out = session_->enter(optional_time(msg));
            } else if (kind == "suggest") {
                if (!msg.contains("rank") || !msg["rank"].is_number_integer()) {
                    throw std::invalid_argument("suggest needs an integer rank");
                }
                out = session_->suggest(msg["rank"].get<int>());
            } else {
                out.push_back(error_frame("unknown_kind", "unknown message kind: " + kind));
            }
        } catch (const StreamError& e) {
            out.push_back(error_frame("stream", e.what()));
        } catch (const RejectedEvent& e) {
            out.push_back(error_frame("rejected", e.what()));
        } catch (const json::exception& e) {
            out.push_back(error_frame("bad_message", e.what()));
        } catch (const std::invalid_argument& e) {
            out.push_back(error_frame("bad_request", e.what()));
        }
    }

    if (touch_log_ && accepted_touch) *touch_log_ << format_touch_event(*accepted_touch) << '\n';
    if (message_log_) {
        for (const std::string& f : out) *message_log_ << json{{"dir", "out"}, {"msg", json::parse(f)}}.dump() << '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string fold_committed(const std::vector<std::string>& frames) {
    std::vector<std::string> finished;
    std::vector<std::string> words;
    for (const std::string& f : frames) {
        const json m = json::parse(f);
        const std::string kind = m.value("kind", std::string());
        if (kind == "commit") {
            words.push_back(m["word"].get<std::string>());
        } else if (kind == "replace" && !words.empty()) {
            words.back() = m["word"].get<std::string>();
        } else if (kind == "delete" && !words.empty()) {
            words.pop_back();
        } else if (kind == "phrase_result") {
            finished.push_back(join_words(words));
            words.clear();
        }
    }
    if (!words.empty()) finished.push_back(join_words(words));
    std::string s;
    for (std::size_t i = 0; i < finished.size(); ++i) {
        if (i) s += '\n';
        s += finished[i];
    }
    return s;
}

namespace {

json strip_latency(json m) {
    if (m.is_object()) {
        m.erase("latency");
        m.erase("latencies");
    }
    return m;
}

}  // namespace

ReplayReport replay_message_log(std::istream& log, SessionEngine& engine) {
    ReplayReport rep;
    Connection conn(engine);
    std::vector<json> expected;
    std::vector<std::string> produced;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(log, line)) {
        ++lineno;
        if (line.empty()) continue;
        const json rec = json::parse(line);
        const std::string dir = rec.at("dir").get<std::string>();
        if (dir == "in") {
            ++rep.inputs;
            const json& m = rec.at("msg");
            const auto frames = conn.handle(m.is_string() ? m.get<std::string>() : m.dump());
            produced.insert(produced.end(), frames.begin(), frames.end());
        } else if (dir == "out") {
            expected.push_back(rec.at("msg"));
        } else {
            throw std::runtime_error("message log line " + std::to_string(lineno) + ": bad dir");
        }
    }
    rep.outputs = produced.size();
    const std::size_t n = std::max(expected.size(), produced.size());
    for (std::size_t i = 0; i < n; ++i) {
        const json got = i < produced.size() ? strip_latency(json::parse(produced[i])) : json(nullptr);
        const json want = i < expected.size() ? strip_latency(expected[i]) : json(nullptr);
        if (got != want) {
            if (rep.mismatches == 0) rep.first_mismatch = "frame " + std::to_string(i) + ": got " + got.dump() + " want " + want.dump();
            ++rep.mismatches;
        }
        if (i < produced.size()) {
            const json m = json::parse(produced[i]);
            if (m.value("kind", std::string()) == "commit") rep.decode_ms.push_back(m["latency"]["decode"].get<double>());
        }
    }
    rep.committed_text = fold_committed(produced);
    return rep;
}

}  // namespace handsdown
