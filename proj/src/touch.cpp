#include "handsdown/touch.hpp"

#include "handsdown/simd/kernels.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace handsdown {

using nlohmann::json;

std::string_view to_string(TouchKind k) {
    switch (k) {
        case TouchKind::Down: return "down";
        case TouchKind::Move: return "move";
        case TouchKind::Up: return "up";
    }
    return "?";
}

RawTouchEvent parse_touch_event(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw RejectedEvent(std::string("touch event is not JSON: ") + e.what());
    }
    RawTouchEvent e;
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "down") e.kind = TouchKind::Down;
        else if (kind == "move") e.kind = TouchKind::Move;
        else if (kind == "up") e.kind = TouchKind::Up;
        else throw RejectedEvent("unknown touch kind: " + kind);
        e.t = j.at("t").get<double>();
        e.pos = {j.at("x").get<double>(), j.at("y").get<double>()};
        e.session = j.value("session", std::string{});
        e.word_id = j.value("word_id", 0);
        if (j.contains("intent") && !j.at("intent").is_null()) e.intent = j.at("intent").get<bool>();
        if (j.contains("user") && !j.at("user").is_null()) e.user = j.at("user").get<std::string>();
    } catch (const json::exception& ex) {
        throw RejectedEvent(std::string("malformed touch event: ") + ex.what());
    }
    if (!std::isfinite(e.t)) throw RejectedEvent("touch event time is not finite");
    if (!in_unit_square(e.pos)) throw RejectedEvent("touch event outside the unit square");
    return e;
}

std::string format_touch_event(const RawTouchEvent& e) {
    json j{{"session", e.session}, {"word_id", e.word_id}, {"kind", to_string(e.kind)},
           {"t", e.t},             {"x", e.pos.x},         {"y", e.pos.y}};
    j["intent"] = e.intent ? json(*e.intent) : json(nullptr);
    if (e.user) j["user"] = *e.user;
    return j.dump();
}

std::vector<RawTouchEvent> load_touch_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open touch log: " + path);
    std::vector<RawTouchEvent> events;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        events.push_back(parse_touch_event(line));
    }
    return events;
}

void PipelineConfig::validate() const {
    if (!(tau_c > 0)) throw std::invalid_argument("tau_c must be positive");
    if (kappa < 1) throw std::invalid_argument("kappa must be at least 1");
    if (!(cell > 0)) throw std::invalid_argument("grid cell size must be positive");
    if (!(radius > 0)) throw std::invalid_argument("association radius must be positive");
    // A 3x3 probe only sees everything within one cell width.
    if (radius > cell) throw std::invalid_argument("association radius must not exceed the grid cell size");
    if (!(t_gap >= 0)) throw std::invalid_argument("t_gap must be non-negative");
    if (!(cloud.rho > 0 && cloud.rho < 1)) throw std::invalid_argument("rho must lie in (0,1)");
    if (!(cloud.delta > 0)) throw std::invalid_argument("delta must be positive");
    if (!(cloud.t_max > 0)) throw std::invalid_argument("t_max must be positive");
    if (!(cloud.epsilon > 0)) throw std::invalid_argument("epsilon must be positive");
    if (!(tie_tolerance >= 0 && tie_tolerance < 1)) throw std::invalid_argument("tie tolerance must lie in [0,1)");
}

// ---------------------------------------------------------------------------
// Thread formation

ThreadTracker::ThreadTracker(PipelineConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    side_ = static_cast<int>(std::ceil(1.0 / cfg_.cell)) + 1;
    cells_.resize(static_cast<std::size_t>(side_) * static_cast<std::size_t>(side_));
}

int ThreadTracker::cell_coord(double v) const {
    return std::clamp(static_cast<int>(std::floor(v / cfg_.cell)), 0, side_ - 1);
}

std::size_t ThreadTracker::cell_index(Point p) const {
    return static_cast<std::size_t>(cell_coord(p.y)) * static_cast<std::size_t>(side_) +
           static_cast<std::size_t>(cell_coord(p.x));
}

void ThreadTracker::link(int id) {
    const std::size_t c = cell_index(threads_[static_cast<std::size_t>(id)].x_end);
    cells_[c].push_back(id);
    cell_of_[static_cast<std::size_t>(id)] = c;
}

void ThreadTracker::unlink(int id) {
    auto& bucket = cells_[cell_of_[static_cast<std::size_t>(id)]];
    bucket.erase(std::find(bucket.begin(), bucket.end(), id));
    cell_of_[static_cast<std::size_t>(id)] = static_cast<std::size_t>(-1);
}

int ThreadTracker::find_match(Point p, double t) {
    const int cx = cell_coord(p.x);
    const int cy = cell_coord(p.y);
    int best = -1;
    double best_d = 0.0;
    for (int gy = std::max(0, cy - 1); gy <= std::min(side_ - 1, cy + 1); ++gy) {
        for (int gx = std::max(0, cx - 1); gx <= std::min(side_ - 1, cx + 1); ++gx) {
            auto& bucket = cells_[static_cast<std::size_t>(gy) * static_cast<std::size_t>(side_) +
                                  static_cast<std::size_t>(gx)];
            for (std::size_t k = 0; k < bucket.size();) {
                const int id = bucket[k];
                const TouchThread& th = threads_[static_cast<std::size_t>(id)];
                if (t - th.t_end > cfg_.t_gap) {
                    // Time only moves forward: this thread can never match again.
                    bucket.erase(bucket.begin() + static_cast<std::ptrdiff_t>(k));
                    cell_of_[static_cast<std::size_t>(id)] = static_cast<std::size_t>(-1);
                    continue;
                }
                const double d = distance(p, th.x_end);
                if (d <= cfg_.radius && (best < 0 || d < best_d || (d == best_d && id < best))) {
                    best = id;
                    best_d = d;
                }
                ++k;
            }
        }
    }
    return best;
}

ThreadTracker::Result ThreadTracker::ingest(const RawTouchEvent& e) {
    if (!std::isfinite(e.t)) throw RejectedEvent("touch event time is not finite");
    if (!in_unit_square(e.pos)) throw RejectedEvent("touch event outside the unit square");
    if (e.t < last_t_) throw StreamError("touch events out of time order");
    last_t_ = e.t;

    Result r;
    if (e.kind == TouchKind::Down) {
        TouchThread th;
        th.id = static_cast<int>(threads_.size());
        th.t_start = th.t_end = e.t;
        th.x_start = th.x_end = e.pos;
        th.event_count = 1;
        th.intent = e.intent;
        threads_.push_back(std::move(th));
        cell_of_.push_back(static_cast<std::size_t>(-1));
        link(threads_.back().id);
        ++downs_;
        r.thread = threads_.back().id;
        r.opened = true;
        return r;
    }

    const int id = find_match(e.pos, e.t);
    if (id < 0) {
        ++strays_;
        return r;
    }
    TouchThread& th = threads_[static_cast<std::size_t>(id)];
    unlink(id);
    th.x_end = e.pos;
    th.t_end = e.t;
    ++th.event_count;
    if (e.kind == TouchKind::Move) {
        th.polyline.push_back(e.pos);
        link(id);
    } else {
        th.open = false;
        r.closed = true;
    }
    r.thread = id;
    return r;
}

void ThreadTracker::flush() {
    for (TouchThread& th : threads_) {
        if (!th.open) continue;
        if (cell_of_[static_cast<std::size_t>(th.id)] != static_cast<std::size_t>(-1)) unlink(th.id);
        th.open = false;
    }
}

// ---------------------------------------------------------------------------
// Time clustering

Clustering cluster_threads(std::span<const TouchThread> threads, const PipelineConfig& cfg) {
    std::vector<const TouchThread*> order;
    order.reserve(threads.size());
    for (const TouchThread& th : threads) order.push_back(&th);
    std::sort(order.begin(), order.end(), [](const TouchThread* a, const TouchThread* b) {
        if (a->t_start != b->t_start) return a->t_start < b->t_start;
        return a->id < b->id;
    });

    Clustering out;
    for (const TouchThread* th : order) {
        if (out.clusters.empty() || th->t_start - out.clusters.back().anchor_onset > cfg.tau_c) {
            out.clusters.push_back(TimeCluster{th->t_start, {}});
        }
        out.clusters.back().members.push_back(*th);
    }
    out.retained.reserve(out.clusters.size());
    for (const TimeCluster& c : out.clusters) {
        const bool keep = static_cast<int>(c.members.size()) <= cfg.kappa;
        out.retained.push_back(keep);
        if (!keep) ++out.discarded;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Hand-state cloud and travel score

HandStateCloud::HandStateCloud(CloudParams params) : params_(params) {}

double HandStateCloud::weight(const CloudPoint& p, double t) const {
    const double age = std::max(0.0, t - p.tau);
    return std::pow(params_.rho, age / params_.delta);
}

void HandStateCloud::update(std::span<const CloudPoint> contacts, double now) {
    for (const CloudPoint& c : contacts) {
        if (c.tau > now) throw std::invalid_argument("cloud contact is later than the update time");
        points_.push_back(c);
    }
    std::erase_if(points_, [&](const CloudPoint& p) { return now - p.tau > params_.t_max; });
}

double HandStateCloud::travel_score(Point x, double t) const {
    thread_local std::vector<double> px, py, w;
    px.clear();
    py.clear();
    w.clear();
    for (const CloudPoint& p : points_) {
        if (p.tau > t || t - p.tau > params_.t_max) continue;
        px.push_back(p.pos.x);
        py.push_back(p.pos.y);
        w.push_back(weight(p, t));
    }
    if (px.empty()) return kEmptyCloudScore;
    return simd::kernels().min_weighted_distance(x.x, x.y, px.data(), py.data(), w.data(),
                                                 params_.epsilon, px.size());
}

int select_representative(const TimeCluster& cluster, const HandStateCloud& cloud, const PipelineConfig& cfg) {
    if (cluster.members.empty()) throw std::invalid_argument("cannot select from an empty cluster");
    std::vector<double> scores;
    scores.reserve(cluster.members.size());
    for (const TouchThread& m : cluster.members) scores.push_back(cloud.travel_score(m.x_start, m.t_start));
    const double best = *std::max_element(scores.begin(), scores.end());
    const double floor = best - cfg.tie_tolerance * std::abs(best);

    const TouchThread* pick = nullptr;
    for (std::size_t i = 0; i < cluster.members.size(); ++i) {
        if (scores[i] < floor) continue;
        const TouchThread& m = cluster.members[i];
        if (!pick || m.t_start > pick->t_start || (m.t_start == pick->t_start && m.id > pick->id)) pick = &m;
    }
    return pick->id;
}

// ---------------------------------------------------------------------------
// Composition

PipelineOutput resolve_word(std::span<const TouchThread> threads, HandStateCloud& cloud, const KeyLayout& layout,
                            const PipelineConfig& cfg) {
    PipelineOutput out;
    out.thread_count = static_cast<int>(threads.size());
    for (const TouchThread& th : threads) out.event_count += th.event_count;

    const Clustering clustering = cluster_threads(threads, cfg);
    out.discarded_clusters = clustering.discarded;
    std::vector<CloudPoint> contacts;
    for (std::size_t c = 0; c < clustering.clusters.size(); ++c) {
        const TimeCluster& cluster = clustering.clusters[c];
        int chosen = -1;
        if (clustering.retained[c]) {
            chosen = select_representative(cluster, cloud, cfg);
        }
        contacts.clear();
        double now = cluster.anchor_onset;
        for (const TouchThread& m : cluster.members) {
            if (m.id == chosen) {
                out.letters.push_back(layout.nearest_key(m.x_start));
                out.representatives.push_back({m.id, m.x_start, m.t_start});
                out.intended_event_count += m.event_count;
            } else {
                out.suppressed.push_back(m.id);
            }
            contacts.push_back({m.x_start, m.t_start});
            contacts.push_back({m.x_end, m.t_end});
            now = std::max(now, m.t_end);
        }
        cloud.update(contacts, now);
    }
    return out;
}

PipelineOutput run_pipeline(std::span<const RawTouchEvent> events, const KeyLayout& layout,
                            const PipelineConfig& cfg) {
    ThreadTracker tracker(cfg);
    for (const RawTouchEvent& e : events) tracker.ingest(e);
    tracker.flush();
    HandStateCloud cloud(cfg.cloud);
    PipelineOutput out = resolve_word(tracker.threads(), cloud, layout, cfg);
    out.event_count += tracker.stray_count();
    return out;
}

std::vector<WordOutput> replay_log(std::span<const RawTouchEvent> events, const KeyLayout& layout,
                                   const PipelineConfig& cfg) {
    std::vector<std::string> session_order;
    std::map<std::string, std::vector<const RawTouchEvent*>> by_session;
    for (const RawTouchEvent& e : events) {
        auto [it, fresh] = by_session.try_emplace(e.session);
        if (fresh) session_order.push_back(e.session);
        it->second.push_back(&e);
    }

    std::vector<WordOutput> out;
    for (const std::string& session : session_order) {
        const auto& stream = by_session[session];
        ThreadTracker tracker(cfg);
        HandStateCloud cloud(cfg.cloud);
        std::size_t i = 0;
        while (i < stream.size()) {
            const int word = stream[i]->word_id;
            const std::size_t first_thread = tracker.threads().size();
            const int strays_before = tracker.stray_count();
            for (; i < stream.size() && stream[i]->word_id == word; ++i) tracker.ingest(*stream[i]);
            std::vector<TouchThread> word_threads(tracker.threads().begin() + static_cast<std::ptrdiff_t>(first_thread),
                                                  tracker.threads().end());
            WordOutput w{session, word, resolve_word(word_threads, cloud, layout, cfg)};
            w.output.event_count += tracker.stray_count() - strays_before;
            out.push_back(std::move(w));
        }
    }
    return out;
}

}  // namespace handsdown
