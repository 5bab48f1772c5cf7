#pragma once

// Touch pipeline: raw events -> touch threads -> time clusters ->
// one representative per cluster -> nearest-key letters.

#include "handsdown/geometry.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace handsdown {

enum class TouchKind : std::uint8_t { Down, Move, Up };

std::string_view to_string(TouchKind k);

struct RawTouchEvent {
    TouchKind kind = TouchKind::Down;
    double t = 0.0;  // ms, monotonic within a session
    Point pos;
    std::string session;
    int word_id = 0;
    std::optional<bool> intent;
    std::optional<std::string> user;
};

/// Touch-log JSONL: {"session","word_id","kind","t","x","y","intent"}.
/// Optional "user" overrides the session as the user id.
RawTouchEvent parse_touch_event(std::string_view line);
std::string format_touch_event(const RawTouchEvent& e);
std::vector<RawTouchEvent> load_touch_log(const std::string& path);

/// Timestamps went backwards within a stream.
class StreamError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A single event was malformed (e.g. outside the unit square); the stream
/// state is unchanged.
class RejectedEvent : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CloudParams {
    double rho = 0.9;       // decay factor per step
    double delta = 50.0;    // decay step, ms
    double t_max = 1000.0;  // pruning horizon, ms
    double epsilon = 1e-3;  // weight floor
};

struct PipelineConfig {
    double tau_c = 100.0;     // cognitive window, ms
    int kappa = 3;            // clusters larger than this are discarded
    double cell = 0.06;       // spatial hash cell size
    double radius = 0.05;     // association radius
    double t_gap = 120.0;     // association gap, ms
    CloudParams cloud;
    double tie_tolerance = 0.05;  // relative

    /// Throws std::invalid_argument when an invariant fails.
    void validate() const;
};

struct TouchThread {
    int id = 0;
    double t_start = 0.0;
    double t_end = 0.0;
    Point x_start;
    Point x_end;
    std::vector<Point> polyline;  // intermediate moves
    bool open = true;
    int event_count = 0;
    std::optional<bool> intent;  // label of the opening down, when annotated
};

/// Thread formation with a uniform-grid spatial hash over the last
/// endpoints of open threads. Association probes the containing cell and
/// its 8 neighbours.
class ThreadTracker {
public:
    struct Result {
        int thread = -1;          // thread the event was attached to, -1 for strays
        bool opened = false;
        bool closed = false;
    };

    explicit ThreadTracker(PipelineConfig cfg);

    /// Throws StreamError on out-of-order time, RejectedEvent on bad positions.
    Result ingest(const RawTouchEvent& e);

    /// Closes every open thread at its last endpoint.
    void flush();

    const std::vector<TouchThread>& threads() const { return threads_; }
    const TouchThread& thread(int id) const { return threads_.at(static_cast<std::size_t>(id)); }
    int stray_count() const { return strays_; }
    int down_count() const { return downs_; }
    double last_time() const { return last_t_; }

private:
    int cell_coord(double v) const;
    std::size_t cell_index(Point p) const;
    void unlink(int id);
    void link(int id);
    int find_match(Point p, double t);

    PipelineConfig cfg_;
    int side_ = 1;
    std::vector<std::vector<int>> cells_;
    std::vector<std::size_t> cell_of_;
    std::vector<TouchThread> threads_;
    double last_t_ = -std::numeric_limits<double>::infinity();
    int strays_ = 0;
    int downs_ = 0;
};

struct TimeCluster {
    double anchor_onset = 0.0;
    std::vector<TouchThread> members;  // sorted by onset
};

struct Clustering {
    std::vector<TimeCluster> clusters;  // every cluster, in anchor order
    std::vector<bool> retained;         // parallel to clusters
    int discarded = 0;
};

/// Greedy pass over onset-sorted threads: a thread joins the current
/// cluster iff onset - anchor <= tau_c. Clusters with more than kappa
/// members are marked discarded.
Clustering cluster_threads(std::span<const TouchThread> threads, const PipelineConfig& cfg);

struct CloudPoint {
    Point pos;
    double tau = 0.0;  // ms
};

/// Largest finite score; returned by travel_score for an empty cloud so a
/// cold-start contact is always selectable.
inline constexpr double kEmptyCloudScore = std::numeric_limits<double>::max();

/// Decaying memory of recent finger endpoints.
class HandStateCloud {
public:
    explicit HandStateCloud(CloudParams params = {});

    const CloudParams& params() const { return params_; }
    const std::vector<CloudPoint>& points() const { return points_; }
    bool empty() const { return points_.empty(); }

    /// rho^((t - tau) / delta); age clamped at zero.
    double weight(const CloudPoint& p, double t) const;

    /// Appends contacts, then prunes points with now - tau > t_max.
    /// Throws std::invalid_argument if a contact is later than `now`.
    void update(std::span<const CloudPoint> contacts, double now);

    /// min over points with tau <= t and t - tau <= t_max of
    /// |x - p| / max(w(t), epsilon); kEmptyCloudScore when none qualify.
    double travel_score(Point x, double t) const;

private:
    CloudParams params_;
    std::vector<CloudPoint> points_;
};

/// Member of the cluster with the highest travel score; members within the
/// relative tie tolerance of the best are resolved to the latest onset.
int select_representative(const TimeCluster& cluster, const HandStateCloud& cloud,
                          const PipelineConfig& cfg);

struct Representative {
    int thread = 0;
    Point pos;
    double onset = 0.0;
};

struct PipelineOutput {
    std::string letters;
    std::vector<Representative> representatives;
    std::vector<int> suppressed;
    int discarded_clusters = 0;
    int thread_count = 0;
    int event_count = 0;           // includes strays
    int intended_event_count = 0;  // events of selected threads
};

/// Clusters `threads` and resolves each cluster against `cloud`, which is
/// updated with every contact (selected or not) as clusters are consumed.
PipelineOutput resolve_word(std::span<const TouchThread> threads, HandStateCloud& cloud,
                            const KeyLayout& layout, const PipelineConfig& cfg);

/// Full pipeline for one word's events starting from an empty cloud.
PipelineOutput run_pipeline(std::span<const RawTouchEvent> events, const KeyLayout& layout,
                            const PipelineConfig& cfg);

struct WordOutput {
    std::string session;
    int word_id = 0;
    PipelineOutput output;
};

/// Replays a multi-word log. Words are consecutive (session, word_id) runs;
/// the hand-state cloud persists across words of a session.
std::vector<WordOutput> replay_log(std::span<const RawTouchEvent> events, const KeyLayout& layout,
                                   const PipelineConfig& cfg);

}  // namespace handsdown
