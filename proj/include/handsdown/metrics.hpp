#pragma once

// Accuracy, speed, error-rate and interaction measures, plus the
// inter-onset interval study.

#include "handsdown/touch.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace handsdown {

// Reference figures from the published study. Reported next to measured
// values, never asserted.
namespace reference {
inline constexpr double kEm1Neural = 0.848;
inline constexpr double kEm1Ngram = 0.757;
inline constexpr double kEm1Bayes = 0.793;
inline constexpr double kIntervalFraction = 0.0217;
inline constexpr double kIntervalCiLow = 0.0087;
inline constexpr double kIntervalCiHigh = 0.0375;
inline constexpr double kLatencyInferenceMs = 53.70;
}  // namespace reference

/// 0: L <= 7, 1: 8..14, 2: >= 15.
int length_bucket(int length);
std::string_view length_bucket_label(int bucket);
inline constexpr int kLengthBuckets = 3;

struct TrialRecord {
    std::string gold;
    std::vector<std::string> ranked;
    int realized_ed = 0;
};

struct AccuracySlice {
    std::size_t n = 0;
    std::vector<double> em;  // parallel to EvalReport::ks
    double avg_ed = 0.0;     // Top-1 vs gold
};

struct EvalReport {
    std::vector<int> ks;
    AccuracySlice overall;
    std::vector<AccuracySlice> by_bucket;    // kLengthBuckets entries
    std::map<int, AccuracySlice> by_ed;      // realized input ED
    std::size_t empty_rankings = 0;

    double em(int k) const;  // overall EM@k
};

/// Throws std::invalid_argument for an empty trial list or k < 1.
EvalReport topk_report(std::span<const TrialRecord> trials, std::vector<int> ks = {1, 2, 3, 5});

std::string report_to_json(const EvalReport& report, std::string_view backend);
/// Rows: slice kind, slice label, n, EM@k..., AvgED.
std::string report_to_csv(const EvalReport& report);

/// |S| / (5 T). Throws for minutes <= 0.
double wpm(std::size_t chars, double minutes);

std::vector<std::string> split_words(std::string_view text);

/// Word-level minimum string distance divided by the presented word count.
double wer(std::span<const std::string> transcribed, std::span<const std::string> presented);
double wer(std::string_view transcribed, std::string_view presented);

enum class SessionEventKind { Start, Commit, WordDeleted, Cleared };

struct SessionEvent {
    SessionEventKind kind;
    double t = 0.0;  // ms
};

struct CorrectionStats {
    double cer = 0.0;              // corrected / committed words
    double per_minute = 0.0;       // backspace corrections per minute
    std::size_t committed = 0;
    std::size_t corrected = 0;
    std::size_t backspaces = 0;    // effective backspaces (deletions + clears)
};

/// Minutes run from the start marker to the last event. Throws
/// std::invalid_argument when no start marker is present.
CorrectionStats correction_stats(std::span<const SessionEvent> log);

/// (intended threads / total threads + intended events / total events) / 2.
double intent_ratio(std::size_t intended_threads, std::size_t total_threads, std::size_t intended_events,
                    std::size_t total_events);

struct TimeAllocation {
    double within = 1.0;
    double between = 0.0;
};

struct Span {
    double begin = 0.0;
    double end = 0.0;
};

TimeAllocation time_allocation(std::span<const Span> words, Span session);
/// Word spans from (word_id) runs of one session's events.
TimeAllocation time_allocation(std::span<const RawTouchEvent> session_events);

struct IntervalStudyConfig {
    double threshold_ms = 100.0;
    int bootstrap_reps = 10000;
    std::uint64_t seed = 12345;
    double confidence = 0.95;
};

struct IntervalStudyResult {
    double fraction = 0.0;  // pooled share of gaps <= threshold
    double ci_low = 0.0;
    double ci_high = 0.0;
    double median_gap = 0.0;
    std::size_t gap_count = 0;
    std::map<std::string, double> per_user;
    std::map<std::string, std::vector<double>> gaps;  // per user
};

/// Onset gaps between consecutive intentional downs, per user and session.
std::map<std::string, std::vector<double>> intentional_gaps(std::span<const RawTouchEvent> events);

/// Pooled fraction with a percentile bootstrap that resamples users.
/// Throws std::invalid_argument when there are no gaps.
IntervalStudyResult interval_study(const std::map<std::string, std::vector<double>>& gaps,
                                   const IntervalStudyConfig& cfg = {});
IntervalStudyResult interval_study(std::span<const RawTouchEvent> events, const IntervalStudyConfig& cfg = {});

}  // namespace handsdown
