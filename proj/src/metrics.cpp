#include "handsdown/metrics.hpp"

#include "handsdown/edit_distance.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace handsdown {

using nlohmann::json;

int length_bucket(int length) {
    if (length <= 7) return 0;
    if (length <= 14) return 1;
    return 2;
}

std::string_view length_bucket_label(int bucket) {
    switch (bucket) {
        case 0: return "<=7";
        case 1: return "8-14";
        default: return ">=15";
    }
}

double EvalReport::em(int k) const {
    const auto it = std::find(ks.begin(), ks.end(), k);
    if (it == ks.end()) throw std::invalid_argument("k not in report");
    return overall.em[static_cast<std::size_t>(it - ks.begin())];
}

namespace {

struct SliceAccumulator {
    std::size_t n = 0;
    std::vector<std::size_t> hits;
    double ed_sum = 0.0;

    explicit SliceAccumulator(std::size_t nk = 0) : hits(nk, 0) {}

    void add(const TrialRecord& t, const std::vector<int>& ks) {
        ++n;
        const auto pos = std::find(t.ranked.begin(), t.ranked.end(), t.gold);
        const auto rank = static_cast<int>(pos - t.ranked.begin());  // == size when absent
        for (std::size_t i = 0; i < ks.size(); ++i) {
            if (pos != t.ranked.end() && rank < ks[i]) ++hits[i];
        }
        // An empty ranking counts as producing the empty string.
        ed_sum += t.ranked.empty() ? static_cast<double>(t.gold.size()) : levenshtein(t.ranked.front(), t.gold);
    }

    AccuracySlice finish() const {
        AccuracySlice s;
        s.n = n;
        for (std::size_t h : hits) s.em.push_back(n ? static_cast<double>(h) / static_cast<double>(n) : 0.0);
        s.avg_ed = n ? ed_sum / static_cast<double>(n) : 0.0;
        return s;
    }
};

json slice_json(const AccuracySlice& s, const std::vector<int>& ks) {
    json em = json::object();
    for (std::size_t i = 0; i < ks.size(); ++i) em["EM@" + std::to_string(ks[i])] = s.em[i];
    return json{{"n", s.n}, {"em", std::move(em)}, {"avg_ed", s.avg_ed}};
}

}  // namespace

EvalReport topk_report(std::span<const TrialRecord> trials, std::vector<int> ks) {
    if (trials.empty()) throw std::invalid_argument("no trials");
    if (ks.empty() || *std::min_element(ks.begin(), ks.end()) < 1) throw std::invalid_argument("ks must be >= 1");
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

    SliceAccumulator overall(ks.size());
    std::vector<SliceAccumulator> buckets(kLengthBuckets, SliceAccumulator(ks.size()));
    std::map<int, SliceAccumulator> by_ed;
    EvalReport rep;
    for (const TrialRecord& t : trials) {
        overall.add(t, ks);
        buckets[static_cast<std::size_t>(length_bucket(static_cast<int>(t.gold.size())))].add(t, ks);
        by_ed.try_emplace(t.realized_ed, ks.size()).first->second.add(t, ks);
        if (t.ranked.empty()) ++rep.empty_rankings;
    }
    rep.ks = ks;
    rep.overall = overall.finish();
    for (const auto& b : buckets) rep.by_bucket.push_back(b.finish());
    for (const auto& [ed, acc] : by_ed) rep.by_ed[ed] = acc.finish();
    return rep;
}

std::string report_to_json(const EvalReport& report, std::string_view backend) {
    json buckets = json::object();
    for (int b = 0; b < kLengthBuckets; ++b) {
        buckets[std::string(length_bucket_label(b))] = slice_json(report.by_bucket[static_cast<std::size_t>(b)], report.ks);
    }
    json by_ed = json::object();
    for (const auto& [ed, s] : report.by_ed) by_ed[std::to_string(ed)] = slice_json(s, report.ks);
    json doc{{"backend", backend},
             {"overall", slice_json(report.overall, report.ks)},
             {"by_length", std::move(buckets)},
             {"by_ed", std::move(by_ed)},
             {"empty_rankings", report.empty_rankings},
             {"reference_em1", {{"neural", reference::kEm1Neural},
                                {"ngram", reference::kEm1Ngram},
                                {"bayes", reference::kEm1Bayes}}}};
    return doc.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "slice,label,n";
    for (int k : report.ks) out << ",em" << k;
    out << ",avg_ed\n";
    auto row = [&](std::string_view kind, std::string_view label, const AccuracySlice& s) {
        out << kind << ',' << label << ',' << s.n;
        for (double e : s.em) out << ',' << e;
        out << ',' << s.avg_ed << '\n';
    };
    row("overall", "all", report.overall);
    for (int b = 0; b < kLengthBuckets; ++b) row("length", length_bucket_label(b), report.by_bucket[static_cast<std::size_t>(b)]);
    for (const auto& [ed, s] : report.by_ed) row("ed", std::to_string(ed), s);
    return out.str();
}

double wpm(std::size_t chars, double minutes) {
    if (!(minutes > 0)) throw std::invalid_argument("elapsed time must be positive");
    return static_cast<double>(chars) / (5.0 * minutes);
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

double wer(std::span<const std::string> transcribed, std::span<const std::string> presented) {
    if (presented.empty()) throw std::invalid_argument("presented phrase has no words");
    return static_cast<double>(sequence_distance(transcribed, presented)) / static_cast<double>(presented.size());
}

double wer(std::string_view transcribed, std::string_view presented) {
    const auto t = split_words(transcribed);
    const auto p = split_words(presented);
    return wer(std::span<const std::string>(t), std::span<const std::string>(p));
}

CorrectionStats correction_stats(std::span<const SessionEvent> log) {
    const auto start = std::find_if(log.begin(), log.end(),
                                    [](const SessionEvent& e) { return e.kind == SessionEventKind::Start; });
    if (start == log.end()) throw std::invalid_argument("session log has no start marker");
    CorrectionStats s;
    double last = start->t;
    for (const SessionEvent& e : log) {
        if (!std::isfinite(e.t)) throw std::invalid_argument("session event without a valid timestamp");
        last = std::max(last, e.t);
        switch (e.kind) {
            case SessionEventKind::Commit: ++s.committed; break;
            case SessionEventKind::WordDeleted: ++s.corrected; ++s.backspaces; break;
            case SessionEventKind::Cleared: ++s.backspaces; break;
            case SessionEventKind::Start: break;
        }
    }
    s.cer = s.committed ? static_cast<double>(s.corrected) / static_cast<double>(s.committed) : 0.0;
    const double minutes = (last - start->t) / 60000.0;
    s.per_minute = minutes > 0 ? static_cast<double>(s.backspaces) / minutes : 0.0;
    return s;
}

double intent_ratio(std::size_t intended_threads, std::size_t total_threads, std::size_t intended_events,
                    std::size_t total_events) {
    if (total_threads == 0 || total_events == 0) throw std::invalid_argument("intent ratio needs non-zero totals");
    if (intended_threads > total_threads || intended_events > total_events) {
        throw std::invalid_argument("intended count exceeds total");
    }
    return 0.5 * static_cast<double>(intended_threads) / static_cast<double>(total_threads) +
           0.5 * static_cast<double>(intended_events) / static_cast<double>(total_events);
}

TimeAllocation time_allocation(std::span<const Span> words, Span session) {
    const double total = session.end - session.begin;
    if (words.size() <= 1 || !(total > 0)) return {1.0, 0.0};
    double within = 0.0;
    for (const Span& w : words) within += std::max(0.0, w.end - w.begin);
    within = std::min(within / total, 1.0);
    return {within, 1.0 - within};
}

TimeAllocation time_allocation(std::span<const RawTouchEvent> events) {
    std::vector<Span> words;
    if (events.empty()) return {};
    int current = events.front().word_id;
    Span span{events.front().t, events.front().t};
    for (const RawTouchEvent& e : events) {
        if (e.word_id != current) {
            words.push_back(span);
            current = e.word_id;
            span = {e.t, e.t};
        }
        span.end = e.t;
    }
    words.push_back(span);
    return time_allocation(words, Span{events.front().t, events.back().t});
}

std::map<std::string, std::vector<double>> intentional_gaps(std::span<const RawTouchEvent> events) {
    std::map<std::string, std::vector<double>> gaps;
    std::map<std::pair<std::string, std::string>, double> last_onset;  // (user, session) -> onset
    for (const RawTouchEvent& e : events) {
        if (e.kind != TouchKind::Down || !e.intent.value_or(false)) continue;
        const std::string& user = e.user ? *e.user : e.session;
        const auto key = std::make_pair(user, e.session);
        auto& series = gaps[user];
        const auto it = last_onset.find(key);
        if (it != last_onset.end()) series.push_back(e.t - it->second);
        last_onset[key] = e.t;
    }
    return gaps;
}

namespace {

double quantile(std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

IntervalStudyResult interval_study(const std::map<std::string, std::vector<double>>& gaps,
                                   const IntervalStudyConfig& cfg) {
    if (cfg.bootstrap_reps < 1) throw std::invalid_argument("bootstrap needs at least one replicate");
    if (!(cfg.confidence > 0 && cfg.confidence < 1)) throw std::invalid_argument("confidence must lie in (0,1)");
    IntervalStudyResult res;
    std::vector<std::pair<std::size_t, std::size_t>> users;  // (below, total)
    std::vector<double> pooled;
    for (const auto& [user, g] : gaps) {
        if (g.empty()) continue;
        const auto below = static_cast<std::size_t>(
            std::count_if(g.begin(), g.end(), [&](double v) { return v <= cfg.threshold_ms; }));
        users.emplace_back(below, g.size());
        res.per_user[user] = static_cast<double>(below) / static_cast<double>(g.size());
        pooled.insert(pooled.end(), g.begin(), g.end());
    }
    if (pooled.empty()) throw std::invalid_argument("no intentional inter-onset gaps");
    res.gaps = gaps;
    res.gap_count = pooled.size();
    std::size_t below = 0;
    for (const auto& [b, n] : users) below += b;
    res.fraction = static_cast<double>(below) / static_cast<double>(pooled.size());

    std::sort(pooled.begin(), pooled.end());
    const std::size_t mid = pooled.size() / 2;
    res.median_gap = pooled.size() % 2 ? pooled[mid] : 0.5 * (pooled[mid - 1] + pooled[mid]);

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, users.size() - 1);
    std::vector<double> stats(static_cast<std::size_t>(cfg.bootstrap_reps));
    for (double& s : stats) {
        std::size_t b = 0, n = 0;
        for (std::size_t i = 0; i < users.size(); ++i) {
            const auto& u = users[pick(rng)];
            b += u.first;
            n += u.second;
        }
        s = static_cast<double>(b) / static_cast<double>(n);
    }
    std::sort(stats.begin(), stats.end());
    const double tail = (1.0 - cfg.confidence) / 2.0;
    res.ci_low = quantile(stats, tail);
    res.ci_high = quantile(stats, 1.0 - tail);
    return res;
}

IntervalStudyResult interval_study(std::span<const RawTouchEvent> events, const IntervalStudyConfig& cfg) {
    return interval_study(intentional_gaps(events), cfg);
}

}  // namespace handsdown
