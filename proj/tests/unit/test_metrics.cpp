#include "handsdown/metrics.hpp"

#include "doctest.h"

#include <random>

using namespace handsdown;

namespace {

TrialRecord trial(std::string gold, std::vector<std::string> ranked, int ed = 0) {
    return {std::move(gold), std::move(ranked), ed};
}

}  // namespace

TEST_CASE("top-k report examples") {
    const std::vector<TrialRecord> perfect{trial("the", {"the", "then"}), trial("house", {"house"})};
    const EvalReport a = topk_report(perfect);
    CHECK(a.em(1) == 1.0);
    CHECK(a.overall.avg_ed == 0.0);

    const std::vector<TrialRecord> third{trial("the", {"then", "they", "the"}), trial("cat", {"car", "bat", "cat", "hat"})};
    const EvalReport b = topk_report(third);
    CHECK(b.em(1) == 0.0);
    CHECK(b.em(3) == 1.0);
    CHECK(b.overall.avg_ed == doctest::Approx(1.0));

    CHECK_THROWS_AS(topk_report({}), std::invalid_argument);
    CHECK_THROWS_AS(topk_report(perfect, {0}), std::invalid_argument);
}

TEST_CASE("top-k report buckets and monotonicity") {
    CHECK(length_bucket(7) == 0);
    CHECK(length_bucket(8) == 1);
    CHECK(length_bucket(14) == 1);
    CHECK(length_bucket(15) == 2);

    std::mt19937_64 rng(2);
    std::vector<TrialRecord> trials;
    const std::vector<std::string> pool{"a", "ab", "abc", "abcdefghi", "abcdefghijklmnop", "zz"};
    for (int i = 0; i < 500; ++i) {
        std::vector<std::string> ranked;
        for (int k = 0; k < 6; ++k) ranked.push_back(pool[rng() % pool.size()]);
        trials.push_back(trial(pool[rng() % pool.size()], ranked, static_cast<int>(rng() % 4)));
    }
    trials.push_back(trial("abc", {}, 1));
    const EvalReport r = topk_report(trials);
    CHECK(r.empty_rankings == 1);
    for (std::size_t i = 1; i < r.ks.size(); ++i) CHECK(r.overall.em[i - 1] <= r.overall.em[i]);
    std::size_t n = 0;
    for (const AccuracySlice& s : r.by_bucket) n += s.n;
    CHECK(n == trials.size());
    CHECK_FALSE(report_to_json(r, "ngram").empty());
    CHECK(report_to_csv(r).find("length,") != std::string::npos);
}

TEST_CASE("words per minute") {
    CHECK(wpm(25, 1.0) == 5.0);
    CHECK(wpm(250, 2.0) == 25.0);
    CHECK_THROWS_AS(wpm(10, 0.0), std::invalid_argument);
}

TEST_CASE("word error rate") {
    CHECK(wer("the quick brown fox jumps", "the quick brown fox jumps") == 0.0);
    CHECK(wer("the quick brown cat jumps", "the quick brown fox jumps") == 0.2);
    CHECK(wer("a b c", "a x c d") == 0.5);
    CHECK(wer("", "a b c") == 1.0);
    // The word-level distance is symmetric.
    CHECK(wer("a b", "c d e a") * 4 == wer("c d e a", "a b") * 2);
}

TEST_CASE("correction statistics") {
    std::vector<SessionEvent> clean{{SessionEventKind::Start, 0}};
    for (int i = 0; i < 5; ++i) clean.push_back({SessionEventKind::Commit, 1000.0 * (i + 1)});
    const CorrectionStats a = correction_stats(clean);
    CHECK(a.cer == 0.0);
    CHECK(a.per_minute == 0.0);

    std::vector<SessionEvent> log{{SessionEventKind::Start, 0}};
    for (int i = 0; i < 40; ++i) log.push_back({SessionEventKind::Commit, 1000.0 * (i + 1)});
    log.push_back({SessionEventKind::WordDeleted, 41000});
    log.push_back({SessionEventKind::WordDeleted, 50000});
    log.push_back({SessionEventKind::Cleared, 60000});
    const CorrectionStats b = correction_stats(log);
    CHECK(b.cer == 0.05);
    CHECK(b.per_minute == 3.0);

    const std::vector<SessionEvent> no_start{{SessionEventKind::Commit, 5}};
    CHECK_THROWS_AS(correction_stats(no_start), std::invalid_argument);
}

TEST_CASE("intent ratio") {
    CHECK(intent_ratio(3, 6, 10, 40) == 0.375);
    CHECK(intent_ratio(5, 5, 9, 9) == 1.0);
    CHECK(intent_ratio(5, 5, 8, 9) < 1.0);
    CHECK_THROWS_AS(intent_ratio(0, 0, 1, 1), std::invalid_argument);
}

TEST_CASE("time allocation") {
    const std::vector<Span> whole{{0, 100000}};
    const TimeAllocation a = time_allocation(whole, {0, 100000});
    CHECK(a.within == 1.0);
    CHECK(a.between == 0.0);

    const std::vector<Span> words{{0, 30000}, {40000, 70000}, {80000, 100000}};
    const TimeAllocation b = time_allocation(words, {0, 100000});
    CHECK(b.within == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(b.within + b.between == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("interval study") {
    const std::map<std::string, std::vector<double>> one{{"u1", {50, 150, 90, 300}}};
    const IntervalStudyResult a = interval_study(one);
    CHECK(a.fraction == 0.5);
    CHECK(a.median_gap == 120.0);

    const std::map<std::string, std::vector<double>> slow{{"u1", {150, 200}}, {"u2", {400}}};
    const IntervalStudyResult b = interval_study(slow);
    CHECK(b.fraction == 0.0);
    CHECK(b.ci_low == 0.0);
    CHECK(b.ci_high == 0.0);

    const std::map<std::string, std::vector<double>> mixed{
        {"u1", {50, 150, 90, 300}}, {"u2", {20, 500, 250}}, {"u3", {300, 320}}};
    const IntervalStudyResult c = interval_study(mixed);
    CHECK(c.ci_low <= c.fraction);
    CHECK(c.fraction <= c.ci_high);
    const IntervalStudyResult d = interval_study(mixed);
    CHECK(c.ci_low == d.ci_low);
    CHECK(c.ci_high == d.ci_high);

    CHECK_THROWS_AS(interval_study(std::map<std::string, std::vector<double>>{}), std::invalid_argument);
}
