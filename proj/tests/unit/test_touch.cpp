#include "handsdown/touch.hpp"

#include "oracles.hpp"

#include "doctest.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

using namespace handsdown;

namespace {

RawTouchEvent ev(TouchKind kind, double t, Point p) {
    RawTouchEvent e;
    e.kind = kind;
    e.t = t;
    e.pos = p;
    e.session = "s";
    return e;
}

void tap(std::vector<RawTouchEvent>& out, double t, Point p, double hold = 60.0) {
    out.push_back(ev(TouchKind::Down, t, p));
    out.push_back(ev(TouchKind::Up, t + hold, p));
}

TouchThread thread_at(int id, double onset, Point p) {
    TouchThread th;
    th.id = id;
    th.t_start = th.t_end = onset;
    th.x_start = th.x_end = p;
    th.open = false;
    th.event_count = 2;
    return th;
}

const KeyLayout& qwerty() {
    static const KeyLayout layout = KeyLayout::qwerty();
    return layout;
}

}  // namespace

TEST_CASE("default pipeline config is valid and validation catches bad values") {
    PipelineConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    PipelineConfig bad = cfg;
    bad.tau_c = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.kappa = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.radius = cfg.cell * 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.cloud.epsilon = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("thread formation examples") {
    PipelineConfig cfg;
    const Point p{0.4, 0.4};

    SUBCASE("stationary tap") {
        ThreadTracker tr(cfg);
        tr.ingest(ev(TouchKind::Down, 0, p));
        const auto r = tr.ingest(ev(TouchKind::Up, 40, p));
        CHECK(r.closed);
        REQUIRE(tr.threads().size() == 1);
        CHECK(tr.threads()[0].x_start == p);
        CHECK(tr.threads()[0].x_end == p);
        CHECK_FALSE(tr.threads()[0].open);
    }
    SUBCASE("one move gives a one-segment polyline") {
        ThreadTracker tr(cfg);
        const Point q{p.x + 0.3 * cfg.radius, p.y};
        tr.ingest(ev(TouchKind::Down, 0, p));
        tr.ingest(ev(TouchKind::Move, 10, q));
        tr.ingest(ev(TouchKind::Up, 20, q));
        REQUIRE(tr.threads().size() == 1);
        CHECK(tr.threads()[0].polyline.size() == 1);
        CHECK(tr.threads()[0].x_end == q);
    }
    SUBCASE("up closes the nearest open thread") {
        ThreadTracker tr(cfg);
        const Point q{p.x + 2 * cfg.radius, p.y};
        tr.ingest(ev(TouchKind::Down, 0, p));
        tr.ingest(ev(TouchKind::Down, 5, q));
        tr.ingest(ev(TouchKind::Up, 30, {p.x + 0.2 * cfg.radius, p.y}));
        CHECK_FALSE(tr.threads()[0].open);
        CHECK(tr.threads()[1].open);
    }
}

TEST_CASE("thread formation errors and strays") {
    PipelineConfig cfg;
    ThreadTracker tr(cfg);
    tr.ingest(ev(TouchKind::Down, 100, {0.5, 0.5}));
    CHECK_THROWS_AS(tr.ingest(ev(TouchKind::Up, 99, {0.5, 0.5})), StreamError);
    CHECK_THROWS_AS(tr.ingest(ev(TouchKind::Down, 101, {1.5, 0.5})), RejectedEvent);
    // A rejected event leaves the stream usable.
    tr.ingest(ev(TouchKind::Up, 110, {0.9, 0.1}));
    CHECK(tr.stray_count() == 1);
    tr.ingest(ev(TouchKind::Up, 300, {0.5, 0.5}));
    CHECK(tr.stray_count() == 2);  // beyond t_gap
    CHECK(tr.threads()[0].open);
}

TEST_CASE("every down opens a thread and each up closes at most one") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PipelineConfig cfg;
    ThreadTracker tr(cfg);
    double t = 0;
    int ups = 0;
    for (int i = 0; i < 5000; ++i) {
        t += u(rng) * 20;
        const double r = u(rng);
        const TouchKind k = r < 0.4 ? TouchKind::Down : (r < 0.7 ? TouchKind::Move : TouchKind::Up);
        if (k == TouchKind::Up) ++ups;
        tr.ingest(ev(k, t, {u(rng), u(rng)}));
    }
    CHECK(static_cast<int>(tr.threads().size()) == tr.down_count());
    const auto closed = std::count_if(tr.threads().begin(), tr.threads().end(), [](const TouchThread& th) { return !th.open; });
    CHECK(closed <= ups);
    for (const TouchThread& th : tr.threads()) CHECK(th.t_start <= th.t_end);
}

TEST_CASE("clustering examples") {
    PipelineConfig cfg;
    auto onsets = [&](std::vector<double> ts) {
        std::vector<TouchThread> th;
        for (std::size_t i = 0; i < ts.size(); ++i) th.push_back(thread_at(static_cast<int>(i), ts[i], {0.1 * (i + 1), 0.4}));
        return cluster_threads(th, cfg);
    };
    CHECK(onsets({0, 90}).clusters.size() == 1);
    CHECK(onsets({0, 150}).clusters.size() == 2);
    const Clustering c = onsets({0, 60, 120});
    REQUIRE(c.clusters.size() == 2);
    CHECK(c.clusters[0].members.size() == 2);
    CHECK(c.clusters[1].members.size() == 1);
    CHECK(c.clusters[1].anchor_onset == 120);

    const Clustering big = onsets({0, 1, 2, 3});
    CHECK(big.discarded == 1);
    CHECK_FALSE(big.retained[0]);
}

TEST_CASE("clustering follows the anchor law on random onsets") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> gap(0.0, 160.0);
    PipelineConfig cfg;
    cfg.kappa = 1000;
    for (int rep = 0; rep < 300; ++rep) {
        std::vector<TouchThread> th;
        double t = 0;
        for (int i = 0; i < 20; ++i) {
            t += gap(rng);
            th.push_back(thread_at(i, t, {0.5, 0.5}));
        }
        std::shuffle(th.begin(), th.end(), rng);
        const Clustering c = cluster_threads(th, cfg);
        std::vector<double> sorted;
        for (const TouchThread& x : th) sorted.push_back(x.t_start);
        std::sort(sorted.begin(), sorted.end());
        const std::vector<int> labels = oracle::cluster_labels(sorted, cfg.tau_c);
        std::size_t k = 0;
        for (std::size_t ci = 0; ci < c.clusters.size(); ++ci) {
            for (const TouchThread& m : c.clusters[ci].members) {
                CHECK(m.t_start == sorted[k]);
                CHECK(labels[k] == static_cast<int>(ci));
                ++k;
            }
        }
        CHECK(k == sorted.size());
    }
}

TEST_CASE("travel score examples") {
    HandStateCloud empty;
    CHECK(empty.travel_score({0.5, 0.5}, 0) == kEmptyCloudScore);

    HandStateCloud one;
    const CloudPoint p{{0.3, 0.3}, 100};
    one.update(std::span(&p, 1), 100);
    CHECK(one.travel_score({0.3, 0.5}, 100) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(one.travel_score({0.3, 0.3}, 100) == 0.0);

    // Point 2 carries weight 0.5 by being one decay step old under rho = 0.5.
    CloudParams params;
    params.rho = 0.5;
    params.delta = 50;
    HandStateCloud two(params);
    const std::vector<CloudPoint> pts{{{0.5, 0.3}, 100}, {{0.65, 0.5}, 50}};
    two.update(pts, 100);
    CHECK(two.travel_score({0.5, 0.5}, 100) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("travel score matches brute force on random clouds") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    CloudParams params;
    for (int rep = 0; rep < 500; ++rep) {
        HandStateCloud cloud(params);
        std::vector<oracle::WeightedPoint> pts;
        std::vector<CloudPoint> contacts;
        const int n = 1 + static_cast<int>(u(rng) * 50);
        for (int i = 0; i < n; ++i) {
            const CloudPoint c{{u(rng), u(rng)}, u(rng) * 900};
            contacts.push_back(c);
            pts.push_back({c.pos.x, c.pos.y, c.tau});
        }
        cloud.update(contacts, 900);
        const double qx = u(rng), qy = u(rng), t = 900 + u(rng) * 200;
        const double want = oracle::travel_score(qx, qy, t, pts, params.rho, params.delta, params.t_max, params.epsilon);
        const double got = cloud.travel_score({qx, qy}, t);
        if (std::isinf(want)) {
            CHECK(got == kEmptyCloudScore);
        } else {
            CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
        }
    }
}

TEST_CASE("cloud update: inclusive horizon and decay") {
    CloudParams params;
    HandStateCloud cloud(params);
    const CloudPoint a{{0.1, 0.1}, 0};
    cloud.update(std::span(&a, 1), 0);
    CHECK(cloud.points().size() == 1);
    cloud.update({}, params.t_max);
    CHECK(cloud.points().size() == 1);
    cloud.update({}, params.t_max + 1);
    CHECK(cloud.empty());

    HandStateCloud c2(params);
    c2.update(std::span(&a, 1), 0);
    CHECK(c2.weight(c2.points()[0], params.delta) == doctest::Approx(params.rho).epsilon(1e-15));
    const CloudPoint late{{0.2, 0.2}, 50};
    CHECK_THROWS_AS(c2.update(std::span(&late, 1), 40), std::invalid_argument);
}

TEST_CASE("representative selection examples") {
    PipelineConfig cfg;
    HandStateCloud cloud(cfg.cloud);
    const std::vector<CloudPoint> rest{{{0.1, 0.375}, 0}, {{0.2, 0.375}, 0}, {{0.3, 0.375}, 0}};
    cloud.update(rest, 0);

    TimeCluster single;
    single.members.push_back(thread_at(4, 10, {0.9, 0.9}));
    CHECK(select_representative(single, cloud, cfg) == 4);

    TimeCluster reach;
    reach.members.push_back(thread_at(0, 10, {0.11, 0.38}));
    reach.members.push_back(thread_at(1, 12, {0.21, 0.37}));
    reach.members.push_back(thread_at(2, 15, {0.35, 0.125}));
    reach.members.push_back(thread_at(3, 20, {0.29, 0.375}));
    CHECK(select_representative(reach, cloud, cfg) == 2);

    TimeCluster tie;
    tie.members.push_back(thread_at(7, 10, {0.1, 0.6}));
    tie.members.push_back(thread_at(8, 20, {0.3, 0.6}));
    CHECK(select_representative(tie, cloud, cfg) == 8);

    CHECK_THROWS(select_representative(TimeCluster{}, cloud, cfg));
}

TEST_CASE("pipeline: clean taps, placement burst, empty input") {
    const KeyLayout& L = qwerty();
    PipelineConfig cfg;
    std::vector<RawTouchEvent> events;
    double t = 0;
    for (char c : std::string("eligible")) {
        tap(events, t, L.center(c));
        t += 250;
    }
    CHECK(run_pipeline(events, L, cfg).letters == "eligible");

    std::vector<RawTouchEvent> placement;
    const std::string home = "asdfghjkl";
    for (std::size_t i = 0; i < 10; ++i) {
        const Point p = i < home.size() ? L.center(home[i]) : Point{0.5, 0.875};
        placement.push_back(ev(TouchKind::Down, static_cast<double>(i), p));
    }
    const PipelineOutput out = run_pipeline(placement, L, cfg);
    CHECK(out.letters.empty());
    CHECK(out.discarded_clusters == 1);

    CHECK(run_pipeline(std::vector<RawTouchEvent>{}, L, cfg).letters.empty());
}

TEST_CASE("pipeline suppresses a resting co-contact against a reach") {
    const KeyLayout& L = qwerty();
    PipelineConfig cfg;
    std::vector<RawTouchEvent> events;
    // Fingers rest on the home row, then 'e' is reached while 'd' is touched.
    for (char c : std::string("asdf")) events.push_back(ev(TouchKind::Down, 0, L.center(c)));
    for (char c : std::string("asdf")) events.push_back(ev(TouchKind::Up, 50, L.center(c)));
    events.push_back(ev(TouchKind::Down, 300, L.center('d')));
    events.push_back(ev(TouchKind::Down, 340, L.center('e')));
    events.push_back(ev(TouchKind::Up, 360, L.center('d')));
    events.push_back(ev(TouchKind::Up, 400, L.center('e')));
    const PipelineOutput out = run_pipeline(events, L, cfg);
    CHECK(out.letters == "e");
    CHECK(out.letters.size() == out.representatives.size());
    CHECK(out.suppressed.size() == 5);
}

TEST_CASE("pipeline is deterministic") {
    const KeyLayout& L = qwerty();
    std::mt19937_64 rng(2);
    std::normal_distribution<double> jitter(0.0, 0.01);
    std::vector<RawTouchEvent> events;
    double t = 0;
    for (char c : std::string("thequickbrownfox")) {
        const Point p = L.center(c);
        tap(events, t, {p.x + jitter(rng), p.y + jitter(rng)});
        t += 180;
    }
    const PipelineOutput a = run_pipeline(events, L, PipelineConfig{});
    const PipelineOutput b = run_pipeline(events, L, PipelineConfig{});
    CHECK(a.letters == b.letters);
    CHECK(a.suppressed == b.suppressed);
    for (std::size_t i = 1; i < a.representatives.size(); ++i) {
        CHECK(a.representatives[i - 1].onset < a.representatives[i].onset);
    }
}

TEST_CASE("touch log lines round-trip") {
    RawTouchEvent e = ev(TouchKind::Move, 12.5, {0.25, 0.75});
    e.word_id = 3;
    e.intent = true;
    e.user = "u7";
    const RawTouchEvent back = parse_touch_event(format_touch_event(e));
    CHECK(back.kind == TouchKind::Move);
    CHECK(back.t == 12.5);
    CHECK(back.pos == e.pos);
    CHECK(back.word_id == 3);
    CHECK(back.intent == std::optional<bool>(true));
    CHECK(back.user == std::optional<std::string>("u7"));
    CHECK_THROWS(parse_touch_event(R"({"session":"s","kind":"hover","t":0,"x":0,"y":0})"));
}

TEST_CASE("association work stays linear in the event count") {
    auto run = [](int words) {
        const KeyLayout& L = qwerty();
        std::vector<RawTouchEvent> events;
        double t = 0;
        for (int i = 0; i < words * 10; ++i) {
            const Point p = L.center(static_cast<char>('a' + i % 26));
            events.push_back(ev(TouchKind::Down, t, p));
            events.push_back(ev(TouchKind::Move, t + 20, p));
            events.push_back(ev(TouchKind::Up, t + 40, p));
            t += 150;
        }
        double best = 1e300;
        for (int rep = 0; rep < 5; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            ThreadTracker tr{PipelineConfig{}};
            for (const RawTouchEvent& e : events) tr.ingest(e);
            const auto t1 = std::chrono::steady_clock::now();
            best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
        }
        return best;
    };
    const double small = run(2000);
    const double large = run(20000);
    const double ratio = large / small;
    MESSAGE("10x events -> " << ratio << "x time");
    // Quadratic work would scale by about 100x.
    CHECK(ratio < 20);
}
