#include "handsdown/noise.hpp"

#include "handsdown/edit_distance.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace handsdown {

using nlohmann::json;

int e_max(int length) {
    if (length <= 6) return 2;
    if (length <= 9) return 3;
    return 4;
}

int length_regime(int length) {
    if (length <= 6) return 0;
    if (length <= 9) return 1;
    return 2;
}

// ---------------------------------------------------------------------------
// Near-key slips

OffsetGmm fit_offset_gmm(const std::array<std::vector<Point>, kLetterCount>& samples, int min_samples,
                         const GmmFitConfig& cfg, OffsetFitReport* report) {
    std::vector<Point> pooled;
    for (const auto& s : samples) pooled.insert(pooled.end(), s.begin(), s.end());
    if (pooled.empty()) throw std::invalid_argument("no landing offsets to fit");

    OffsetFitReport rep;
    rep.total_samples = pooled.size();
    const Mixture2 pooled_fit = fit_mixture(pooled, cfg);
    OffsetGmm gmm;
    for (int c = 0; c < kLetterCount; ++c) {
        const auto& s = samples[static_cast<std::size_t>(c)];
        if (static_cast<int>(s.size()) < min_samples) {
            gmm.letters[static_cast<std::size_t>(c)] = pooled_fit;
            gmm.pooled[static_cast<std::size_t>(c)] = true;
            rep.pooled_letters.push_back(index_letter(c));
        } else {
            gmm.letters[static_cast<std::size_t>(c)] = fit_mixture(s, cfg);
        }
    }
    if (report) *report = rep;
    return gmm;
}

OffsetGmm isotropic_offsets(double sigma) {
    OffsetGmm gmm;
    const double var = sigma * sigma;
    for (auto& m : gmm.letters) {
        m.components = {Gaussian2{0.5, {0.0, 0.0}, var, 0.0, var}, Gaussian2{0.5, {0.0, 0.0}, var, 0.0, var}};
    }
    return gmm;
}

namespace {

char sample_letter(const SoftKeyDistribution& q, Rng& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double u = uni(rng);
    for (int c = 0; c < kLetterCount; ++c) {
        if (u < q.letter[static_cast<std::size_t>(c)]) return index_letter(c);
        u -= q.letter[static_cast<std::size_t>(c)];
    }
    return q.argmax();
}

Point clamp_unit(Point p) { return {std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)}; }

}  // namespace

NearOutcome near_slip_from_offset(char a, Point delta, const KeyLayout& layout, double alpha, NearMode mode,
                                  Rng& rng) {
    const Point center = layout.center(a);
    const Point landed{center.x + delta.x, center.y + delta.y};
    const SoftKeyDistribution q = layout.soft_key_distribution(landed, alpha);
    NearOutcome out;
    out.touch = landed;
    if (q.no_key) {
        out.kind = NearOutcome::Kind::Delete;
        return out;
    }
    if (mode == NearMode::Argmax) {
        const char best = q.argmax();
        if (best != a) {
            out.kind = NearOutcome::Kind::Substitute;
            out.letter = best;
        }
        return out;
    }
    out.kind = NearOutcome::Kind::ExtraTap;
    out.letter = sample_letter(q, rng);
    return out;
}

NearOutcome sample_near_slip(char a, const OffsetGmm& gmm, const KeyLayout& layout, double alpha, NearMode mode,
                             Rng& rng) {
    const Point delta = gmm[a].sample(rng);
    return near_slip_from_offset(a, delta, layout, alpha, mode, rng);
}

// ---------------------------------------------------------------------------
// Co-activation

namespace {
std::size_t coact_slot(char a, int bucket, char c) {
    return (static_cast<std::size_t>(letter_index(a)) * kBucketCount + static_cast<std::size_t>(bucket)) *
               kLetterCount +
           static_cast<std::size_t>(letter_index(c));
}
}  // namespace

double& CoActTable::count(char a, int bucket, char c) { return counts[coact_slot(a, bucket, c)]; }
double CoActTable::count(char a, int bucket, char c) const { return counts[coact_slot(a, bucket, c)]; }

double CoActTable::probability(char c, char a, int bucket) const {
    double total = 0.0;
    for (int x = 0; x < kLetterCount; ++x) total += count(a, bucket, index_letter(x));
    return (count(a, bucket, c) + smoothing) / (total + smoothing * kLetterCount);
}

char CoActTable::sample(char a, int bucket, Rng& rng) const {
    double total = 0.0;
    for (int x = 0; x < kLetterCount; ++x) total += count(a, bucket, index_letter(x)) + smoothing;
    std::uniform_real_distribution<double> uni(0.0, total);
    double u = uni(rng);
    for (int x = 0; x < kLetterCount; ++x) {
        const double w = count(a, bucket, index_letter(x)) + smoothing;
        if (u < w) return index_letter(x);
        u -= w;
    }
    return 'z';
}

double CoActTable::swap_propensity(char x, char y, const KeyLayout& layout) const {
    const KeyGeom& kx = layout.letter(x);
    const KeyGeom& ky = layout.letter(y);
    const int dist = std::abs(kx.row - ky.row) + (kx.hand != ky.hand ? 1 : 0);
    return swap_base * std::pow(swap_decay, dist);
}

CoActTable fit_coact_table(std::span<const AnnotatedCluster> clusters, double smoothing, double swap_decay) {
    if (!(smoothing > 0)) throw std::invalid_argument("co-activation smoothing must be positive");
    CoActTable table;
    table.smoothing = smoothing;
    table.swap_decay = swap_decay;
    for (const AnnotatedCluster& cl : clusters) {
        for (char c : cl.cofired) table.count(cl.intended, cl.posture.id(), c) += 1.0;
    }
    return table;
}

CoActTable default_coact_table(const KeyLayout& layout) {
    CoActTable table;
    const double pitch = layout.key_pitch();
    for (int a = 0; a < kLetterCount; ++a) {
        for (int c = 0; c < kLetterCount; ++c) {
            if (a == c) continue;
            const double d = distance(layout.center(index_letter(a)), layout.center(index_letter(c)));
            const double w = 10.0 * std::exp(-d / pitch);
            for (int b = 0; b < kBucketCount; ++b) table.count(index_letter(a), b, index_letter(c)) = w;
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Propensities

std::array<double, 4> PropensityModel::features(std::string_view word, std::size_t i, const KeyLayout& layout) {
    const KeyGeom& k = layout.letter(word[i]);
    std::array<double, 4> f{};
    f[0] = std::abs(k.row - 1);
    f[2] = (k.finger == 0 || k.finger == 1 || k.finger == 8 || k.finger == 9) ? 1.0 : 0.0;
    if (i > 0) {
        const KeyGeom& prev = layout.letter(word[i - 1]);
        f[1] = prev.hand != k.hand ? 1.0 : 0.0;
        f[3] = distance(prev.center, k.center) / layout.key_pitch();
    }
    return f;
}

std::vector<double> PropensityModel::propensities(std::string_view word, const KeyLayout& layout) const {
    std::vector<double> p(word.size());
    double total = 0.0;
    for (std::size_t i = 0; i < word.size(); ++i) {
        const auto f = features(word, i, layout);
        double s = 0.0;
        for (std::size_t j = 0; j < f.size(); ++j) s += weights[j] * f[j];
        p[i] = std::exp(s);
        total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
}

PropensityModel fit_propensity(std::span<const std::pair<std::string, std::string>> pairs, const KeyLayout& layout,
                               PropensityModel init) {
    struct Sample {
        std::vector<std::array<double, 4>> feats;
        std::vector<int> edited;
    };
    std::vector<Sample> samples;
    for (const auto& [gold, noisy] : pairs) {
        if (!is_lowercase_word(gold)) continue;
        Sample s;
        for (std::size_t i = 0; i < gold.size(); ++i) s.feats.push_back(PropensityModel::features(gold, i, layout));
        for (const EditStep& st : align(gold, noisy)) {
            if (st.kind == EditKind::Match) continue;
            s.edited.push_back(std::clamp(st.gold_pos, 0, static_cast<int>(gold.size()) - 1));
        }
        if (!s.edited.empty()) samples.push_back(std::move(s));
    }
    if (samples.empty()) return init;

    PropensityModel model = init;
    constexpr double kRate = 0.05;
    constexpr double kRidge = 0.01;
    for (int iter = 0; iter < 300; ++iter) {
        std::array<double, 4> grad{};
        std::size_t draws = 0;
        for (const Sample& s : samples) {
            std::vector<double> p(s.feats.size());
            double total = 0.0;
            for (std::size_t i = 0; i < s.feats.size(); ++i) {
                double v = 0.0;
                for (std::size_t j = 0; j < 4; ++j) v += model.weights[j] * s.feats[i][j];
                p[i] = std::exp(v);
                total += p[i];
            }
            std::array<double, 4> expect{};
            for (std::size_t i = 0; i < p.size(); ++i) {
                p[i] /= total;
                for (std::size_t j = 0; j < 4; ++j) expect[j] += p[i] * s.feats[i][j];
            }
            for (int pos : s.edited) {
                for (std::size_t j = 0; j < 4; ++j) grad[j] += s.feats[static_cast<std::size_t>(pos)][j] - expect[j];
                ++draws;
            }
        }
        for (std::size_t j = 0; j < 4; ++j) {
            model.weights[j] += kRate * (grad[j] / static_cast<double>(draws) - kRidge * model.weights[j]);
        }
    }
    return model;
}

// ---------------------------------------------------------------------------
// Snapshot

NoiseModel NoiseModel::defaults(const KeyLayout& layout) {
    NoiseModel m;
    m.offsets = isotropic_offsets(0.35 * layout.key_pitch());
    m.coact = default_coact_table(layout);
    return m;
}

namespace {

json rates_json(const OpRates& r) {
    return json{{"substitute", r.substitute}, {"insert", r.insert}, {"delete", r.remove}, {"swap", r.swap}};
}

OpRates rates_from(const json& j) {
    return OpRates{j.at("substitute").get<double>(), j.at("insert").get<double>(), j.at("delete").get<double>(),
                   j.at("swap").get<double>()};
}

}  // namespace

std::string NoiseModel::to_json() const {
    json letters = json::object();
    for (int c = 0; c < kLetterCount; ++c) {
        json comps = json::array();
        for (const Gaussian2& g : offsets.letters[static_cast<std::size_t>(c)].components) {
            comps.push_back(json{{"weight", g.weight},
                                 {"mean", {g.mean.x, g.mean.y}},
                                 {"cov", {g.sxx, g.sxy, g.syy}}});
        }
        letters[std::string(1, index_letter(c))] =
            json{{"components", std::move(comps)}, {"pooled", static_cast<bool>(offsets.pooled[static_cast<std::size_t>(c)])}};
    }
    json doc{{"format", "handsdown-noise-model"},
             {"version", format_version},
             {"offsets", std::move(letters)},
             {"coact", {{"counts", coact.counts},
                        {"smoothing", coact.smoothing},
                        {"swap_base", coact.swap_base},
                        {"swap_decay", coact.swap_decay}}},
             {"propensity_weights", propensity.weights},
             {"channel_near_logit", channel_near_logit},
             {"near_ops", rates_json(near_ops)},
             {"coact_ops", rates_json(coact_ops)}};
    return doc.dump(1) + "\n";
}

NoiseModel NoiseModel::from_json(std::string_view text) {
    try {
        const json doc = json::parse(text);
        if (doc.at("format").get<std::string>() != "handsdown-noise-model") {
            throw std::runtime_error("not a noise model snapshot");
        }
        NoiseModel m;
        m.format_version = doc.at("version").get<int>();
        if (m.format_version != 1) throw std::runtime_error("unsupported noise model version");
        for (int c = 0; c < kLetterCount; ++c) {
            const json& l = doc.at("offsets").at(std::string(1, index_letter(c)));
            Mixture2 mix;
            for (const json& g : l.at("components")) {
                Gaussian2 comp{g.at("weight").get<double>(),
                               {g.at("mean")[0].get<double>(), g.at("mean")[1].get<double>()},
                               g.at("cov")[0].get<double>(),
                               g.at("cov")[1].get<double>(),
                               g.at("cov")[2].get<double>()};
                if (!comp.positive_definite()) throw std::runtime_error("offset covariance is not positive definite");
                mix.components.push_back(comp);
            }
            m.offsets.letters[static_cast<std::size_t>(c)] = std::move(mix);
            m.offsets.pooled[static_cast<std::size_t>(c)] = l.at("pooled").get<bool>();
        }
        const json& co = doc.at("coact");
        m.coact.counts = co.at("counts").get<std::vector<double>>();
        if (m.coact.counts.size() != static_cast<std::size_t>(kLetterCount * kBucketCount * kLetterCount)) {
            throw std::runtime_error("co-activation table has the wrong size");
        }
        m.coact.smoothing = co.at("smoothing").get<double>();
        m.coact.swap_base = co.at("swap_base").get<double>();
        m.coact.swap_decay = co.at("swap_decay").get<double>();
        const auto w = doc.at("propensity_weights").get<std::vector<double>>();
        if (w.size() != 4) throw std::runtime_error("expected four propensity weights");
        std::copy(w.begin(), w.end(), m.propensity.weights.begin());
        m.channel_near_logit = doc.at("channel_near_logit").get<double>();
        m.near_ops = rates_from(doc.at("near_ops"));
        m.coact_ops = rates_from(doc.at("coact_ops"));
        return m;
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("noise model snapshot: ") + e.what());
    }
}

void NoiseModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_json();
}

NoiseModel NoiseModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

// ---------------------------------------------------------------------------
// Fitting from logs

NoiseModel fit_noise_model(std::span<const RawTouchEvent> events, const std::map<std::string, std::string>& gold,
                           const KeyLayout& layout, const PipelineConfig& cfg, NoiseFitReport* report) {
    NoiseFitReport rep;
    NoiseModel model = NoiseModel::defaults(layout);

    std::array<std::vector<Point>, kLetterCount> offsets;
    std::vector<AnnotatedCluster> annotated;
    std::vector<std::pair<std::string, std::string>> human_pairs;

    // Group into (session, word) runs in log order.
    std::size_t i = 0;
    std::map<std::string, ThreadTracker> trackers;
    std::map<std::string, HandStateCloud> clouds;
    while (i < events.size()) {
        const std::string& session = events[i].session;
        const int word = events[i].word_id;
        auto& tracker = trackers.try_emplace(session, cfg).first->second;
        auto& cloud = clouds.try_emplace(session, cfg.cloud).first->second;
        const std::size_t first_thread = tracker.threads().size();
        for (; i < events.size() && events[i].session == session && events[i].word_id == word; ++i) {
            tracker.ingest(events[i]);
        }
        const std::vector<TouchThread> threads(tracker.threads().begin() + static_cast<std::ptrdiff_t>(first_thread),
                                               tracker.threads().end());
        const Clustering clustering = cluster_threads(threads, cfg);
        rep.clusters += clustering.clusters.size();

        const auto g = gold.find(session + "/" + std::to_string(word));
        std::vector<const TimeCluster*> intended_clusters;
        for (const TimeCluster& c : clustering.clusters) {
            const auto n = std::count_if(c.members.begin(), c.members.end(),
                                         [](const TouchThread& t) { return t.intent.value_or(false); });
            if (n == 1) intended_clusters.push_back(&c);
        }
        const bool use_gold = g != gold.end() && g->second.size() == intended_clusters.size();

        char prev = '\0';
        for (std::size_t k = 0; k < intended_clusters.size(); ++k) {
            const TimeCluster& c = *intended_clusters[k];
            const auto it = std::find_if(c.members.begin(), c.members.end(),
                                         [](const TouchThread& t) { return t.intent.value_or(false); });
            const char a = use_gold ? g->second[k] : layout.nearest_key(it->x_start);
            if (!is_letter(a)) continue;
            const Point center = layout.center(a);
            offsets[static_cast<std::size_t>(letter_index(a))].push_back({it->x_start.x - center.x, it->x_start.y - center.y});
            AnnotatedCluster ac{a, layout.geometry_bucket(prev ? prev : a), {}};
            for (const TouchThread& m : c.members) {
                if (&m != &*it) ac.cofired.push_back(layout.nearest_key(m.x_start));
            }
            annotated.push_back(std::move(ac));
            prev = a;
        }
        rep.annotated_clusters += intended_clusters.size();

        PipelineOutput out = resolve_word(threads, cloud, layout, cfg);
        if (g != gold.end() && is_lowercase_word(g->second) && !out.letters.empty()) {
            human_pairs.emplace_back(g->second, out.letters);
        }
    }

    std::size_t offset_total = 0;
    for (const auto& o : offsets) offset_total += o.size();
    if (offset_total > 0) model.offsets = fit_offset_gmm(offsets, 10, {}, &rep.offsets);
    if (!annotated.empty()) model.coact = fit_coact_table(annotated, model.coact.smoothing, model.coact.swap_decay);
    if (!human_pairs.empty()) model.propensity = fit_propensity(human_pairs, layout, model.propensity);
    rep.human_pairs = human_pairs.size();
    if (report) *report = rep;
    return model;
}

// ---------------------------------------------------------------------------
// Synthesis

void SynthConfig::validate() const {
    if (!(alpha_kernel > 0)) throw std::invalid_argument("alpha_kernel must be positive");
    if (!(geometric_p > 0 && geometric_p < 1)) throw std::invalid_argument("geometric prior p must lie in (0,1)");
    if (!(balance_tolerance > 0 && balance_tolerance < 0.2)) {
        throw std::invalid_argument("balance tolerance must lie in (0, 0.2)");
    }
    if (attempts_per_pair < 1) throw std::invalid_argument("attempts_per_pair must be positive");
}

namespace {

std::string_view op_name(OpType op) {
    switch (op) {
        case OpType::Substitute: return "sub";
        case OpType::Insert: return "ins";
        case OpType::Delete: return "del";
        case OpType::Swap: return "swap";
    }
    return "?";
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

struct Tok {
    char c;
    Point p;
};

struct Slot {
    std::optional<Tok> main;
    std::vector<Tok> before;
    std::vector<Tok> after;
};

struct PlannedOp {
    int position;
    Channel channel;
    OpType op;
};

// Contact near center(c) whose nearest key is still c.
Point touch_for(char c, const NoiseModel& model, const KeyLayout& layout, Rng& rng) {
    const Point center = layout.center(c);
    for (int k = 0; k < 20; ++k) {
        const Point d = model.offsets[c].sample(rng);
        const Point p{center.x + d.x, center.y + d.y};
        if (in_unit_square(p) && layout.nearest_key(p) == c) return p;
    }
    return center;
}

int draw_edit_count(int cap, double p, Rng& rng) {
    std::vector<double> w(static_cast<std::size_t>(cap) + 1);
    for (int n = 0; n <= cap; ++n) w[static_cast<std::size_t>(n)] = p * std::pow(1.0 - p, n);
    std::discrete_distribution<int> dist(w.begin(), w.end());
    return dist(rng);
}

OpType draw_op(const OpRates& rates, double swap_scale, Rng& rng) {
    const double w[] = {rates.substitute, rates.insert, rates.remove, rates.swap * swap_scale};
    std::discrete_distribution<int> dist(std::begin(w), std::end(w));
    return static_cast<OpType>(dist(rng));
}

}  // namespace

Rng stream_rng(std::uint64_t seed, std::uint64_t index) {
    return Rng(splitmix64(splitmix64(seed) ^ (index * 0xD1B54A32D192ED03ull)));
}

std::string NoisePair::annotation_string() const {
    if (annotations.empty()) return "-";
    std::string s;
    for (const EditAnnotation& a : annotations) {
        if (!s.empty()) s += ',';
        s += a.channel == Channel::Near ? "N:" : "C:";
        s += op_name(a.op);
        s += '@';
        s += std::to_string(a.position);
        if (a.letter) {
            s += ':';
            s += a.letter;
        }
    }
    return s;
}

std::optional<NoisePair> synthesize_pair(std::string_view gold, const NoiseModel& model, const KeyLayout& layout,
                                         const SynthConfig& cfg, Rng& rng, std::optional<int> forced_edits) {
    if (!is_lowercase_word(gold)) throw std::invalid_argument("gold word must be lowercase a-z");
    const int length = static_cast<int>(gold.size());
    const int cap = e_max(length);
    if (forced_edits && (*forced_edits < 0 || *forced_edits > cap)) {
        throw std::invalid_argument("forced edit count outside 0..E_max");
    }
    const std::vector<double> propensity = model.propensity.propensities(gold, layout);
    const double p_near = 1.0 / (1.0 + std::exp(-model.channel_near_logit));
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    for (int attempt = 0; attempt < cfg.attempts_per_pair; ++attempt) {
        const int count = forced_edits ? *forced_edits : draw_edit_count(cap, cfg.geometric_p, rng);

        // Step 2a: positions by propensity, distinct while possible.
        std::vector<int> positions;
        std::vector<double> w = propensity;
        for (int n = 0; n < count; ++n) {
            if (std::all_of(w.begin(), w.end(), [](double v) { return v <= 0; })) w = propensity;
            std::discrete_distribution<int> dist(w.begin(), w.end());
            const int pos = dist(rng);
            positions.push_back(pos);
            w[static_cast<std::size_t>(pos)] = 0.0;
        }
        std::sort(positions.begin(), positions.end());

        // Step 2b: channel and operation per position.
        std::vector<PlannedOp> plan;
        for (int pos : positions) {
            const Channel ch = uni(rng) < p_near ? Channel::Near : Channel::CoAct;
            double swap_scale = 0.0;
            if (pos + 1 < length) {
                swap_scale = model.coact.swap_propensity(gold[static_cast<std::size_t>(pos)],
                                                         gold[static_cast<std::size_t>(pos) + 1], layout);
            }
            const OpRates& rates = ch == Channel::Near ? model.near_ops : model.coact_ops;
            plan.push_back({pos, ch, draw_op(rates, swap_scale, rng)});
        }

        std::vector<Slot> slots(gold.size());
        for (std::size_t i = 0; i < gold.size(); ++i) {
            slots[i].main = Tok{gold[i], cfg.with_touches ? touch_for(gold[i], model, layout, rng) : Point{}};
        }

        std::vector<EditAnnotation> notes;
        // Step 3: swaps, then deletions, then insertions/substitutions left to right.
        for (const PlannedOp& op : plan) {
            if (op.op != OpType::Swap) continue;
            std::swap(slots[static_cast<std::size_t>(op.position)].main,
                      slots[static_cast<std::size_t>(op.position) + 1].main);
            notes.push_back({op.channel, op.op, op.position, '\0'});
        }
        for (const PlannedOp& op : plan) {
            if (op.op != OpType::Delete) continue;
            slots[static_cast<std::size_t>(op.position)].main.reset();
            notes.push_back({op.channel, op.op, op.position, '\0'});
        }
        for (const PlannedOp& op : plan) {
            if (op.op != OpType::Substitute && op.op != OpType::Insert) continue;
            const char aimed = gold[static_cast<std::size_t>(op.position)];
            const int posture = layout.geometry_bucket(op.position > 0 ? gold[static_cast<std::size_t>(op.position) - 1] : aimed).id();
            Slot& slot = slots[static_cast<std::size_t>(op.position)];
            std::optional<Tok> produced;
            if (op.channel == Channel::Near) {
                const NearMode mode = op.op == OpType::Substitute ? NearMode::Argmax : NearMode::Sample;
                const NearOutcome::Kind want =
                    op.op == OpType::Substitute ? NearOutcome::Kind::Substitute : NearOutcome::Kind::ExtraTap;
                for (int k = 0; k < cfg.attempts_per_pair && !produced; ++k) {
                    const NearOutcome o = sample_near_slip(aimed, model.offsets, layout, cfg.alpha_kernel, mode, rng);
                    if (o.kind != want) continue;
                    Point p = o.touch;
                    if (op.op == OpType::Insert || !in_unit_square(p)) {
                        p = cfg.with_touches ? touch_for(o.letter, model, layout, rng) : Point{};
                    }
                    produced = Tok{o.letter, p};
                }
            } else {
                for (int k = 0; k < cfg.attempts_per_pair && !produced; ++k) {
                    const char c = model.coact.sample(aimed, posture, rng);
                    if (op.op == OpType::Substitute && c == aimed) continue;
                    produced = Tok{c, cfg.with_touches ? touch_for(c, model, layout, rng) : Point{}};
                }
            }
            if (!produced) continue;
            if (op.op == OpType::Substitute) {
                if (!slot.main) continue;
                slot.main = produced;
            } else if (cfg.insert_after) {
                slot.after.push_back(*produced);
            } else {
                slot.before.push_back(*produced);
            }
            notes.push_back({op.channel, op.op, op.position, produced->c});
        }

        NoisePair pair;
        pair.gold = std::string(gold);
        for (const Slot& s : slots) {
            auto emit = [&](const Tok& t) {
                pair.noisy.push_back(t.c);
                if (cfg.with_touches) pair.touches.push_back(clamp_unit(t.p));
            };
            for (const Tok& t : s.before) emit(t);
            if (s.main) emit(*s.main);
            for (const Tok& t : s.after) emit(t);
        }
        if (pair.noisy.empty()) continue;
        pair.realized_ed = levenshtein(pair.noisy, pair.gold);
        if (pair.realized_ed > cap) continue;
        std::sort(notes.begin(), notes.end(),
                  [](const EditAnnotation& a, const EditAnnotation& b) { return a.position < b.position; });
        pair.annotations = std::move(notes);
        return pair;
    }
    return std::nullopt;
}

double RegimeBalance::max_deviation() const {
    std::size_t total = 0;
    for (std::size_t b : bins) total += b;
    if (total == 0) return 0.0;
    const double uniform = 1.0 / static_cast<double>(bins.size());
    double worst = 0.0;
    for (std::size_t b : bins) {
        worst = std::max(worst, std::abs(static_cast<double>(b) / static_cast<double>(total) - uniform));
    }
    return worst;
}

Corpus balance_corpus(const Lexicon& lexicon, std::size_t target_size, const NoiseModel& model,
                      const KeyLayout& layout, const SynthConfig& cfg) {
    cfg.validate();
    std::array<std::vector<int>, kRegimeCount> words;
    for (std::size_t i = 0; i < lexicon.size(); ++i) {
        words[static_cast<std::size_t>(length_regime(static_cast<int>(lexicon[i].size())))].push_back(static_cast<int>(i));
    }

    // Regime share proportional to the number of lexicon words it holds.
    std::array<std::size_t, kRegimeCount> targets{};
    std::size_t assigned = 0;
    int last_nonempty = -1;
    for (int r = 0; r < kRegimeCount; ++r) {
        if (!words[static_cast<std::size_t>(r)].empty()) last_nonempty = r;
    }
    if (last_nonempty < 0) throw std::invalid_argument("empty lexicon");
    for (int r = 0; r < kRegimeCount; ++r) {
        const auto n = words[static_cast<std::size_t>(r)].size();
        if (n == 0) continue;
        targets[static_cast<std::size_t>(r)] =
            r == last_nonempty ? target_size - assigned
                               : static_cast<std::size_t>(std::llround(static_cast<double>(target_size) * static_cast<double>(n) /
                                                                       static_cast<double>(lexicon.size())));
        assigned += targets[static_cast<std::size_t>(r)];
        if (targets[static_cast<std::size_t>(r)] < 100) {
            throw std::invalid_argument("corpus target gives fewer than 100 pairs to a length regime");
        }
    }

    Corpus corpus;
    std::uint64_t draw = 0;
    for (int r = 0; r < kRegimeCount; ++r) {
        RegimeBalance& rb = corpus.report.regimes[static_cast<std::size_t>(r)];
        const int cap = r == 0 ? 2 : (r == 1 ? 3 : 4);
        rb.e_max = cap;
        rb.target = targets[static_cast<std::size_t>(r)];
        rb.bins.assign(static_cast<std::size_t>(cap) + 1, 0);
        if (rb.target == 0) continue;
        std::vector<std::size_t> quota(static_cast<std::size_t>(cap) + 1, rb.target / (static_cast<std::size_t>(cap) + 1));
        for (std::size_t e = 0; e < rb.target % quota.size(); ++e) ++quota[e];

        const auto& pool = words[static_cast<std::size_t>(r)];
        std::size_t remaining = rb.target;
        while (remaining > 0) {
            if (corpus.report.rejected >= cfg.balance_budget) {
                corpus.report.complete = false;
                break;
            }
            // Aim at the emptiest bin.
            const auto bin = static_cast<int>(std::max_element(quota.begin(), quota.end()) - quota.begin());
            Rng rng = stream_rng(cfg.seed, draw++);
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            const std::string& gold = lexicon[static_cast<std::size_t>(pool[pick(rng)])];
            ++corpus.report.attempts;
            const int forced = std::min(bin, e_max(static_cast<int>(gold.size())));
            std::optional<NoisePair> pair = synthesize_pair(gold, model, layout, cfg, rng, forced);
            if (!pair) {
                ++corpus.report.synthesis_failures;
                ++corpus.report.rejected;
                continue;
            }
            auto& q = quota[static_cast<std::size_t>(pair->realized_ed)];
            if (q == 0) {
                ++corpus.report.rejected;
                continue;
            }
            --q;
            --remaining;
            ++rb.bins[static_cast<std::size_t>(pair->realized_ed)];
            corpus.pairs.push_back(std::move(*pair));
        }
    }

    Rng shuffle = stream_rng(cfg.seed, ~std::uint64_t{0});
    std::shuffle(corpus.pairs.begin(), corpus.pairs.end(), shuffle);
    return corpus;
}

// ---------------------------------------------------------------------------
// TSV

namespace {

void append_double(std::string& s, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    s.append(buf, res.ptr);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw std::runtime_error("corpus TSV: bad number '" + std::string(s) + "'");
    }
    return v;
}

std::vector<EditAnnotation> parse_annotations(std::string_view s) {
    std::vector<EditAnnotation> out;
    if (s == "-" || s.empty()) return out;
    for (std::string_view item : split(s, ',')) {
        // C:op@pos[:letter]
        if (item.size() < 6 || item[1] != ':') throw std::runtime_error("corpus TSV: bad annotation");
        EditAnnotation a;
        a.channel = item[0] == 'N' ? Channel::Near : Channel::CoAct;
        const std::size_t at = item.find('@');
        const std::string_view op = item.substr(2, at - 2);
        if (op == "sub") a.op = OpType::Substitute;
        else if (op == "ins") a.op = OpType::Insert;
        else if (op == "del") a.op = OpType::Delete;
        else if (op == "swap") a.op = OpType::Swap;
        else throw std::runtime_error("corpus TSV: unknown op");
        std::string_view rest = item.substr(at + 1);
        const std::size_t colon = rest.find(':');
        a.position = std::stoi(std::string(rest.substr(0, colon)));
        if (colon != std::string_view::npos) a.letter = rest[colon + 1];
        out.push_back(a);
    }
    return out;
}

}  // namespace

void write_corpus_tsv(std::ostream& out, std::span<const NoisePair> pairs, bool with_touches) {
    std::string line;
    for (const NoisePair& p : pairs) {
        line.clear();
        line += p.noisy;
        line += '\t';
        line += p.gold;
        line += '\t';
        line += std::to_string(p.realized_ed);
        line += '\t';
        line += p.annotation_string();
        if (with_touches) {
            line += '\t';
            for (std::size_t i = 0; i < p.touches.size(); ++i) {
                if (i) line += ';';
                append_double(line, p.touches[i].x);
                line += ',';
                append_double(line, p.touches[i].y);
            }
        }
        line += '\n';
        out << line;
    }
}

std::vector<NoisePair> read_corpus_tsv(std::istream& in) {
    std::vector<NoisePair> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cols = split(line, '\t');
        if (cols.size() < 2) throw std::runtime_error("corpus TSV line " + std::to_string(lineno) + ": too few columns");
        NoisePair p;
        p.noisy = std::string(cols[0]);
        p.gold = std::string(cols[1]);
        p.realized_ed = cols.size() > 2 ? std::stoi(std::string(cols[2])) : levenshtein(p.noisy, p.gold);
        if (cols.size() > 3) p.annotations = parse_annotations(cols[3]);
        if (cols.size() > 4 && !cols[4].empty()) {
            for (std::string_view pt : split(cols[4], ';')) {
                const auto xy = split(pt, ',');
                if (xy.size() != 2) throw std::runtime_error("corpus TSV: bad touch '" + std::string(pt) + "'");
                p.touches.push_back({parse_double(xy[0]), parse_double(xy[1])});
            }
            if (p.touches.size() != p.noisy.size()) {
                throw std::runtime_error("corpus TSV line " + std::to_string(lineno) + ": one touch per letter required");
            }
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace handsdown
