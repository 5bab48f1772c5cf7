#include "handsdown/decoders.hpp"

#include "handsdown/edit_distance.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <numbers>

namespace handsdown {

std::vector<std::string> DecodeResult::words() const {
    std::vector<std::string> out;
    out.reserve(ranked.size());
    for (const Candidate& c : ranked) out.push_back(c.word);
    return out;
}

// ---------------------------------------------------------------------------
// Candidate generation

CandidateIndex::CandidateIndex(const Lexicon& lexicon) : lexicon_(&lexicon) {
    groups_.resize(static_cast<std::size_t>(std::max(lexicon.max_length(), 0)) + 1);
    for (std::size_t i = 0; i < lexicon.size(); ++i) {
        Group& g = groups_[lexicon[i].size()];
        g.texts += lexicon[i];
        g.words.push_back(static_cast<int>(i));
    }
}

std::vector<CandidateIndex::Hit> CandidateIndex::search(std::string_view u, int max_ed) const {
    return search(u, max_ed, simd::kernels());
}

std::vector<CandidateIndex::Hit> CandidateIndex::search(std::string_view u, int max_ed,
                                                        const simd::KernelTable& kernels) const {
    std::vector<Hit> hits;
    if (max_ed < 0) return hits;
    const int m = static_cast<int>(u.size());
    const int lo = std::max(1, m - max_ed);
    const int hi = std::min(static_cast<int>(groups_.size()) - 1, m + max_ed);
    const bool bit_parallel = m <= simd::kMaxPattern && is_lowercase_word(u);
    simd::PatternMasks pattern;
    if (bit_parallel) pattern = simd::build_pattern(u);
    std::vector<std::int32_t> dist;
    for (int len = lo; len <= hi; ++len) {
        const Group& g = groups_[static_cast<std::size_t>(len)];
        if (g.words.empty()) continue;
        if (bit_parallel) {
            dist.resize(g.words.size());
            kernels.batch_edit_distance(pattern.peq, pattern.length, g.texts.data(), g.words.size(), len, dist.data());
            for (std::size_t i = 0; i < g.words.size(); ++i) {
                if (dist[i] <= max_ed) hits.push_back({g.words[i], dist[i]});
            }
        } else {
            for (std::size_t i = 0; i < g.words.size(); ++i) {
                const std::string_view w(g.texts.data() + i * static_cast<std::size_t>(len), static_cast<std::size_t>(len));
                if (const auto d = bounded_levenshtein(u, w, max_ed)) hits.push_back({g.words[i], *d});
            }
        }
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.word < b.word; });
    return hits;
}

std::vector<std::string> candidate_set(std::string_view u, const Lexicon& lexicon, int max_ed) {
    const CandidateIndex index(lexicon);
    std::vector<std::string> out;
    for (const auto& hit : index.search(u, max_ed)) out.push_back(lexicon[static_cast<std::size_t>(hit.word)]);
    return out;
}

// ---------------------------------------------------------------------------
// Ranking helpers

void sort_candidates(std::vector<Candidate>& cands) {
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.word < b.word;
    });
}

DecodeResult finish_ranking(std::vector<Candidate> scored, std::string_view literal, int k, std::string_view source) {
    if (k < 1) throw std::invalid_argument("k must be positive");
    DecodeResult res;
    res.k = k;
    res.backend = std::string(source);
    if (scored.size() > static_cast<std::size_t>(k)) scored.resize(static_cast<std::size_t>(k));
    res.ranked = std::move(scored);
    const auto it = std::find_if(res.ranked.begin(), res.ranked.end(),
                                 [&](const Candidate& c) { return c.word == literal; });
    if (it != res.ranked.end()) {
        it->literal = true;
    } else if (!literal.empty()) {
        const double tail = res.ranked.empty() ? 0.0 : res.ranked.back().score;
        res.ranked.push_back(Candidate{std::string(literal), tail, std::string(source), true});
    }
    return res;
}

namespace {

std::vector<double> lexicon_logprobs(const Lexicon& lexicon, const CharNgramLM& lm) {
    std::vector<double> lp(lexicon.size());
    for (std::size_t i = 0; i < lexicon.size(); ++i) lp[i] = lm.logprob(lexicon[i]);
    return lp;
}

}  // namespace

// ---------------------------------------------------------------------------
// n-gram decoder

NgramDecoder::NgramDecoder(const Lexicon& lexicon, const CharNgramLM& lm, NgramDecoderConfig cfg)
    : lexicon_(&lexicon), index_(lexicon), logprob_(lexicon_logprobs(lexicon, lm)), cfg_(cfg) {
    if (cfg_.max_ed < 0) throw std::invalid_argument("max_ed must be non-negative");
    set_alpha(cfg_.alpha);
}

void NgramDecoder::set_alpha(double alpha) {
    if (!(alpha >= 0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite and non-negative");
    cfg_.alpha = alpha;
}

double NgramDecoder::logprob_range() const {
    if (logprob_.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(logprob_.begin(), logprob_.end());
    return *hi - *lo;
}

std::vector<Candidate> NgramDecoder::rank_all(std::string_view u) const {
    std::vector<Candidate> cands;
    for (const auto& hit : index_.search(u, cfg_.max_ed)) {
        cands.push_back(Candidate{(*lexicon_)[static_cast<std::size_t>(hit.word)],
                                  logprob_[static_cast<std::size_t>(hit.word)] - cfg_.alpha * hit.distance, "ngram",
                                  false});
    }
    sort_candidates(cands);
    return cands;
}

DecodeResult NgramDecoder::decode(const DecodeInput& input, int k) const {
    if (input.letters.empty()) throw std::invalid_argument("empty letter sequence");
    return finish_ranking(rank_all(input.letters), input.letters, k, id());
}

// ---------------------------------------------------------------------------
// Spatial model

SpatialModel SpatialModel::isotropic(const KeyLayout& layout, double fraction) {
    if (!(fraction > 0)) throw std::invalid_argument("sigma fraction must be positive");
    SpatialModel m;
    const double sigma = fraction * layout.key_pitch();
    for (int c = 0; c < kLetterCount; ++c) {
        m.keys[static_cast<std::size_t>(c)] = Key{layout.center(index_letter(c)), sigma * sigma, 0.0, sigma * sigma};
    }
    return m;
}

void SpatialModel::validate() const {
    if (!(gamma < 0)) throw std::invalid_argument("gap penalty must be negative");
    for (const Key& k : keys) {
        if (!(k.sxx > 0 && k.sxx * k.syy - k.sxy * k.sxy > 0)) {
            throw std::invalid_argument("spatial covariance must be positive definite");
        }
    }
}

double SpatialModel::log_density(Point s, char c) const {
    const Key& k = keys[static_cast<std::size_t>(letter_index(c))];
    const double det = k.sxx * k.syy - k.sxy * k.sxy;
    const double dx = s.x - k.mean.x;
    const double dy = s.y - k.mean.y;
    const double q = (k.syy * dx * dx - 2.0 * k.sxy * dx * dy + k.sxx * dy * dy) / det;
    return -0.5 * q - std::log(2.0 * std::numbers::pi * std::sqrt(det));
}

void SpatialModel::log_densities(Point s, double* out, const simd::KernelTable& kernels) const {
    // Inverse covariances and normalizers laid out for the quadratic-form kernel.
    std::array<double, kLetterCount> mx, my, a, b, c, norm;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const Key& k = keys[i];
        const double det = k.sxx * k.syy - k.sxy * k.sxy;
        mx[i] = k.mean.x;
        my[i] = k.mean.y;
        a[i] = k.syy / det;
        b[i] = -k.sxy / det;
        c[i] = k.sxx / det;
        norm[i] = -std::log(2.0 * std::numbers::pi * std::sqrt(det));
    }
    kernels.quadratic_forms(s.x, s.y, mx.data(), my.data(), a.data(), b.data(), c.data(), kLetterCount, out);
    for (std::size_t i = 0; i < keys.size(); ++i) out[i] = -0.5 * out[i] + norm[i];
}

double alignment_score(std::span<const double> touch_ld, std::size_t touches, std::string_view word, double gamma) {
    const std::size_t n = touches;
    const std::size_t m = word.size();
    std::vector<double> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = gamma * static_cast<double>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = gamma * static_cast<double>(i);
        const double* ld = touch_ld.data() + (i - 1) * kLetterCount;
        for (std::size_t j = 1; j <= m; ++j) {
            const double match = prev[j - 1] + ld[letter_index(word[j - 1])];
            cur[j] = std::max({match, prev[j] + gamma, cur[j - 1] + gamma});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

// ---------------------------------------------------------------------------
// Bayesian decoder

BayesDecoder::BayesDecoder(const Lexicon& lexicon, const CharNgramLM& lm, SpatialModel spatial, BayesDecoderConfig cfg)
    : lexicon_(&lexicon), index_(lexicon), logprob_(lexicon_logprobs(lexicon, lm)), spatial_(spatial), cfg_(cfg) {
    spatial_.validate();
    if (cfg_.max_ed < 0) throw std::invalid_argument("max_ed must be non-negative");
}

std::vector<Candidate> BayesDecoder::rank_all(const DecodeInput& input) const {
    if (!input.touches) throw BackendMismatch("bayes decoder needs touch locations");
    const auto& touches = *input.touches;
    if (touches.size() != input.letters.size()) throw BackendMismatch("one touch per letter required");
    const simd::KernelTable& kt = simd::kernels();
    std::vector<double> ld(touches.size() * kLetterCount);
    for (std::size_t i = 0; i < touches.size(); ++i) spatial_.log_densities(touches[i], ld.data() + i * kLetterCount, kt);

    std::vector<Candidate> cands;
    for (const auto& hit : index_.search(input.letters, cfg_.max_ed)) {
        const std::string& w = (*lexicon_)[static_cast<std::size_t>(hit.word)];
        const double s = alignment_score(ld, touches.size(), w, spatial_.gamma) + logprob_[static_cast<std::size_t>(hit.word)];
        cands.push_back(Candidate{w, s, "bayes", false});
    }
    sort_candidates(cands);
    return cands;
}

DecodeResult BayesDecoder::decode(const DecodeInput& input, int k) const {
    if (input.letters.empty()) throw std::invalid_argument("empty letter sequence");
    return finish_ranking(rank_all(input), input.letters, k, id());
}

// ---------------------------------------------------------------------------
// Registry and dispatch

void DecoderRegistry::add(std::unique_ptr<Decoder> decoder) {
    std::string key(decoder->id());
    decoders_[key] = std::move(decoder);
}

bool DecoderRegistry::contains(std::string_view id) const { return decoders_.find(id) != decoders_.end(); }

const Decoder& DecoderRegistry::get(std::string_view id) const {
    const auto it = decoders_.find(id);
    if (it == decoders_.end()) throw UnknownBackend("unknown decoder backend: " + std::string(id));
    return *it->second;
}

std::vector<std::string> DecoderRegistry::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, d] : decoders_) out.push_back(id);
    return out;
}

DecodeResult decode(const DecodeInput& input, std::string_view backend, const DecoderRegistry& registry, int k) {
    const Decoder& d = registry.get(backend);
    const auto t0 = std::chrono::steady_clock::now();
    DecodeResult res = d.decode(input, k);
    const auto t1 = std::chrono::steady_clock::now();
    res.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    return res;
}

TuneResult tune_alpha(NgramDecoder& decoder, std::span<const std::pair<std::string, std::string>> pairs,
                      std::span<const double> grid) {
    if (grid.empty()) throw std::invalid_argument("empty alpha grid");
    if (pairs.empty()) throw std::invalid_argument("no tuning pairs");
    const double original = decoder.config().alpha;
    TuneResult best;
    best.em1 = -1.0;
    for (double alpha : grid) {
        decoder.set_alpha(alpha);
        std::size_t hits = 0;
        for (const auto& [noisy, gold] : pairs) {
            const auto ranked = decoder.rank_all(noisy);
            if (!ranked.empty() && ranked.front().word == gold) ++hits;
        }
        const double em1 = static_cast<double>(hits) / static_cast<double>(pairs.size());
        best.grid.emplace_back(alpha, em1);
        if (em1 > best.em1) {
            best.em1 = em1;
            best.alpha = alpha;
        }
    }
    decoder.set_alpha(original);
    return best;
}

}  // namespace handsdown
