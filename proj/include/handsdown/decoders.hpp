#pragma once

// Word decoders: a letter-only n-gram decoder, a touch-aware Bayesian
// decoder and an HTTP client for a remote decoder, behind one interface.

#include "handsdown/geometry.hpp"
#include "handsdown/lexicon.hpp"
#include "handsdown/simd/kernels.hpp"

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace handsdown {

struct DecodeInput {
    std::string letters;                       // nearest-key sequence
    std::optional<std::vector<Point>> touches;  // one per letter when present
};

struct Candidate {
    std::string word;
    double score = 0.0;
    std::string source;
    bool literal = false;
};

struct DecodeResult {
    std::vector<Candidate> ranked;  // best first, no duplicate words
    int k = 5;
    bool degraded = false;
    double latency_ms = 0.0;
    std::string backend;

    std::vector<std::string> words() const;
};

/// The input does not carry what the backend needs (e.g. touches).
class BackendMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class UnknownBackend : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Lexicon grouped by word length with the texts of each group stored back
/// to back, so the bit-parallel edit distance kernel can sweep a group.
class CandidateIndex {
public:
    struct Hit {
        int word = 0;
        int distance = 0;
    };

    explicit CandidateIndex(const Lexicon& lexicon);

    /// Every word within max_ed of u, in lexicon order.
    std::vector<Hit> search(std::string_view u, int max_ed) const;
    std::vector<Hit> search(std::string_view u, int max_ed, const simd::KernelTable& kernels) const;

    const Lexicon& lexicon() const { return *lexicon_; }

private:
    struct Group {
        std::string texts;
        std::vector<int> words;
    };
    const Lexicon* lexicon_;
    std::vector<Group> groups_;  // indexed by length
};

/// C(u) as a list of words, lexicon order.
std::vector<std::string> candidate_set(std::string_view u, const Lexicon& lexicon, int max_ed);

class Decoder {
public:
    virtual ~Decoder() = default;
    virtual std::string_view id() const = 0;
    virtual DecodeResult decode(const DecodeInput& input, int k) const = 0;
};

/// Top-k of `scored` (already sorted) plus the literal fallback: flags the
/// literal when it is already listed, otherwise appends it at the tail.
DecodeResult finish_ranking(std::vector<Candidate> scored, std::string_view literal, int k,
                            std::string_view source);

/// Descending score, ties by word.
void sort_candidates(std::vector<Candidate>& cands);

struct NgramDecoderConfig {
    int max_ed = 4;
    double alpha = 4.0;  // weight of the edit distance against log P(w)
};

/// score(w) = log P(w) - alpha * ED(u, w) over C(u).
class NgramDecoder final : public Decoder {
public:
    NgramDecoder(const Lexicon& lexicon, const CharNgramLM& lm, NgramDecoderConfig cfg = {});

    std::string_view id() const override { return "ngram"; }
    DecodeResult decode(const DecodeInput& input, int k) const override;

    /// Every candidate in C(u), sorted.
    std::vector<Candidate> rank_all(std::string_view u) const;

    const NgramDecoderConfig& config() const { return cfg_; }
    void set_alpha(double alpha);
    double logprob(int word) const { return logprob_[static_cast<std::size_t>(word)]; }
    /// max - min of log P(w) over the lexicon.
    double logprob_range() const;

private:
    const Lexicon* lexicon_;
    CandidateIndex index_;
    std::vector<double> logprob_;
    NgramDecoderConfig cfg_;
};

/// Per-letter bivariate Gaussians around key centers plus a log-penalty
/// for unmatched touches or letters.
struct SpatialModel {
    struct Key {
        Point mean;
        double sxx = 1.0;
        double sxy = 0.0;
        double syy = 1.0;
    };
    std::array<Key, kLetterCount> keys;
    double gamma = std::log(0.01);

    /// Isotropic sigma = fraction x key pitch.
    static SpatialModel isotropic(const KeyLayout& layout, double fraction = 0.4);

    double log_density(Point s, char c) const;
    /// Log-densities of one touch for all 26 letters.
    void log_densities(Point s, double* out, const simd::KernelTable& kernels) const;
    void validate() const;
};

/// Viterbi alignment score of touches against a word: matches add the
/// Gaussian log-density of the touch at the letter's key, gaps add gamma.
/// `touch_ld` holds 26 log-densities per touch.
double alignment_score(std::span<const double> touch_ld, std::size_t touches, std::string_view word,
                       double gamma);

struct BayesDecoderConfig {
    int max_ed = 4;
};

/// score(w) = log P(S|w) + log P(w) over C(u) with u the nearest-key letters.
class BayesDecoder final : public Decoder {
public:
    BayesDecoder(const Lexicon& lexicon, const CharNgramLM& lm, SpatialModel spatial, BayesDecoderConfig cfg = {});

    std::string_view id() const override { return "bayes"; }
    DecodeResult decode(const DecodeInput& input, int k) const override;
    std::vector<Candidate> rank_all(const DecodeInput& input) const;

    const SpatialModel& spatial() const { return spatial_; }

private:
    const Lexicon* lexicon_;
    CandidateIndex index_;
    std::vector<double> logprob_;
    SpatialModel spatial_;
    BayesDecoderConfig cfg_;
};

struct RemoteDecoderConfig {
    std::string endpoint = "http://127.0.0.1:8081";  // scheme://host:port
    std::string path = "/decode";
    double timeout_ms = 500.0;
    std::string fallback = "ngram";
    int max_in_flight = 8;

    void validate() const;
};

/// Sends only the letter sequence and k. Any failure (connect, timeout,
/// non-2xx, malformed body, in-flight budget exhausted) falls back to the
/// fallback decoder and marks the result degraded.
class RemoteDecoder final : public Decoder {
public:
    RemoteDecoder(RemoteDecoderConfig cfg, const Decoder& fallback);
    ~RemoteDecoder() override;

    std::string_view id() const override { return "remote"; }
    DecodeResult decode(const DecodeInput& input, int k) const override;

private:
    struct State;
    RemoteDecoderConfig cfg_;
    const Decoder* fallback_;
    std::unique_ptr<State> state_;
};

/// Parses a remote response body into deduplicated, sorted candidates.
/// Throws std::runtime_error on malformed bodies.
std::vector<Candidate> parse_remote_response(std::string_view body);

class DecoderRegistry {
public:
    void add(std::unique_ptr<Decoder> decoder);
    bool contains(std::string_view id) const;
    const Decoder& get(std::string_view id) const;  // throws UnknownBackend
    std::vector<std::string> ids() const;

private:
    std::map<std::string, std::unique_ptr<Decoder>, std::less<>> decoders_;
};

/// Dispatches and records wall-clock latency in the result.
DecodeResult decode(const DecodeInput& input, std::string_view backend, const DecoderRegistry& registry, int k = 5);

struct TuneResult {
    double alpha = 0.0;
    double em1 = 0.0;
    std::vector<std::pair<double, double>> grid;  // (alpha, EM@1)
};

/// Grid search for the n-gram trade-off on held-out (noisy, gold) pairs.
TuneResult tune_alpha(NgramDecoder& decoder, std::span<const std::pair<std::string, std::string>> pairs,
                      std::span<const double> grid);

}  // namespace handsdown
