#pragma once

// Error channels fitted from annotated typing logs and the ED-balanced
// synthetic corpus generator built on them.

#include "handsdown/geometry.hpp"
#include "handsdown/gmm.hpp"
#include "handsdown/lexicon.hpp"
#include "handsdown/touch.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace handsdown {

using Rng = std::mt19937_64;

/// Edit-distance cap by word length: 2 for L <= 6, 3 for 7..9, 4 beyond.
int e_max(int length);

/// Length regime index used for balancing: 0 (L <= 6), 1 (7..9), 2 (>= 10).
int length_regime(int length);
inline constexpr int kRegimeCount = 3;

// ---------------------------------------------------------------------------
// Near-key slips

struct OffsetGmm {
    std::array<Mixture2, kLetterCount> letters;
    std::array<bool, kLetterCount> pooled{};  // letter fell back to the pooled fit

    const Mixture2& operator[](char c) const { return letters[static_cast<std::size_t>(letter_index(c))]; }
};

struct OffsetFitReport {
    std::vector<char> pooled_letters;
    std::size_t total_samples = 0;
};

/// Per-letter EM fit over landing offsets; letters with fewer than
/// `min_samples` use the fit over all samples pooled.
OffsetGmm fit_offset_gmm(const std::array<std::vector<Point>, kLetterCount>& samples, int min_samples = 10,
                         const GmmFitConfig& cfg = {}, OffsetFitReport* report = nullptr);

/// Isotropic offsets (sigma in layout units) for every letter.
OffsetGmm isotropic_offsets(double sigma);

enum class NearMode { Argmax, Sample };

struct NearOutcome {
    enum class Kind { None, Substitute, ExtraTap, Delete };
    Kind kind = Kind::None;
    char letter = '\0';  // substituted or extra letter
    Point touch;         // perturbed contact location
};

/// Maps center(a) + delta through the soft nearest-key kernel. Argmax mode
/// yields a substitution when the most probable letter differs from `a`;
/// Sample mode draws an extra tap from the kernel; the no-key outcome is a
/// deletion in both modes.
NearOutcome near_slip_from_offset(char a, Point delta, const KeyLayout& layout, double alpha, NearMode mode, Rng& rng);

/// Draws delta from gmm[a], then behaves as near_slip_from_offset.
NearOutcome sample_near_slip(char a, const OffsetGmm& gmm, const KeyLayout& layout, double alpha, NearMode mode,
                             Rng& rng);

// ---------------------------------------------------------------------------
// Co-activation

/// One time cluster from an annotated log: the intended letter, the hand
/// posture bucket (bucket of the previous intended letter) and the letters
/// the other cluster members fired as.
struct AnnotatedCluster {
    char intended = 'a';
    Bucket posture;
    std::vector<char> cofired;
};

struct CoActTable {
    // counts[a][bucket][c]
    std::vector<double> counts = std::vector<double>(kLetterCount * kBucketCount * kLetterCount, 0.0);
    double smoothing = 0.5;
    double swap_base = 1.0;   // relative swap weight for same row, same hand
    double swap_decay = 0.5;  // multiplier per unit of row/hand distance

    double& count(char a, int bucket, char c);
    double count(char a, int bucket, char c) const;
    double probability(char c, char a, int bucket) const;
    char sample(char a, int bucket, Rng& rng) const;
    /// Relative swap weight between adjacent letters x and y.
    double swap_propensity(char x, char y, const KeyLayout& layout) const;
};

CoActTable fit_coact_table(std::span<const AnnotatedCluster> clusters, double smoothing = 0.5,
                           double swap_decay = 0.5);

/// Adjacency-biased counts used when no human logs are available.
CoActTable default_coact_table(const KeyLayout& layout);

// ---------------------------------------------------------------------------
// Edit propensities

struct PropensityModel {
    // Features: row distance from home, hand change, pinky/ring finger, travel in key pitches.
    std::array<double, 4> weights{0.3, 0.2, 0.3, 0.1};

    static std::array<double, 4> features(std::string_view word, std::size_t i, const KeyLayout& layout);
    /// Normalised per-position propensities for `word`.
    std::vector<double> propensities(std::string_view word, const KeyLayout& layout) const;
};

/// Multinomial-logit fit: each edited gold position of each (gold, noisy)
/// pair is one draw from softmax(weights . features) over the word.
PropensityModel fit_propensity(std::span<const std::pair<std::string, std::string>> pairs, const KeyLayout& layout,
                               PropensityModel init = {});

// ---------------------------------------------------------------------------
// Model snapshot

struct OpRates {
    double substitute = 0.0;
    double insert = 0.0;
    double remove = 0.0;
    double swap = 0.0;
};

struct NoiseModel {
    int format_version = 1;
    OffsetGmm offsets;
    CoActTable coact;
    PropensityModel propensity;
    double channel_near_logit = 0.405465108108164;  // log(0.6 / 0.4)
    OpRates near_ops{0.6, 0.2, 0.2, 0.0};
    OpRates coact_ops{0.15, 0.6, 0.0, 0.25};

    /// Bundled model: isotropic offsets (sigma = 0.35 key pitch), adjacency-biased co-activation.
    static NoiseModel defaults(const KeyLayout& layout);

    std::string to_json() const;
    static NoiseModel from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static NoiseModel load(const std::filesystem::path& path);
};

struct NoiseFitReport {
    OffsetFitReport offsets;
    std::size_t clusters = 0;
    std::size_t annotated_clusters = 0;
    std::size_t human_pairs = 0;
};

/// Fits all channels from an annotated touch log. `gold` maps
/// "session/word_id" to the intended word; when present and its length
/// matches the number of intended clusters, offsets are measured against
/// the gold letters and pipeline outputs become human noisy/gold pairs.
NoiseModel fit_noise_model(std::span<const RawTouchEvent> events, const std::map<std::string, std::string>& gold,
                           const KeyLayout& layout, const PipelineConfig& cfg, NoiseFitReport* report = nullptr);

// ---------------------------------------------------------------------------
// Synthesis

struct SynthConfig {
    std::uint64_t seed = 20240501;
    double alpha_kernel = 200.0;
    double geometric_p = 0.45;       // length-aware edit-count prior
    double balance_tolerance = 0.02;
    bool insert_after = true;        // extra taps land after the aimed letter
    int attempts_per_pair = 50;
    std::size_t balance_budget = 100000;  // rejected draws allowed per corpus
    bool with_touches = true;

    void validate() const;
};

enum class Channel { Near, CoAct };
enum class OpType { Substitute, Insert, Delete, Swap };

struct EditAnnotation {
    Channel channel = Channel::Near;
    OpType op = OpType::Substitute;
    int position = 0;   // gold index
    char letter = '\0';  // produced letter, if any
};

struct NoisePair {
    std::string noisy;
    std::string gold;
    int realized_ed = 0;
    std::vector<EditAnnotation> annotations;
    std::vector<Point> touches;  // one per noisy letter, empty if not generated

    std::string annotation_string() const;
};

/// Deterministic rng for item `index` of a run seeded with `seed`.
Rng stream_rng(std::uint64_t seed, std::uint64_t index);

/// Three-step synthesis for one gold word. `forced_edits` overrides the
/// prior draw of the intended edit count. Returns nullopt when the
/// per-pair resample budget runs out.
std::optional<NoisePair> synthesize_pair(std::string_view gold, const NoiseModel& model, const KeyLayout& layout,
                                         const SynthConfig& cfg, Rng& rng,
                                         std::optional<int> forced_edits = std::nullopt);

struct RegimeBalance {
    int e_max = 0;
    std::size_t target = 0;
    std::vector<std::size_t> bins;  // realized ED histogram

    double max_deviation() const;  // from uniform, as a fraction
};

struct BalanceReport {
    std::array<RegimeBalance, kRegimeCount> regimes;
    std::size_t attempts = 0;
    std::size_t rejected = 0;
    std::size_t synthesis_failures = 0;
    bool complete = true;
};

struct Corpus {
    std::vector<NoisePair> pairs;
    BalanceReport report;
};

/// Fills each length regime (share proportional to its lexicon words) so
/// that every ED bin 0..E_max holds an equal share. Returns a partial corpus
/// with complete = false when the rejection budget runs out.
Corpus balance_corpus(const Lexicon& lexicon, std::size_t target_size, const NoiseModel& model,
                      const KeyLayout& layout, const SynthConfig& cfg);

void write_corpus_tsv(std::ostream& out, std::span<const NoisePair> pairs, bool with_touches);
std::vector<NoisePair> read_corpus_tsv(std::istream& in);

}  // namespace handsdown
