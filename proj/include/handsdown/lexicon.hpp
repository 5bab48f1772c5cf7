#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace handsdown {

bool is_lowercase_word(std::string_view w);

/// Word inventory in frequency-rank order.
class Lexicon {
public:
    struct LoadReport {
        std::size_t dropped = 0;     // entries with characters outside a-z
        std::size_t duplicates = 0;  // repeats after lowercasing
    };

    Lexicon() = default;

    /// Lowercases, drops non a-z entries, removes duplicates, keeps order.
    static Lexicon from_words(std::span<const std::string> raw, LoadReport* report = nullptr);

    /// Newline-delimited word list. Throws std::runtime_error when the file
    /// cannot be read or holds no usable word.
    static Lexicon load(const std::filesystem::path& path, LoadReport* report = nullptr);

    const std::vector<std::string>& words() const { return words_; }
    std::size_t size() const { return words_.size(); }
    bool empty() const { return words_.empty(); }
    const std::string& operator[](std::size_t i) const { return words_[i]; }

    bool contains(std::string_view w) const;
    /// 0-based rank, -1 when absent.
    int rank(std::string_view w) const;

    int max_length() const { return static_cast<int>(by_length_.size()) - 1; }
    /// Indices of the words of length L (empty when none).
    std::span<const int> indices_of_length(int length) const;

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;
    std::vector<std::vector<int>> by_length_;
};

struct LmConfig {
    int order = 5;
    double k = 0.01;
    bool rank_weighted = false;  // weight each word by 1/rank
};

/// Character n-gram model over a-z plus an end marker, add-k smoothed:
/// P(c|ctx) = (count(ctx c) + k) / (count(ctx) + k V), V = 27.
/// Each word is padded with n-1 start markers and one end marker.
class CharNgramLM {
public:
    static constexpr int kVocab = 27;  // 26 letters + end marker
    static constexpr int kEnd = 26;

    static CharNgramLM train(const Lexicon& lexicon, LmConfig cfg = {});
    static CharNgramLM train(std::span<const std::string> words, std::span<const double> weights, LmConfig cfg);

    int order() const { return order_; }
    double k() const { return k_; }
    bool rank_weighted() const { return rank_weighted_; }

    /// Smoothed P(symbol | context). `context` holds the preceding symbols
    /// as text where '^' is the start marker; only the last n-1 are used.
    /// symbol is 0..25 for letters, kEnd for the end marker.
    double conditional(std::string_view context, int symbol) const;

    /// log P(w) including the end-marker transition. Throws
    /// std::invalid_argument for empty or non a-z input.
    double logprob(std::string_view word) const;

    std::string to_json() const;
    static CharNgramLM from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static CharNgramLM load(const std::filesystem::path& path);

    std::size_t context_count() const { return table_.size(); }

private:
    struct Entry {
        std::array<double, kVocab> counts{};
        double total = 0.0;
    };

    CharNgramLM(int order, double k, bool weighted);
    void finalize();
    double conditional_code(std::uint64_t ctx, int symbol) const;

    int order_ = 5;
    double k_ = 0.01;
    bool rank_weighted_ = false;
    std::unordered_map<std::uint64_t, Entry> table_;
};

}  // namespace handsdown
