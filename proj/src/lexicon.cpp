#include "handsdown/lexicon.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace handsdown {

using nlohmann::json;

bool is_lowercase_word(std::string_view w) {
    return !w.empty() && std::all_of(w.begin(), w.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

Lexicon Lexicon::from_words(std::span<const std::string> raw, LoadReport* report) {
    Lexicon lex;
    LoadReport rep;
    for (std::string w : raw) {
        while (!w.empty() && (w.back() == '\r' || w.back() == ' ' || w.back() == '\t')) w.pop_back();
        std::size_t lead = 0;
        while (lead < w.size() && (w[lead] == ' ' || w[lead] == '\t')) ++lead;
        w.erase(0, lead);
        if (w.empty()) continue;
        std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (!is_lowercase_word(w)) {
            ++rep.dropped;
            continue;
        }
        if (lex.index_.contains(w)) {
            ++rep.duplicates;
            continue;
        }
        const int idx = static_cast<int>(lex.words_.size());
        lex.index_.emplace(w, idx);
        if (lex.by_length_.size() <= w.size()) lex.by_length_.resize(w.size() + 1);
        lex.by_length_[w.size()].push_back(idx);
        lex.words_.push_back(std::move(w));
    }
    if (report) *report = rep;
    return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path, LoadReport* report) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read lexicon: " + path.string());
    std::vector<std::string> raw;
    std::string line;
    while (std::getline(in, line)) raw.push_back(line);
    Lexicon lex = from_words(raw, report);
    if (lex.empty()) throw std::runtime_error("lexicon has no usable words: " + path.string());
    return lex;
}

bool Lexicon::contains(std::string_view w) const { return index_.contains(std::string(w)); }

int Lexicon::rank(std::string_view w) const {
    const auto it = index_.find(std::string(w));
    return it == index_.end() ? -1 : it->second;
}

std::span<const int> Lexicon::indices_of_length(int length) const {
    if (length < 0 || static_cast<std::size_t>(length) >= by_length_.size()) return {};
    return by_length_[static_cast<std::size_t>(length)];
}

// ---------------------------------------------------------------------------

namespace {

// Context symbols: 0 = start marker, 1..26 = letters. Base-27 code of the
// last n-1 symbols, most recent in the lowest digit.
constexpr std::uint64_t kBase = 27;

int context_symbol(char c) {
    if (c == '^') return 0;
    if (c >= 'a' && c <= 'z') return c - 'a' + 1;
    throw std::invalid_argument(std::string("illegal context symbol: ") + c);
}

std::uint64_t push_symbol(std::uint64_t code, int symbol, std::uint64_t modulus) {
    return (code * kBase + static_cast<std::uint64_t>(symbol)) % modulus;
}

std::uint64_t context_modulus(int order) {
    std::uint64_t m = 1;
    for (int i = 0; i < order - 1; ++i) m *= kBase;
    return m;
}

std::string decode_context(std::uint64_t code, int order) {
    std::string s(static_cast<std::size_t>(order - 1), '^');
    for (int i = order - 2; i >= 0; --i) {
        const int sym = static_cast<int>(code % kBase);
        code /= kBase;
        s[static_cast<std::size_t>(i)] = sym == 0 ? '^' : static_cast<char>('a' + sym - 1);
    }
    return s;
}

}  // namespace

CharNgramLM::CharNgramLM(int order, double k, bool weighted) : order_(order), k_(k), rank_weighted_(weighted) {
    if (order < 2) throw std::invalid_argument("n-gram order must be at least 2");
    if (order > 12) throw std::invalid_argument("n-gram order above 12 is not supported");
    if (!(k > 0)) throw std::invalid_argument("add-k constant must be positive");
}

CharNgramLM CharNgramLM::train(const Lexicon& lexicon, LmConfig cfg) {
    std::vector<double> weights(lexicon.size(), 1.0);
    if (cfg.rank_weighted) {
        for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = 1.0 / static_cast<double>(i + 1);
    }
    return train(lexicon.words(), weights, cfg);
}

CharNgramLM CharNgramLM::train(std::span<const std::string> words, std::span<const double> weights, LmConfig cfg) {
    CharNgramLM lm(cfg.order, cfg.k, cfg.rank_weighted);
    if (words.empty()) throw std::invalid_argument("cannot train a language model on an empty lexicon");
    if (weights.size() != words.size()) throw std::invalid_argument("one weight per word required");
    const std::uint64_t mod = context_modulus(lm.order_);
    for (std::size_t i = 0; i < words.size(); ++i) {
        const std::string& w = words[i];
        if (!is_lowercase_word(w)) throw std::invalid_argument("training word must be lowercase a-z: " + w);
        std::uint64_t ctx = 0;  // all start markers
        for (char c : w) {
            lm.table_[ctx].counts[static_cast<std::size_t>(c - 'a')] += weights[i];
            ctx = push_symbol(ctx, c - 'a' + 1, mod);
        }
        lm.table_[ctx].counts[kEnd] += weights[i];
    }
    lm.finalize();
    return lm;
}

void CharNgramLM::finalize() {
    for (auto& [code, entry] : table_) {
        double total = 0.0;
        for (double c : entry.counts) total += c;
        entry.total = total;
    }
}

double CharNgramLM::conditional_code(std::uint64_t ctx, int symbol) const {
    const double denom_k = k_ * kVocab;
    const auto it = table_.find(ctx);
    if (it == table_.end()) return k_ / denom_k;
    return (it->second.counts[static_cast<std::size_t>(symbol)] + k_) / (it->second.total + denom_k);
}

double CharNgramLM::conditional(std::string_view context, int symbol) const {
    if (symbol < 0 || symbol >= kVocab) throw std::invalid_argument("symbol out of range");
    const std::uint64_t mod = context_modulus(order_);
    std::uint64_t ctx = 0;
    const std::size_t keep = static_cast<std::size_t>(order_ - 1);
    const std::size_t from = context.size() > keep ? context.size() - keep : 0;
    for (std::size_t i = from; i < context.size(); ++i) ctx = push_symbol(ctx, context_symbol(context[i]), mod);
    return conditional_code(ctx, symbol);
}

double CharNgramLM::logprob(std::string_view word) const {
    if (!is_lowercase_word(word)) throw std::invalid_argument("language model input must be non-empty a-z");
    const std::uint64_t mod = context_modulus(order_);
    std::uint64_t ctx = 0;
    double lp = 0.0;
    for (char c : word) {
        lp += std::log(conditional_code(ctx, c - 'a'));
        ctx = push_symbol(ctx, c - 'a' + 1, mod);
    }
    lp += std::log(conditional_code(ctx, kEnd));
    return lp;
}

std::string CharNgramLM::to_json() const {
    // Sorted by context string so the dump is canonical.
    std::map<std::string, const Entry*> sorted;
    for (const auto& [code, entry] : table_) sorted.emplace(decode_context(code, order_), &entry);
    json contexts = json::object();
    for (const auto& [ctx, entry] : sorted) contexts[ctx] = entry->counts;
    json doc{{"format", "handsdown-char-ngram"},
             {"version", 1},
             {"order", order_},
             {"k", k_},
             {"rank_weighted", rank_weighted_},
             {"vocab", kVocab},
             {"contexts", std::move(contexts)}};
    return doc.dump() + "\n";
}

CharNgramLM CharNgramLM::from_json(std::string_view text) {
    try {
        const json doc = json::parse(text);
        if (doc.at("format").get<std::string>() != "handsdown-char-ngram") {
            throw std::runtime_error("not a character n-gram snapshot");
        }
        if (doc.at("version").get<int>() != 1) throw std::runtime_error("unsupported snapshot version");
        CharNgramLM lm(doc.at("order").get<int>(), doc.at("k").get<double>(), doc.at("rank_weighted").get<bool>());
        const std::uint64_t mod = context_modulus(lm.order_);
        for (const auto& [ctx, counts] : doc.at("contexts").items()) {
            if (static_cast<int>(ctx.size()) != lm.order_ - 1) throw std::runtime_error("bad context length");
            std::uint64_t code = 0;
            for (char c : ctx) code = push_symbol(code, context_symbol(c), mod);
            Entry& e = lm.table_[code];
            if (counts.size() != kVocab) throw std::runtime_error("bad count vector");
            for (std::size_t i = 0; i < kVocab; ++i) e.counts[i] = counts[i].get<double>();
        }
        lm.finalize();
        return lm;
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("language model snapshot: ") + e.what());
    }
}

void CharNgramLM::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_json();
}

CharNgramLM CharNgramLM::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

}  // namespace handsdown
