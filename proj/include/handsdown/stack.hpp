#pragma once

// Lexicon, language model, layout and decoder backends assembled together.

#include "handsdown/decoders.hpp"
#include "handsdown/geometry.hpp"
#include "handsdown/lexicon.hpp"

#include <filesystem>
#include <memory>
#include <optional>

namespace handsdown {

struct StackOptions {
    std::filesystem::path lexicon;
    std::optional<std::filesystem::path> layout;  // default QWERTY when absent
    LmConfig lm;
    NgramDecoderConfig ngram;
    double sigma_fraction = 0.4;
    std::optional<RemoteDecoderConfig> remote;
};

/// Owns everything the decoders point into; not movable.
class DecoderStack {
public:
    explicit DecoderStack(const StackOptions& opts);
    DecoderStack(Lexicon lexicon, KeyLayout layout, const StackOptions& opts);
    DecoderStack(const DecoderStack&) = delete;
    DecoderStack& operator=(const DecoderStack&) = delete;

    const Lexicon& lexicon() const { return lexicon_; }
    const CharNgramLM& lm() const { return lm_; }
    const KeyLayout& layout() const { return layout_; }
    const DecoderRegistry& registry() const { return registry_; }
    const NgramDecoder& ngram() const { return *ngram_; }
    const BayesDecoder& bayes() const { return *bayes_; }

private:
    Lexicon lexicon_;
    CharNgramLM lm_;
    KeyLayout layout_;
    DecoderRegistry registry_;
    const NgramDecoder* ngram_ = nullptr;
    const BayesDecoder* bayes_ = nullptr;
};

}  // namespace handsdown
