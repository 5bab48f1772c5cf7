#include "handsdown/stack.hpp"

namespace handsdown {

namespace {
KeyLayout layout_from(const StackOptions& opts) {
    return opts.layout ? KeyLayout::load(*opts.layout) : KeyLayout::qwerty();
}
}  // namespace

DecoderStack::DecoderStack(const StackOptions& opts)
    : DecoderStack(Lexicon::load(opts.lexicon), layout_from(opts), opts) {}

DecoderStack::DecoderStack(Lexicon lexicon, KeyLayout layout, const StackOptions& opts)
    : lexicon_(std::move(lexicon)), lm_(CharNgramLM::train(lexicon_, opts.lm)), layout_(std::move(layout)) {
    auto ngram = std::make_unique<NgramDecoder>(lexicon_, lm_, opts.ngram);
    auto bayes = std::make_unique<BayesDecoder>(lexicon_, lm_, SpatialModel::isotropic(layout_, opts.sigma_fraction));
    ngram_ = ngram.get();
    bayes_ = bayes.get();
    registry_.add(std::move(ngram));
    registry_.add(std::move(bayes));
    if (opts.remote) {
        const Decoder& fallback = registry_.get(opts.remote->fallback);
        registry_.add(std::make_unique<RemoteDecoder>(*opts.remote, fallback));
    }
}

}  // namespace handsdown
