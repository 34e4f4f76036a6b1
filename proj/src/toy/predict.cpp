#include "memcol/toy/predict.hpp"

#include <algorithm>

#include "memcol/errors.hpp"

namespace memcol::toy {

std::string_view to_string(PredictMode m) {
    switch (m) {
        case PredictMode::implicit_: return "implicit";
        case PredictMode::explicit_: return "explicit";
        case PredictMode::images: return "images";
    }
    throw ConfigError("unknown predict mode");
}

PredictMode parse_predict_mode(const std::string& name) {
    if (name == "implicit") return PredictMode::implicit_;
    if (name == "explicit") return PredictMode::explicit_;
    if (name == "images") return PredictMode::images;
    throw ConfigError("unknown predict mode: \"" + name + "\" (expected implicit, explicit, or images)");
}

Color PredictionDistribution::argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return static_cast<Color>(best);
}

PredictionDistribution predict_color(const MlmParams& params, const ToyVocab& vocab,
                                     const JointEmbedder* embedder, const std::string& query,
                                     PredictMode mode, const std::vector<double>* image) {
    const std::vector<int> tokens = vocab.encode(query);
    int mask_pos = -1;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] != vocab.mask_id) continue;
        if (mask_pos >= 0) throw ConfigError("query contains more than one [MASK]");
        mask_pos = static_cast<int>(i);
    }
    if (mask_pos < 0) throw ConfigError("query contains no [MASK]");

    std::vector<double> visual;
    const std::vector<double>* vis = nullptr;
    switch (mode) {
        case PredictMode::implicit_:
            break;
        case PredictMode::explicit_:
            if (!embedder) throw ConfigError("explicit mode needs the joint embedder");
            visual = imagine(*embedder, vocab, query);
            vis = &visual;
            break;
        case PredictMode::images:
            if (!embedder) throw ConfigError("images mode needs the joint embedder");
            if (!image) throw ConfigError("images mode needs an image feature");
            visual = encode_image(*embedder, *image);
            vis = &visual;
            break;
    }

    const auto logits = forward_mlm(params, tokens, vis);
    PredictionDistribution dist;
    for (std::size_t c = 0; c < kColorCount; ++c)
        dist.scores[c] = logits[mask_pos][vocab.color_ids[c]];
    return dist;
}

}  // namespace memcol::toy
