#pragma once

#include <array>
#include <string>
#include <vector>

#include "memcol/color.hpp"
#include "memcol/toy/embedder.hpp"
#include "memcol/toy/mlm.hpp"
#include "memcol/toy/vocab.hpp"

namespace memcol::toy {

enum class PredictMode {
    implicit_,  // text only
    explicit_,  // text plus the imagined feature of the query itself
    images,     // text plus an encoded real image
};

std::string_view to_string(PredictMode m);
PredictMode parse_predict_mode(const std::string& name);  // ConfigError on unknown names

struct PredictionDistribution {
    std::array<double, kColorCount> scores{};  // logits in color enum order

    // Highest score; ties resolve to the lower color index.
    Color argmax() const;
};

// Scores the [MASK] slot of a rendered query against the 11 color tokens.
// The query must contain exactly one [MASK]. explicit_ and images modes
// need the embedder, images mode also the raw image feature; a missing
// one raises ConfigError. Unknown words raise EncodingError.
PredictionDistribution predict_color(const MlmParams& params, const ToyVocab& vocab,
                                     const JointEmbedder* embedder, const std::string& query,
                                     PredictMode mode,
                                     const std::vector<double>* image = nullptr);

}  // namespace memcol::toy
