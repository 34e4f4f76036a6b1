#pragma once

#include <optional>
#include <string>

#include "memcol/toy/embedder.hpp"
#include "memcol/toy/mlm.hpp"
#include "memcol/toy/vocab.hpp"

namespace memcol::toy {

struct ToyCheckpoint {
    ToyVocab vocab;
    MlmParams params;
    std::optional<JointEmbedder> embedder;
};

// Single-file binary checkpoint, versioned with a leading format tag. The
// loader rejects an unknown tag, truncated data, trailing bytes, and any
// size that disagrees with the stored config with FormatError.
void save_checkpoint(const std::string& path, const ToyCheckpoint& ckpt);
ToyCheckpoint load_checkpoint(const std::string& path);

}  // namespace memcol::toy
