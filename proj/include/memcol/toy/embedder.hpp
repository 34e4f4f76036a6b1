#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memcol/rng.hpp"
#include "memcol/toy/mlm.hpp"
#include "memcol/toy/vocab.hpp"

namespace memcol::toy {

struct EmbedderConfig {
    int vocab = 0;
    int dim = 32;  // shared embedding space, equal to the image feature dim
    double lr = 5e-3;
    int steps = 400;
    int batch = 32;
    std::uint64_t seed = 1;
};

// Two-tower encoder over a joint space: mean-pooled token embeddings on the
// text side, an affine map on the image side, both length-normalized at the
// interface. log_scale is the learnable inverse temperature.
struct JointEmbedder {
    EmbedderConfig cfg;
    std::vector<double> text_emb;  // vocab x dim
    std::vector<double> img_w;     // dim x dim
    std::vector<double> img_b;     // dim
    double log_scale = 0.0;
};

JointEmbedder init_embedder(const EmbedderConfig& cfg, Rng& rng);

// Unit-norm mean of the embeddings of all non-[PAD] tokens ([MASK] counts as
// an ordinary token here). Throws ShapeError when nothing remains to pool,
// EncodingError on an out-of-range id.
std::vector<double> encode_text(const JointEmbedder& e, const std::vector<int>& tokens);

// Unit-norm affine image encoding. Throws ShapeError on a dimension mismatch.
std::vector<double> encode_image(const JointEmbedder& e, const std::vector<double>& feature);

// Symmetric in-batch contrastive training over (tokens, image feature) pairs
// with Adam. Deterministic given the config. Throws ConfigError when the
// batch size is below 2 or a pair has no image, ShapeError on feature
// dimension mismatches.
JointEmbedder train_joint_embedder(const std::vector<ToyExample>& pairs,
                                   const EmbedderConfig& cfg, const ToyVocab& vocab);

// Fraction of pairs whose own image ranks first by similarity among all
// images in `pairs` (ties resolve to the lowest index).
double retrieval_top1(const JointEmbedder& e, const std::vector<ToyExample>& pairs);

// Encodes raw text with the toy vocabulary ([MASK] allowed) and returns the
// text-side embedding, suitable as a stand-in image feature. Throws
// EncodingError on out-of-vocabulary words.
std::vector<double> imagine(const JointEmbedder& e, const ToyVocab& vocab,
                            const std::string& text);

}  // namespace memcol::toy
