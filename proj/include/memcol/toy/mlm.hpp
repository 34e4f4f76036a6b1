#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memcol/rng.hpp"
#include "memcol/toy/vocab.hpp"

namespace memcol::toy {

struct MaskSplit {
    double mask = 0.8;    // replace with [MASK]
    double random = 0.1;  // replace with a random non-special token
    double keep = 0.1;    // leave unchanged
};

struct MlmConfig {
    int vocab = 0;
    int dim = 64;
    int visual_dim = 32;
    int layers = 2;
    int heads = 4;
    int max_len = 32;
    int ff_mult = 2;
    double mask_ratio = 0.15;
    MaskSplit mask_split;
    double lr = 1e-3;
    int steps = 1500;
    int batch = 32;
    double heldout_fraction = 0.1;
    std::uint64_t seed = 1;
};

// Offsets into the flat parameter vector.
struct ParamLayout {
    struct Layer {
        std::size_t wq, wk, wv, wo;          // dim x dim each
        std::size_t ln1_g, ln1_b, ln2_g, ln2_b;
        std::size_t w1, b1, w2, b2;          // ffn
    };
    std::size_t tok_emb = 0;   // vocab x dim, also the tied output head
    std::size_t pos_emb = 0;   // max_len x dim, text positions only
    std::size_t vis_proj = 0;  // dim x visual_dim
    std::size_t lnf_g = 0, lnf_b = 0;
    std::size_t out_bias = 0;  // vocab
    std::vector<Layer> layers;
    std::size_t total = 0;
};

ParamLayout make_layout(const MlmConfig& cfg);

struct MlmParams {
    MlmConfig cfg;
    ParamLayout layout;
    std::vector<double> w;
};

MlmParams init_params(const MlmConfig& cfg, Rng& rng);

struct MaskedSequence {
    std::vector<int> input;      // sequence with replacements applied
    std::vector<int> positions;  // positions selected for prediction
    std::vector<int> targets;    // original token ids at those positions
};

// Each non-special position is selected independently with probability
// ratio; the whole selection is resampled if it comes out empty. Selected
// positions are replaced per the split. Throws ConfigError for a ratio
// outside (0,1) or a split that does not sum to 1, TrainError when the
// sequence has no maskable token.
MaskedSequence mask_tokens(const std::vector<int>& seq, const ToyVocab& vocab, double ratio,
                           Rng& rng, const MaskSplit& split = {});

struct ToyExample {
    std::vector<int> tokens;
    std::vector<double> visual;  // empty when the example has no image
};

// Full forward pass: one logits row per text position. The visual feature is
// projected and appended as one extra attended position without a position
// embedding; a projection that comes out exactly zero appends nothing, so a
// zero projection matrix reproduces the text-only computation bit for bit.
// [PAD] positions are excluded from attention as keys. Throws ShapeError on
// an empty / oversized sequence or a visual dimension mismatch.
std::vector<std::vector<double>> forward_mlm(const MlmParams& p, const std::vector<int>& tokens,
                                             const std::vector<double>* visual = nullptr);

struct TrainResult {
    MlmParams params;
    double initial_heldout_loss = 0.0;
    double final_heldout_loss = 0.0;
};

// Adam on the masked cross-entropy, dynamic masking each step, deterministic
// for a given config. The held-out split and its masks are frozen up front so
// initial and final losses are comparable. Throws TrainError (with the step
// index) if the loss goes non-finite, ConfigError on an empty corpus.
TrainResult train_mlm(const std::vector<ToyExample>& corpus, const MlmConfig& cfg,
                      const ToyVocab& vocab, bool use_visual);

struct GradCheckOptions {
    int samples = 240;             // parameter coordinates to probe
    double eps = 1e-4;
    std::uint64_t seed = 1234;
    // Test-only negative control: skews the analytic projection gradient so
    // the check must report a large error.
    bool corrupt_projection_gradient = false;
};

// Max relative error between analytic gradients and central finite
// differences over sampled coordinates (the visual projection is always
// probed). Relative error uses a 1e-3 floor in the denominator so
// vanishing gradients are compared absolutely. Throws TrainError on
// non-finite gradients.
double grad_check(const MlmParams& p, const std::vector<ToyExample>& batch, const ToyVocab& vocab,
                  const GradCheckOptions& opts = {});

}  // namespace memcol::toy
