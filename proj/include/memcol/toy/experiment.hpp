#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memcol/toy/embedder.hpp"
#include "memcol/toy/mlm.hpp"
#include "memcol/toy/predict.hpp"
#include "memcol/toy/vocab.hpp"
#include "memcol/toy/world.hpp"

namespace memcol::toy {

struct ExperimentConfig {
    int n_objects = 22;
    int corpus_size = 3000;
    std::uint64_t seed = 1;
    int mlm_dim = 64;
    int mlm_layers = 2;
    int mlm_heads = 4;
    int mlm_steps = 1200;
    int embedder_steps = 400;
};

// Everything trained on one synthetic world: the filtered corpus never
// states a canonical color, so color facts reach the models only through
// the visual channel.
struct ToyPipeline {
    SyntheticWorld world;
    ToyVocab vocab;
    JointEmbedder embedder;
    MlmParams text_model;        // trained without visual input
    MlmParams multimodal_model;  // trained with encoded image features
};

ToyPipeline run_toy_pipeline(const ExperimentConfig& cfg);

struct ModalityAccuracies {
    double text_only = 0.0;      // text-only model, no visual input
    double implicit_mode = 0.0;  // multimodal model, no visual input
    double explicit_mode = 0.0;  // multimodal model, imagined feature
    double images_mode = 0.0;    // multimodal model, real image feature
};

// One cloze query per canonical object, scored in all four conditions
// against the object's true color.
ModalityAccuracies evaluate_pipeline(const ToyPipeline& p);

// The full loop: world, embedder, both models, evaluation.
ModalityAccuracies run_modality_experiment(const ExperimentConfig& cfg);

// The query evaluated for a canonical object, e.g.
// "The color of the bela is [MASK]."
std::string object_query(const std::string& object_name);

}  // namespace memcol::toy
