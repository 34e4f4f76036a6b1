#include "memcol/toy/experiment.hpp"

#include "memcol/errors.hpp"
#include "memcol/filter.hpp"

namespace memcol::toy {

std::string object_query(const std::string& object_name) {
    return "The color of the " + object_name + " is [MASK].";
}

ToyPipeline run_toy_pipeline(const ExperimentConfig& cfg) {
    if (cfg.corpus_size < 10) throw ConfigError("corpus size too small for training");

    ToyPipeline p;
    p.world = generate_world(cfg.n_objects, cfg.seed, /*reveal_colors=*/false);

    Rng rng(cfg.seed ^ 0x8000000000000001ULL);
    const std::vector<WorldExample> raw =
        sample_corpus(p.world, static_cast<std::size_t>(cfg.corpus_size), rng);

    // Run the real caption filter over the corpus with the world's own color
    // facts as the rule. With reveal_colors=false nothing is dropped; the
    // step stays in the pipeline so the guarantee is checked, not assumed.
    const FilterRule rule = make_filter_rule(world_dataset(p.world));
    StemCache cache;
    std::vector<const WorldExample*> kept;
    kept.reserve(raw.size());
    for (const auto& ex : raw)
        if (decide_caption(ex.caption, rule, &cache).keep) kept.push_back(&ex);
    if (kept.size() < 10) throw ConfigError("filtered corpus too small for training");

    p.vocab = make_toy_vocab(p.world.vocabulary_words());

    std::vector<ToyExample> pairs;
    pairs.reserve(kept.size());
    for (const WorldExample* ex : kept)
        pairs.push_back({p.vocab.encode(ex->caption), ex->image_feature});

    EmbedderConfig ecfg;
    ecfg.vocab = p.vocab.size();
    ecfg.dim = p.world.feature_dim;
    ecfg.steps = cfg.embedder_steps;
    ecfg.seed = cfg.seed;
    p.embedder = train_joint_embedder(pairs, ecfg, p.vocab);

    // The multimodal corpus interleaves each caption with and without its
    // encoded image, so the model stays usable on bare text and the visual
    // facts can surface through the text-only pathway at query time.
    std::vector<ToyExample> text_corpus, visual_corpus;
    text_corpus.reserve(pairs.size());
    visual_corpus.reserve(2 * pairs.size());
    for (const auto& pair : pairs) {
        text_corpus.push_back({pair.tokens, {}});
        visual_corpus.push_back({pair.tokens, encode_image(p.embedder, pair.visual)});
        visual_corpus.push_back({pair.tokens, {}});
    }

    MlmConfig mcfg;
    mcfg.vocab = p.vocab.size();
    mcfg.dim = cfg.mlm_dim;
    mcfg.visual_dim = p.world.feature_dim;
    mcfg.layers = cfg.mlm_layers;
    mcfg.heads = cfg.mlm_heads;
    mcfg.steps = cfg.mlm_steps;
    mcfg.seed = cfg.seed;
    p.text_model = train_mlm(text_corpus, mcfg, p.vocab, /*use_visual=*/false).params;
    p.multimodal_model = train_mlm(visual_corpus, mcfg, p.vocab, /*use_visual=*/true).params;
    return p;
}

ModalityAccuracies evaluate_pipeline(const ToyPipeline& p) {
    const auto& objects = p.world.objects;
    if (objects.empty()) throw ConfigError("pipeline world has no canonical objects");
    Rng eval_rng(p.world.seed ^ 0x51e5ed5ba1e5ce55ULL);

    ModalityAccuracies acc;
    const double unit = 1.0 / static_cast<double>(objects.size());
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const std::string query = object_query(objects[i].name);
        const Color truth = objects[i].color;
        const std::vector<double> image =
            p.world.image_feature(static_cast<int>(i), truth, eval_rng);

        if (predict_color(p.text_model, p.vocab, nullptr, query, PredictMode::implicit_)
                .argmax() == truth)
            acc.text_only += unit;
        if (predict_color(p.multimodal_model, p.vocab, nullptr, query, PredictMode::implicit_)
                .argmax() == truth)
            acc.implicit_mode += unit;
        if (predict_color(p.multimodal_model, p.vocab, &p.embedder, query,
                          PredictMode::explicit_)
                .argmax() == truth)
            acc.explicit_mode += unit;
        if (predict_color(p.multimodal_model, p.vocab, &p.embedder, query, PredictMode::images,
                          &image)
                .argmax() == truth)
            acc.images_mode += unit;
    }
    return acc;
}

ModalityAccuracies run_modality_experiment(const ExperimentConfig& cfg) {
    return evaluate_pipeline(run_toy_pipeline(cfg));
}

}  // namespace memcol::toy
