#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "memcol/errors.hpp"
#include "memcol/toy/checkpoint.hpp"
#include "memcol/toy/embedder.hpp"
#include "memcol/toy/predict.hpp"
#include "memcol/toy/world.hpp"

using namespace memcol;
using namespace memcol::toy;

namespace {

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// One (caption, image) pair per shape so in-batch retrieval has a unique
// right answer for every row.
std::vector<ToyExample> per_shape_pairs(const SyntheticWorld& w, const ToyVocab& v, Rng& rng) {
    std::vector<ToyExample> pairs;
    for (std::size_t i = 0; i < w.objects.size(); ++i) {
        ToyExample ex;
        ex.tokens = v.encode("a photo of the " + w.objects[i].name);
        ex.visual = w.image_feature(static_cast<int>(i), w.objects[i].color, rng);
        pairs.push_back(ex);
    }
    for (std::size_t g = 0; g < w.generic_objects.size(); ++g) {
        const auto color = static_cast<Color>(rng.below(kColorCount));
        ToyExample ex;
        ex.tokens = v.encode("the " + w.generic_objects[g] + " is " +
                             std::string(to_string(color)));
        ex.visual = w.image_feature(static_cast<int>(w.objects.size() + g), color, rng);
        pairs.push_back(ex);
    }
    return pairs;
}

struct TrainedFixture {
    SyntheticWorld world;
    ToyVocab vocab;
    JointEmbedder embedder;
};

// Shared across test cases: contrastive training is the slow part here.
const TrainedFixture& trained_fixture() {
    static const TrainedFixture f = [] {
        TrainedFixture t;
        t.world = generate_world(22, 7, false);
        t.vocab = make_toy_vocab(t.world.vocabulary_words());
        Rng rng(51);
        const auto corpus = sample_corpus(t.world, 1500, rng);
        std::vector<ToyExample> pairs;
        pairs.reserve(corpus.size());
        for (const auto& ex : corpus)
            pairs.push_back({t.vocab.encode(ex.caption), ex.image_feature});
        EmbedderConfig cfg;
        cfg.vocab = t.vocab.size();
        cfg.dim = t.world.feature_dim;
        cfg.steps = 400;
        cfg.seed = 9;
        t.embedder = train_joint_embedder(pairs, cfg, t.vocab);
        return t;
    }();
    return f;
}

}  // namespace

TEST_CASE("embedder outputs are unit length") {
    const ToyVocab v = make_toy_vocab({"the", "wall", "door", "near", "is"});
    EmbedderConfig cfg;
    cfg.vocab = v.size();
    cfg.dim = 16;
    Rng rng(3);
    const JointEmbedder e = init_embedder(cfg, rng);

    const auto t = encode_text(e, v.encode("the wall near the door"));
    CHECK(t.size() == 16);
    CHECK(norm(t) == doctest::Approx(1.0).epsilon(1e-6));

    std::vector<double> feature(16);
    for (auto& x : feature) x = rng.uniform(-2.0, 2.0);
    const auto im = encode_image(e, feature);
    CHECK(norm(im) == doctest::Approx(1.0).epsilon(1e-6));

    SUBCASE("imagined text is the text encoding") {
        const auto a = imagine(e, v, "the wall near the door");
        CHECK(a == t);
        // identical text twice gives the identical vector
        CHECK(imagine(e, v, "the wall near the door") == a);
    }
    SUBCASE("[MASK] is encodable") {
        const auto a = imagine(e, v, "the wall is near the [MASK]");
        CHECK(norm(a) == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("out of vocabulary") {
        CHECK_THROWS_AS((void)imagine(e, v, "the zebra"), EncodingError);
    }
    SUBCASE("pads are ignored in pooling") {
        auto ids = v.encode("the wall");
        const auto bare = encode_text(e, ids);
        ids.push_back(v.pad_id);
        ids.push_back(v.pad_id);
        CHECK(encode_text(e, ids) == bare);
        CHECK_THROWS_AS((void)encode_text(e, {v.pad_id}), ShapeError);
    }
    SUBCASE("feature dimension is checked") {
        const std::vector<double> bad(17, 0.0);
        CHECK_THROWS_AS((void)encode_image(e, bad), ShapeError);
    }
}

TEST_CASE("embedder config validation") {
    const ToyVocab v = make_toy_vocab({"wall"});
    std::vector<ToyExample> pairs = {{v.encode("wall"), {1.0, 0.0}},
                                     {v.encode("red wall"), {0.0, 1.0}}};
    EmbedderConfig cfg;
    cfg.vocab = v.size();
    cfg.dim = 2;

    EmbedderConfig bad = cfg;
    bad.batch = 1;
    CHECK_THROWS_AS((void)train_joint_embedder(pairs, bad, v), ConfigError);
    bad = cfg;
    bad.steps = 0;
    CHECK_THROWS_AS((void)train_joint_embedder(pairs, bad, v), ConfigError);
    bad = cfg;
    bad.vocab = 99;
    CHECK_THROWS_AS((void)train_joint_embedder(pairs, bad, v), ConfigError);

    auto missing = pairs;
    missing[1].visual.clear();
    CHECK_THROWS_AS((void)train_joint_embedder(missing, cfg, v), ConfigError);
    auto mismatched = pairs;
    mismatched[1].visual = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS((void)train_joint_embedder(mismatched, cfg, v), ShapeError);
    CHECK_THROWS_AS((void)train_joint_embedder({pairs[0]}, cfg, v), ConfigError);
}

TEST_CASE("contrastive training aligns matching pairs") {
    const TrainedFixture& f = trained_fixture();
    Rng rng(77);
    const auto heldout = per_shape_pairs(f.world, f.vocab, rng);
    REQUIRE(heldout.size() == 32);

    const double trained = retrieval_top1(f.embedder, heldout);
    CHECK(trained >= 0.9);

    EmbedderConfig cfg = f.embedder.cfg;
    Rng init_rng(1234);
    const JointEmbedder untrained = init_embedder(cfg, init_rng);
    const double chance = retrieval_top1(untrained, heldout);
    CHECK(chance < 0.35);  // 1/32 plus sampling slack

    SUBCASE("training is deterministic") {
        // retrain with the identical config and corpus slice
        Rng rng2(51);
        const auto corpus = sample_corpus(f.world, 1500, rng2);
        std::vector<ToyExample> pairs;
        for (const auto& ex : corpus)
            pairs.push_back({f.vocab.encode(ex.caption), ex.image_feature});
        EmbedderConfig cfg2 = f.embedder.cfg;
        const JointEmbedder again = train_joint_embedder(pairs, cfg2, f.vocab);
        CHECK(again.text_emb == f.embedder.text_emb);
        CHECK(again.img_w == f.embedder.img_w);
        CHECK(again.img_b == f.embedder.img_b);
        CHECK(again.log_scale == f.embedder.log_scale);
    }
}

TEST_CASE("imagination approximates the matching image encoding") {
    const TrainedFixture& f = trained_fixture();
    Rng rng(91);

    std::vector<std::vector<double>> image_codes;
    for (std::size_t i = 0; i < f.world.objects.size(); ++i)
        image_codes.push_back(encode_image(
            f.embedder,
            f.world.image_feature(static_cast<int>(i), f.world.objects[i].color, rng)));

    std::size_t wins = 0;
    for (std::size_t i = 0; i < f.world.objects.size(); ++i) {
        const auto imagined =
            imagine(f.embedder, f.vocab, "a photo of the " + f.world.objects[i].name);
        const double own = dot(imagined, image_codes[i]);
        double best_other = -2.0;
        for (std::size_t j = 0; j < image_codes.size(); ++j)
            if (j != i) best_other = std::max(best_other, dot(imagined, image_codes[j]));
        if (own > best_other) ++wins;
    }
    CHECK(static_cast<double>(wins) / f.world.objects.size() >= 0.9);
}

TEST_CASE("checkpoint round trip") {
    const ToyVocab v = make_toy_vocab({"the", "wall", "bela"});
    MlmConfig cfg;
    cfg.vocab = v.size();
    cfg.dim = 16;
    cfg.visual_dim = 8;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.max_len = 10;
    Rng rng(3);
    ToyCheckpoint ckpt;
    ckpt.vocab = v;
    ckpt.params = init_params(cfg, rng);

    EmbedderConfig ecfg;
    ecfg.vocab = v.size();
    ecfg.dim = 8;
    ckpt.embedder = init_embedder(ecfg, rng);

    const std::string path =
        (std::filesystem::temp_directory_path() / "memcol-ckpt-test.bin").string();
    save_checkpoint(path, ckpt);
    const ToyCheckpoint back = load_checkpoint(path);

    CHECK(back.vocab.tokens == v.tokens);
    CHECK(back.params.w == ckpt.params.w);
    CHECK(back.params.cfg.dim == cfg.dim);
    CHECK(back.params.cfg.seed == cfg.seed);
    CHECK(back.params.layout.total == ckpt.params.layout.total);
    REQUIRE(back.embedder.has_value());
    CHECK(back.embedder->text_emb == ckpt.embedder->text_emb);
    CHECK(back.embedder->img_w == ckpt.embedder->img_w);
    CHECK(back.embedder->img_b == ckpt.embedder->img_b);
    CHECK(back.embedder->log_scale == ckpt.embedder->log_scale);

    SUBCASE("embedder is optional") {
        ckpt.embedder.reset();
        save_checkpoint(path, ckpt);
        const ToyCheckpoint bare = load_checkpoint(path);
        CHECK(!bare.embedder.has_value());
        CHECK(bare.params.w == ckpt.params.w);
    }
    SUBCASE("bad magic") {
        std::ofstream out(path, std::ios::binary);
        out << "not a checkpoint at all\n";
        out.close();
        CHECK_THROWS_AS((void)load_checkpoint(path), FormatError);
    }
    SUBCASE("truncation") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        in.close();
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        out.close();
        CHECK_THROWS_AS((void)load_checkpoint(path), FormatError);
    }
    SUBCASE("trailing bytes") {
        std::ofstream out(path, std::ios::binary | std::ios::app);
        out << "junk";
        out.close();
        CHECK_THROWS_AS((void)load_checkpoint(path), FormatError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS((void)load_checkpoint("/nonexistent/nowhere.bin"), FormatError);
    }
    std::remove(path.c_str());
}

TEST_CASE("color prediction modes") {
    const ToyVocab v = make_toy_vocab({"the", "wall", "bela", "is", "color", "of"});
    MlmConfig cfg;
    cfg.vocab = v.size();
    cfg.dim = 16;
    cfg.visual_dim = 8;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.max_len = 12;
    Rng rng(13);
    const MlmParams params = init_params(cfg, rng);
    EmbedderConfig ecfg;
    ecfg.vocab = v.size();
    ecfg.dim = 8;
    const JointEmbedder embedder = init_embedder(ecfg, rng);
    std::vector<double> image(8);
    for (auto& x : image) x = rng.uniform(-1.0, 1.0);

    const std::string query = "the color of the bela is [MASK]";

    SUBCASE("support is exactly the eleven colors") {
        const auto dist = predict_color(params, v, nullptr, query, PredictMode::implicit_);
        CHECK(dist.scores.size() == kColorCount);
        const auto logits = forward_mlm(params, v.encode(query));
        const std::size_t mask_pos = v.encode(query).size() - 1;
        for (std::size_t c = 0; c < kColorCount; ++c)
            CHECK(dist.scores[c] == logits[mask_pos][v.color_ids[c]]);
    }
    SUBCASE("argmax breaks ties toward the lower index") {
        PredictionDistribution d;
        d.scores.fill(0.25);
        CHECK(d.argmax() == Color::black);
        d.scores[3] = 0.5;  // green
        d.scores[7] = 0.5;  // purple, same score
        CHECK(d.argmax() == Color::green);
    }
    SUBCASE("modes dispatch and validate") {
        CHECK_THROWS_AS(
            (void)predict_color(params, v, nullptr, query, PredictMode::explicit_),
            ConfigError);
        CHECK_THROWS_AS((void)predict_color(params, v, &embedder, query, PredictMode::images),
                        ConfigError);
        CHECK_THROWS_AS(
            (void)predict_color(params, v, nullptr, "the wall is blue", PredictMode::implicit_),
            ConfigError);
        CHECK_THROWS_AS((void)predict_color(params, v, nullptr, "[MASK] the [MASK]",
                                            PredictMode::implicit_),
                        ConfigError);

        const auto implicit_dist =
            predict_color(params, v, &embedder, query, PredictMode::implicit_);
        const auto explicit_dist =
            predict_color(params, v, &embedder, query, PredictMode::explicit_);
        const auto images_dist =
            predict_color(params, v, &embedder, query, PredictMode::images, &image);
        bool explicit_differs = false, images_differ = false;
        for (std::size_t c = 0; c < kColorCount; ++c) {
            if (explicit_dist.scores[c] != implicit_dist.scores[c]) explicit_differs = true;
            if (images_dist.scores[c] != explicit_dist.scores[c]) images_differ = true;
        }
        CHECK(explicit_differs);
        CHECK(images_differ);
    }
    SUBCASE("zero projection collapses explicit onto implicit bitwise") {
        MlmParams zeroed = params;
        for (int i = 0; i < cfg.dim * cfg.visual_dim; ++i)
            zeroed.w[zeroed.layout.vis_proj + i] = 0.0;
        const auto a = predict_color(zeroed, v, &embedder, query, PredictMode::implicit_);
        const auto b = predict_color(zeroed, v, &embedder, query, PredictMode::explicit_);
        const auto c = predict_color(zeroed, v, &embedder, query, PredictMode::images, &image);
        for (std::size_t k = 0; k < kColorCount; ++k) {
            CHECK(a.scores[k] == b.scores[k]);
            CHECK(a.scores[k] == c.scores[k]);
        }
    }
    SUBCASE("mode names") {
        CHECK(to_string(PredictMode::implicit_) == "implicit");
        CHECK(to_string(PredictMode::explicit_) == "explicit");
        CHECK(to_string(PredictMode::images) == "images");
        CHECK(parse_predict_mode("implicit") == PredictMode::implicit_);
        CHECK(parse_predict_mode("explicit") == PredictMode::explicit_);
        CHECK(parse_predict_mode("images") == PredictMode::images);
        CHECK_THROWS_AS((void)parse_predict_mode("telepathy"), ConfigError);
    }
}
