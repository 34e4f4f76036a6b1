#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "memcol/dataset.hpp"
#include "memcol/errors.hpp"
#include "memcol/filter.hpp"
#include "memcol/harness.hpp"
#include "memcol/rng.hpp"
#include "memcol/templates.hpp"
#include "memcol/toy/checkpoint.hpp"
#include "memcol/toy/embedder.hpp"
#include "memcol/toy/experiment.hpp"
#include "memcol/toy/predict.hpp"
#include "memcol/toy/world.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::uint64_t default_seed() {
    const char* env = std::getenv("MEMCOLORS_SEED");
    if (!env || !*env) return 1;
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || end == env || *end != '\0')
        throw memcol::ConfigError(std::string("MEMCOLORS_SEED is not an unsigned integer: \"") +
                                  env + "\"");
    return v;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw memcol::ConfigError("cannot read " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw memcol::ConfigError("cannot write " + path);
    return out;
}

void finish_output(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw memcol::ConfigError("failed writing " + path);
}

void emit(const ordered_json& j) { std::cout << j.dump() << '\n'; }

std::vector<memcol::QueryTemplate> resolve_templates(const std::string& spec) {
    if (spec == "model") return memcol::builtin_templates(memcol::Audience::model);
    if (spec == "human") return memcol::builtin_templates(memcol::Audience::human);
    if (!fs::exists(spec))
        throw memcol::ConfigError("templates must be \"model\", \"human\", or a template file: " +
                                  spec);
    return memcol::load_templates_file(spec, memcol::Audience::model);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

// --- aggregate ---------------------------------------------------------------

struct AggregateArgs {
    std::string annotations;
    std::string out;
    int threshold = 8;
};

void run_aggregate(const AggregateArgs& a) {
    std::ifstream in = open_input(a.annotations);
    const auto ann = memcol::load_annotations_with_descriptors(in, a.annotations);
    memcol::AggregationConfig cfg;
    cfg.threshold = a.threshold;
    cfg.annotator_count = static_cast<int>(ann.matrix.annotator_count());
    const memcol::MemoryColorsDataset d = memcol::aggregate_annotations(ann, cfg);
    std::ofstream out = open_output(a.out);
    memcol::save_dataset(d, out);
    finish_output(out, a.out);
    ordered_json j;
    j["items_in"] = ann.matrix.item_count();
    j["items_kept"] = d.size();
    j["threshold"] = a.threshold;
    j["out"] = a.out;
    emit(j);
}

// --- kappa -------------------------------------------------------------------

struct KappaArgs {
    std::string annotations;
};

void run_kappa(const KappaArgs& a) {
    const memcol::AnnotationMatrix m = memcol::load_annotations_file(a.annotations);
    ordered_json j;
    j["kappa"] = memcol::fleiss_kappa(m);
    j["items"] = m.item_count();
    j["annotators"] = m.annotator_count();
    emit(j);
}

// --- baselines ---------------------------------------------------------------

struct BaselinesArgs {
    std::string dataset;
    std::string annotations;
    int trials = 10000;
    std::uint64_t seed = 1;
};

void run_baselines(const BaselinesArgs& a) {
    const memcol::MemoryColorsDataset d = memcol::load_dataset_file(a.dataset);
    ordered_json j;
    j["majority"] = {{"color", std::string(to_string(memcol::majority_color(d)))},
                     {"accuracy", memcol::majority_baseline(d)}};
    const memcol::MeanStd random = memcol::random_baseline(d, a.trials, a.seed);
    j["random"] = {{"mean", random.mean},
                   {"std", random.std},
                   {"trials", a.trials},
                   {"seed", a.seed}};
    if (!a.annotations.empty()) {
        const memcol::AnnotationMatrix m = memcol::load_annotations_file(a.annotations);
        const memcol::MeanStd human = memcol::human_baseline(m, d);
        j["human"] = {{"mean", human.mean}, {"std", human.std}};
    }
    emit(j);
}

// --- filter ------------------------------------------------------------------

struct FilterArgs {
    std::string rules;
    std::string in;
    std::string out;
    std::string stats;
    bool lenient = false;
};

void run_filter(const FilterArgs& a) {
    const memcol::FilterRule rule =
        memcol::make_filter_rule(memcol::load_dataset_file(a.rules));
    std::ifstream in = open_input(a.in);
    std::ofstream out = open_output(a.out);
    memcol::FilterOptions opts;
    opts.strict = !a.lenient;
    const memcol::FilterStats stats = memcol::filter_stream(in, &out, rule, opts, a.in);
    finish_output(out, a.out);
    std::ofstream stats_out = open_output(a.stats);
    stats_out << memcol::stats_to_json_string(stats);
    finish_output(stats_out, a.stats);
    ordered_json j;
    j["captions_in"] = stats.captions_in;
    j["captions_kept"] = stats.captions_kept;
    j["captions_dropped"] = stats.captions_dropped;
    j["drop_rate"] = stats.drop_rate;
    j["out"] = a.out;
    j["stats"] = a.stats;
    emit(j);
}

// --- stats -------------------------------------------------------------------

struct StatsArgs {
    std::string in;
    std::string rules;
    std::string out;
    bool lenient = false;
};

void run_stats(const StatsArgs& a) {
    std::ifstream in = open_input(a.in);
    memcol::FilterOptions opts;
    opts.strict = !a.lenient;
    std::string json;
    if (a.rules.empty()) {
        json = memcol::corpus_stats_to_json_string(memcol::corpus_stats(in, opts, a.in));
    } else {
        const memcol::FilterRule rule =
            memcol::make_filter_rule(memcol::load_dataset_file(a.rules));
        json = memcol::stats_to_json_string(
            memcol::filter_stream(in, nullptr, rule, opts, a.in));
    }
    if (!a.out.empty()) {
        std::ofstream out = open_output(a.out);
        out << json;
        finish_output(out, a.out);
    }
    std::cout << json;
}

// --- gen-world ---------------------------------------------------------------

struct GenWorldArgs {
    int objects = 22;
    int corpus_size = 3000;
    std::uint64_t seed = 1;
    bool reveal_colors = false;
    std::string out;
    std::string dataset;
    std::string eval_images;
};

void run_gen_world(const GenWorldArgs& a) {
    const memcol::toy::SyntheticWorld w =
        memcol::toy::generate_world(a.objects, a.seed, a.reveal_colors);
    memcol::Rng rng(a.seed ^ 0x8000000000000001ULL);
    const auto corpus =
        memcol::toy::sample_corpus(w, static_cast<std::size_t>(a.corpus_size), rng);
    std::ofstream out = open_output(a.out);
    memcol::toy::save_corpus(out, corpus);
    finish_output(out, a.out);

    ordered_json j;
    j["objects"] = a.objects;
    j["corpus"] = corpus.size();
    j["seed"] = a.seed;
    j["reveal_colors"] = a.reveal_colors;
    j["out"] = a.out;
    if (!a.dataset.empty()) {
        std::ofstream d = open_output(a.dataset);
        memcol::save_dataset(memcol::toy::world_dataset(w), d);
        finish_output(d, a.dataset);
        j["dataset"] = a.dataset;
    }
    if (!a.eval_images.empty()) {
        memcol::Rng image_rng(a.seed ^ 0x51e5ed5ba1e5ce55ULL);
        std::ofstream f = open_output(a.eval_images);
        for (std::size_t i = 0; i < w.objects.size(); ++i) {
            ordered_json line;
            line["item"] = i + 1;
            line["name"] = w.objects[i].name;
            line["feature"] =
                w.image_feature(static_cast<int>(i), w.objects[i].color, image_rng);
            f << line.dump() << '\n';
        }
        finish_output(f, a.eval_images);
        j["eval_images"] = a.eval_images;
    }
    emit(j);
}

// --- train-toy ---------------------------------------------------------------

struct TrainToyArgs {
    std::string corpus;
    std::string out;
    std::string dataset;
    bool text_only = false;
    int steps = 1200;
    int dim = 64;
    int layers = 2;
    int heads = 4;
    int embedder_steps = 400;
    std::uint64_t seed = 1;
};

void run_train_toy(const TrainToyArgs& a) {
    std::ifstream in = open_input(a.corpus);
    const auto corpus = memcol::toy::load_corpus(in, a.corpus);
    if (corpus.empty()) throw memcol::ConfigError("corpus is empty: " + a.corpus);
    const int feature_dim = static_cast<int>(corpus.front().image_feature.size());

    std::vector<std::string> words;
    for (const auto& ex : corpus)
        for (const std::string& t : memcol::tokenize(ex.caption)) words.push_back(t);
    if (!a.dataset.empty()) {
        const auto d = memcol::load_dataset_file(a.dataset);
        const auto query_words = memcol::toy::query_vocabulary(
            d, memcol::builtin_templates(memcol::Audience::model));
        words.insert(words.end(), query_words.begin(), query_words.end());
    }
    const memcol::toy::ToyVocab vocab = memcol::toy::make_toy_vocab(words);

    std::vector<memcol::toy::ToyExample> pairs;
    pairs.reserve(corpus.size());
    for (const auto& ex : corpus) pairs.push_back({vocab.encode(ex.caption), ex.image_feature});

    memcol::toy::MlmConfig mcfg;
    mcfg.vocab = vocab.size();
    mcfg.dim = a.dim;
    mcfg.visual_dim = feature_dim;
    mcfg.layers = a.layers;
    mcfg.heads = a.heads;
    mcfg.steps = a.steps;
    mcfg.seed = a.seed;

    memcol::toy::ToyCheckpoint ckpt;
    ckpt.vocab = vocab;
    memcol::toy::TrainResult result;
    if (a.text_only) {
        std::vector<memcol::toy::ToyExample> texts;
        texts.reserve(pairs.size());
        for (const auto& p : pairs) texts.push_back({p.tokens, {}});
        result = memcol::toy::train_mlm(texts, mcfg, vocab, /*use_visual=*/false);
    } else {
        memcol::toy::EmbedderConfig ecfg;
        ecfg.vocab = vocab.size();
        ecfg.dim = feature_dim;
        ecfg.steps = a.embedder_steps;
        ecfg.seed = a.seed;
        const memcol::toy::JointEmbedder embedder =
            memcol::toy::train_joint_embedder(pairs, ecfg, vocab);
        std::vector<memcol::toy::ToyExample> mixed;
        mixed.reserve(2 * pairs.size());
        for (const auto& p : pairs) {
            mixed.push_back({p.tokens, memcol::toy::encode_image(embedder, p.visual)});
            mixed.push_back({p.tokens, {}});
        }
        result = memcol::toy::train_mlm(mixed, mcfg, vocab, /*use_visual=*/true);
        ckpt.embedder = embedder;
    }
    ckpt.params = result.params;
    memcol::toy::save_checkpoint(a.out, ckpt);

    ordered_json j;
    j["out"] = a.out;
    j["vocab"] = vocab.size();
    j["captions"] = corpus.size();
    j["text_only"] = a.text_only;
    j["initial_heldout_loss"] = result.initial_heldout_loss;
    j["final_heldout_loss"] = result.final_heldout_loss;
    emit(j);
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
    std::string backend;
    std::string templates = "model";
    std::string dataset;
    std::string mode = "implicit";
    std::string images;
    std::string out;
};

std::map<int, std::vector<double>> load_eval_images(const std::string& path) {
    std::ifstream in = open_input(path);
    std::map<int, std::vector<double>> features;
    std::string line;
    std::size_t lineno = 0;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw memcol::FormatError(where + ": invalid JSON: " + std::string(e.what()));
        }
        if (!j.is_object() || !j.contains("item") || !j.contains("feature"))
            throw memcol::FormatError(where + ": expected {\"item\", \"feature\"}");
        for (const auto& [k, v] : j.items())
            if (k != "item" && k != "name" && k != "feature")
                throw memcol::FormatError(where + ": unexpected key \"" + k + "\"");
        if (!j["item"].is_number_integer() || j["item"].get<int>() < 1)
            throw memcol::FormatError(where + ": item must be a positive integer");
        const int item = j["item"].get<int>();
        if (features.count(item) > 0)
            throw memcol::FormatError(where + ": duplicate item " + std::to_string(item));
        if (!j["feature"].is_array() || j["feature"].empty())
            throw memcol::FormatError(where + ": feature must be a non-empty array");
        std::vector<double> feature;
        for (const auto& v : j["feature"]) {
            if (!v.is_number())
                throw memcol::FormatError(where + ": feature entries must be numbers");
            feature.push_back(v.get<double>());
        }
        if (dim == 0) dim = feature.size();
        if (feature.size() != dim)
            throw memcol::FormatError(where + ": inconsistent feature dimension");
        features.emplace(item, std::move(feature));
    }
    if (features.empty()) throw memcol::FormatError(path + ": no image features");
    return features;
}

void run_eval(const EvalArgs& a) {
    static const std::set<std::string> kModes = {"implicit", "explicit", "images"};
    if (kModes.count(a.mode) == 0)
        throw memcol::ConfigError("mode must be implicit, explicit, or images");

    const memcol::MemoryColorsDataset dataset = memcol::load_dataset_file(a.dataset);
    const auto templates = resolve_templates(a.templates);
    const std::vector<memcol::ClozeQuery> queries = memcol::render_all(templates, dataset);

    std::map<int, std::vector<double>> images;
    if (!a.images.empty()) images = load_eval_images(a.images);

    std::map<std::string, std::string> config = {
        {"dataset", a.dataset}, {"templates", a.templates}, {"mode", a.mode}};
    if (!a.images.empty()) config["images"] = a.images;

    memcol::Backend backend;
    std::map<std::string, memcol::ColorScores> responses;
    memcol::toy::ToyCheckpoint ckpt;

    if (a.backend.rfind("toy:", 0) == 0) {
        const std::string path = a.backend.substr(4);
        ckpt = memcol::toy::load_checkpoint(path);
        const memcol::toy::PredictMode mode = memcol::toy::parse_predict_mode(a.mode);
        const memcol::toy::JointEmbedder* embedder =
            ckpt.embedder ? &*ckpt.embedder : nullptr;
        if (mode != memcol::toy::PredictMode::implicit_ && embedder == nullptr)
            throw memcol::ConfigError(
                a.mode + " mode needs a checkpoint with an embedder (trained without "
                "--text-only)");
        if (mode == memcol::toy::PredictMode::images) {
            if (images.empty())
                throw memcol::ConfigError("images mode with a toy backend needs --images");
            for (const auto& item : dataset.items)
                if (images.count(item.index) == 0)
                    throw memcol::ConfigError("--images has no feature for item " +
                                              std::to_string(item.index));
        }
        backend = [&ckpt, embedder, mode, &images](const memcol::ClozeQuery& q) {
            const std::vector<double>* image = nullptr;
            if (mode == memcol::toy::PredictMode::images) image = &images.at(q.item_index);
            const memcol::toy::PredictionDistribution dist = memcol::toy::predict_color(
                ckpt.params, ckpt.vocab, embedder, q.text, mode, image);
            memcol::ColorScores s;
            s.scores = dist.scores;
            return s;
        };
    } else if (a.backend.rfind("adapter:", 0) == 0 ||
               a.backend.rfind("adapter-files:", 0) == 0) {
        std::vector<memcol::AdapterRequest> requests;
        requests.reserve(queries.size());
        std::map<int, std::string> image_refs;
        for (const auto& item : dataset.items)
            if (!item.image_ref.empty()) image_refs[item.index] = item.image_ref;
        for (const auto& q : queries) {
            memcol::AdapterRequest r = memcol::adapter_request(q, a.mode);
            const auto ref = image_refs.find(q.item_index);
            if (ref != image_refs.end()) r.image_ref = ref->second;
            const auto feature = images.find(q.item_index);
            if (feature != images.end()) r.visual_feature = feature->second;
            requests.push_back(std::move(r));
        }
        if (a.backend.rfind("adapter:", 0) == 0) {
            responses = memcol::run_adapter_command(a.backend.substr(8), requests);
        } else {
            const fs::path dir = a.backend.substr(14);
            fs::create_directories(dir);
            const fs::path req_path = dir / "requests.jsonl";
            const fs::path resp_path = dir / "responses.jsonl";
            memcol::write_adapter_requests_file(req_path.string(), requests);
            if (!fs::exists(resp_path))
                throw memcol::ConfigError("wrote " + std::to_string(requests.size()) +
                                          " requests to " + req_path.string() +
                                          "; produce " + resp_path.string() + " and rerun");
            responses = memcol::read_adapter_responses_file(resp_path.string(), requests);
        }
        backend = [&responses](const memcol::ClozeQuery& q) { return responses.at(q.id()); };
    } else {
        throw memcol::ConfigError(
            "backend must be toy:CHECKPOINT, adapter:COMMAND, or adapter-files:DIR");
    }

    const memcol::EvalReport report = memcol::evaluate(backend, queries, a.backend, config);
    memcol::save_report_file(report, a.out);

    ordered_json j;
    j["backend"] = a.backend;
    j["templates"] = report.per_template.size();
    j["queries"] = report.per_item.size();
    j["mean"] = report.mean;
    j["std"] = report.std;
    j["out"] = a.out;
    emit(j);
}

// --- report ------------------------------------------------------------------

struct ReportArgs {
    std::string in;
};

void run_report(const ReportArgs& a) {
    const memcol::EvalReport r = memcol::load_report_file(a.in);
    std::cout << "backend: " << r.backend << '\n';
    for (const auto& [k, v] : r.config) std::cout << "config." << k << ": " << v << '\n';
    std::cout << "templates: " << r.per_template.size() << '\n';
    std::cout << "queries: " << r.per_item.size() << '\n';
    char line[128];
    std::snprintf(line, sizeof line, "mean: %.6f +/- %.6f\n", r.mean, r.std);
    std::cout << line;
    for (const auto& [tid, acc] : r.per_template) {
        std::snprintf(line, sizeof line, "t%d: %.6f\n", tid, acc);
        std::cout << line;
    }
}

// --- annotate ------------------------------------------------------------------

struct AnnotateArgs {
    std::string dataset;
    std::string templates = "human";
    std::string out;
    std::string instructions;
    std::string annotator = "annotator";
    std::uint64_t seed = 1;
    bool seed_given = false;
    bool allow_pipe = false;
};

struct ResumeState {
    std::optional<std::uint64_t> seed;
    std::string annotator;
    std::map<std::string, memcol::Color> answered;
};

ResumeState read_partial_annotations(const std::string& path) {
    ResumeState state;
    std::ifstream in = open_input(path);
    std::string line;
    bool header_seen = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string where = path + ":" + std::to_string(lineno);
        if (line.rfind("# seed=", 0) == 0) {
            state.seed = std::strtoull(line.c_str() + 7, nullptr, 10);
            continue;
        }
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!header_seen) {
            if (cells.size() < 3 || cells[0] != "item" || cells[1] != "descriptor")
                throw memcol::ParseError(where +
                                         ": expected header item,descriptor,<annotator>");
            state.annotator = cells[2];
            header_seen = true;
            continue;
        }
        if (cells.size() != 3)
            throw memcol::ParseError(where + ": expected item,descriptor,color");
        state.answered[cells[0]] = memcol::parse_color(cells[2]);
    }
    if (!header_seen) throw memcol::ParseError(path + ": missing header row");
    return state;
}

void run_annotate(const AnnotateArgs& a) {
    if (!a.allow_pipe && isatty(STDIN_FILENO) == 0)
        throw memcol::ConfigError(
            "annotate reads answers interactively; pass --allow-pipe to feed them from a pipe");

    const memcol::MemoryColorsDataset dataset = memcol::load_dataset_file(a.dataset);
    const auto templates = resolve_templates(a.templates);

    std::string instructions_path = a.instructions;
    if (instructions_path.empty())
        instructions_path =
            (fs::path(a.dataset).parent_path() / "annotator-instructions.txt").string();
    std::ifstream instructions = open_input(instructions_path);
    std::cout << instructions.rdbuf() << '\n';

    std::uint64_t seed = a.seed;
    std::string annotator = a.annotator;
    std::map<std::string, memcol::Color> answered;
    const bool resuming = fs::exists(a.out);
    if (resuming) {
        ResumeState state = read_partial_annotations(a.out);
        if (state.seed) seed = *state.seed;
        if (!state.annotator.empty()) annotator = state.annotator;
        answered = std::move(state.answered);
        for (const auto& [item, color] : answered) {
            bool known = false;
            for (const auto& it : dataset.items) known = known || it.item == item;
            if (!known)
                throw memcol::ConfigError(a.out + ": answered item \"" + item +
                                          "\" is not in the dataset");
        }
    } else if (a.seed_given) {
        seed = a.seed;
    } else {
        seed = default_seed();
    }

    // The whole session plan is a pure function of the seed, so a resumed
    // run asks the remaining questions in the original order.
    memcol::Rng rng(seed);
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<std::size_t> template_pick(dataset.size());
    for (std::size_t i = 0; i < template_pick.size(); ++i)
        template_pick[i] = rng.below(templates.size());

    std::ofstream out;
    if (resuming) {
        out.open(a.out, std::ios::app);
        if (!out) throw memcol::ConfigError("cannot append to " + a.out);
    } else {
        out = open_output(a.out);
        out << "# seed=" << seed << '\n';
        out << "item,descriptor," << csv_field(annotator) << '\n';
        out.flush();
    }

    std::size_t asked = answered.size();
    const std::size_t total = dataset.size();
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const memcol::MemoryColorItem& item = dataset.items[order[pos]];
        if (answered.count(item.item) > 0) continue;
        const memcol::ClozeQuery q = memcol::render(templates[template_pick[pos]], item);
        std::cout << "[" << (asked + 1) << "/" << total << "] " << q.text << '\n';

        std::optional<memcol::Color> answer;
        while (!answer) {
            std::cout << "> " << std::flush;
            std::string line;
            if (!std::getline(std::cin, line)) {
                std::cout << '\n';
                throw memcol::ConfigError("annotation incomplete (" + std::to_string(asked) +
                                          " of " + std::to_string(total) +
                                          " answered); rerun to resume");
            }
            std::string word;
            for (char c : line)
                if (!std::isspace(static_cast<unsigned char>(c)))
                    word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            const auto color = memcol::try_parse_color(word);
            if (!color) {
                std::cout << "answer with one of:";
                for (const auto& name : memcol::kColorNames) std::cout << ' ' << name;
                std::cout << '\n';
                continue;
            }
            answer = color;
        }
        out << csv_field(item.item) << ',' << csv_field(item.descriptor) << ','
            << to_string(*answer) << '\n';
        out.flush();
        if (!out) throw memcol::ConfigError("failed writing " + a.out);
        answered[item.item] = *answer;
        ++asked;
    }

    ordered_json j;
    j["items"] = total;
    j["annotator"] = annotator;
    j["seed"] = seed;
    j["out"] = a.out;
    emit(j);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Memory colors workbench: dataset, filtering, toy models, evaluation"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file; one section per subcommand, flags win");

    auto aggregate = std::make_shared<AggregateArgs>();
    CLI::App* agg = app.add_subcommand("aggregate", "Majority-vote annotations into a dataset");
    agg->add_option("--annotations", aggregate->annotations, "Annotation matrix CSV")
        ->required()
        ->check(CLI::ExistingFile);
    agg->add_option("--out", aggregate->out, "Output dataset CSV")->required();
    agg->add_option("--threshold", aggregate->threshold, "Minimum top-vote count to keep an item")
        ->capture_default_str();
    agg->callback([aggregate] { run_aggregate(*aggregate); });

    auto kappa = std::make_shared<KappaArgs>();
    CLI::App* kap = app.add_subcommand("kappa", "Fleiss' kappa of an annotation matrix");
    kap->add_option("--annotations", kappa->annotations, "Annotation matrix CSV")
        ->required()
        ->check(CLI::ExistingFile);
    kap->callback([kappa] { run_kappa(*kappa); });

    auto baselines = std::make_shared<BaselinesArgs>();
    CLI::App* base = app.add_subcommand("baselines", "Majority, random, and human baselines");
    base->add_option("--dataset", baselines->dataset, "Dataset CSV")
        ->required()
        ->check(CLI::ExistingFile);
    base->add_option("--annotations", baselines->annotations,
                     "Annotation matrix CSV for the human baseline")
        ->check(CLI::ExistingFile);
    base->add_option("--trials", baselines->trials, "Random-guess trials")
        ->capture_default_str();
    auto* base_seed = base->add_option("--seed", baselines->seed,
                                       "Random seed (default MEMCOLORS_SEED, else 1)");
    base->callback([baselines, base_seed] {
        if (base_seed->count() == 0) baselines->seed = default_seed();
        run_baselines(*baselines);
    });

    auto filter = std::make_shared<FilterArgs>();
    CLI::App* fil = app.add_subcommand("filter", "Drop captions that reveal memory colors");
    fil->add_option("--rules", filter->rules, "Dataset CSV supplying items and colors")
        ->required()
        ->check(CLI::ExistingFile);
    fil->add_option("--in", filter->in, "Input corpus JSONL")->required()->check(CLI::ExistingFile);
    fil->add_option("--out", filter->out, "Output JSONL of kept captions")->required();
    fil->add_option("--stats", filter->stats, "Output stats JSON")->required();
    fil->add_flag("--strict", "Abort on malformed records (the default)");
    fil->add_flag("--lenient", filter->lenient, "Skip malformed records and count them")
        ->excludes("--strict");
    fil->callback([filter] { run_filter(*filter); });

    auto stats = std::make_shared<StatsArgs>();
    CLI::App* sta = app.add_subcommand("stats", "Corpus statistics, optionally against rules");
    sta->add_option("--in", stats->in, "Input corpus JSONL")->required()->check(CLI::ExistingFile);
    sta->add_option("--rules", stats->rules, "Dataset CSV; adds would-be filter outcomes")
        ->check(CLI::ExistingFile);
    sta->add_option("--out", stats->out, "Also write the JSON to this file");
    sta->add_flag("--lenient", stats->lenient, "Skip malformed records and count them");
    sta->callback([stats] { run_stats(*stats); });

    auto gen = std::make_shared<GenWorldArgs>();
    CLI::App* gw = app.add_subcommand("gen-world", "Generate a synthetic caption corpus");
    gw->add_option("--objects", gen->objects, "Canonical objects in the world")
        ->capture_default_str();
    gw->add_option("--corpus-size", gen->corpus_size, "Captions to sample")
        ->capture_default_str();
    auto* gw_seed =
        gw->add_option("--seed", gen->seed, "Random seed (default MEMCOLORS_SEED, else 1)");
    gw->add_flag("--reveal-colors", gen->reveal_colors,
                 "Let captions state canonical object colors");
    gw->add_option("--out", gen->out, "Output corpus JSONL")->required();
    gw->add_option("--dataset", gen->dataset, "Also write the canonical objects as dataset CSV");
    gw->add_option("--eval-images", gen->eval_images,
                   "Also write one fresh image feature per object (JSONL)");
    gw->callback([gen, gw_seed] {
        if (gw_seed->count() == 0) gen->seed = default_seed();
        run_gen_world(*gen);
    });

    auto train = std::make_shared<TrainToyArgs>();
    CLI::App* tt = app.add_subcommand("train-toy", "Train the toy models on a corpus");
    tt->add_option("--corpus", train->corpus, "Corpus JSONL from gen-world")
        ->required()
        ->check(CLI::ExistingFile);
    tt->add_option("--out", train->out, "Output checkpoint path")->required();
    tt->add_option("--dataset", train->dataset,
                   "Dataset CSV whose rendered queries the vocabulary must cover")
        ->check(CLI::ExistingFile);
    tt->add_flag("--text-only", train->text_only,
                 "Train on captions alone, without the visual pathway");
    tt->add_option("--steps", train->steps, "Optimizer steps")->capture_default_str();
    tt->add_option("--dim", train->dim, "Model width")->capture_default_str();
    tt->add_option("--layers", train->layers, "Transformer layers")->capture_default_str();
    tt->add_option("--heads", train->heads, "Attention heads")->capture_default_str();
    tt->add_option("--embedder-steps", train->embedder_steps, "Contrastive embedder steps")
        ->capture_default_str();
    auto* tt_seed =
        tt->add_option("--seed", train->seed, "Random seed (default MEMCOLORS_SEED, else 1)");
    tt->callback([train, tt_seed] {
        if (tt_seed->count() == 0) train->seed = default_seed();
        run_train_toy(*train);
    });

    auto eval_args = std::make_shared<EvalArgs>();
    CLI::App* ev = app.add_subcommand("eval", "Evaluate a backend on cloze queries");
    ev->add_option("--backend", eval_args->backend,
                   "toy:CHECKPOINT, adapter:COMMAND, or adapter-files:DIR")
        ->required();
    ev->add_option("--templates", eval_args->templates, "model, human, or a template file")
        ->capture_default_str();
    ev->add_option("--dataset", eval_args->dataset, "Dataset CSV")
        ->required()
        ->check(CLI::ExistingFile);
    ev->add_option("--mode", eval_args->mode, "implicit, explicit, or images")
        ->capture_default_str();
    ev->add_option("--images", eval_args->images, "Per-item image features JSONL")
        ->check(CLI::ExistingFile);
    ev->add_option("--out", eval_args->out, "Output report JSON")->required();
    ev->callback([eval_args] { run_eval(*eval_args); });

    auto report = std::make_shared<ReportArgs>();
    CLI::App* rep = app.add_subcommand("report", "Validate and summarize a report file");
    rep->add_option("--in", report->in, "Report JSON")->required()->check(CLI::ExistingFile);
    rep->callback([report] { run_report(*report); });

    auto annotate = std::make_shared<AnnotateArgs>();
    CLI::App* ann = app.add_subcommand("annotate", "Collect one annotator's color answers");
    ann->add_option("--dataset", annotate->dataset, "Dataset CSV with the items to annotate")
        ->required()
        ->check(CLI::ExistingFile);
    ann->add_option("--templates", annotate->templates, "model, human, or a template file")
        ->capture_default_str();
    ann->add_option("--out", annotate->out, "Annotation CSV to write or resume")->required();
    ann->add_option("--instructions", annotate->instructions,
                    "Instructions file (default: annotator-instructions.txt next to the dataset)")
        ->check(CLI::ExistingFile);
    ann->add_option("--annotator", annotate->annotator, "Annotator column name")
        ->capture_default_str();
    auto* ann_seed = ann->add_option("--seed", annotate->seed,
                                     "Shuffle seed (default MEMCOLORS_SEED, else 1)");
    ann->add_flag("--allow-pipe", annotate->allow_pipe, "Accept answers from non-interactive stdin");
    ann->callback([annotate, ann_seed] {
        annotate->seed_given = ann_seed->count() > 0;
        run_annotate(*annotate);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const memcol::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
