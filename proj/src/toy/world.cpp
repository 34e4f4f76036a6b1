#include "memcol/toy/world.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include "json.hpp"
#include "memcol/errors.hpp"
#include "memcol/porter.hpp"

namespace memcol::toy {

namespace {

const std::vector<std::string> kGenericObjects = {"wall",  "door",  "box",   "cup",   "floor",
                                                  "sign",  "fence", "roof",  "chair", "table"};
const std::vector<std::string> kFillerWords = {"a",   "the",   "near", "on",  "there", "was",
                                               "photo", "of",  "and",  "is",  "by",    "color"};

bool contains_any_color(const std::string& name) {
    for (std::size_t c = 0; c < kColorCount; ++c) {
        if (name.find(kColorNames[c]) != std::string::npos) return true;
        if (name.find(porter_stem(kColorNames[c])) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

std::vector<std::string> SyntheticWorld::vocabulary_words() const {
    std::vector<std::string> words;
    for (const auto& o : objects) words.push_back(o.name);
    words.insert(words.end(), generic_objects.begin(), generic_objects.end());
    words.insert(words.end(), filler_words.begin(), filler_words.end());
    return words;
}

std::vector<double> SyntheticWorld::image_feature(int shape_index, Color c, Rng& rng) const {
    if (shape_index < 0 || shape_index >= shape_count())
        throw ConfigError("shape index out of range: " + std::to_string(shape_index));
    std::vector<double> f(feature_dim);
    const std::size_t s = static_cast<std::size_t>(shape_index) * feature_dim;
    const std::size_t k = static_cast<std::size_t>(c) * feature_dim;
    for (int d = 0; d < feature_dim; ++d)
        f[d] = shape_features[s + d] + color_features[k + d] +
               noise_scale * rng.uniform(-1.0, 1.0);
    return f;
}

SyntheticWorld generate_world(int n_objects, std::uint64_t seed, bool reveal_colors) {
    if (n_objects < 2) throw ConfigError("a world needs at least 2 objects");
    SyntheticWorld w;
    w.seed = seed;
    w.reveal_colors = reveal_colors;
    w.generic_objects = kGenericObjects;
    w.filler_words = kFillerWords;
    w.grammar.p_reveal = reveal_colors ? 0.5 : 0.0;

    Rng rng(seed);
    std::set<std::string> taken(kGenericObjects.begin(), kGenericObjects.end());
    taken.insert(kFillerWords.begin(), kFillerWords.end());
    static const std::string cons = "bdfgklmnprstvz";
    static const std::string vows = "aeiou";
    int attempts = 0;
    while (static_cast<int>(w.objects.size()) < n_objects) {
        if (++attempts > 200000)
            throw ConfigError("object name space exhausted for n_objects = " +
                              std::to_string(n_objects));
        std::string name;
        for (int i = 0; i < 2; ++i) {
            name += cons[rng.below(cons.size())];
            name += vows[rng.below(vows.size())];
        }
        if (taken.count(name) > 0 || contains_any_color(name)) continue;
        taken.insert(name);
        const Color c = static_cast<Color>(w.objects.size() % kColorCount);
        w.objects.push_back({name, c});
    }

    for (std::size_t g = 0; g < w.generic_objects.size(); ++g)
        w.generic_common_colors.push_back(static_cast<Color>(rng.below(kColorCount)));

    const int shapes = w.shape_count();
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.feature_dim));
    w.shape_features.resize(static_cast<std::size_t>(shapes) * w.feature_dim);
    for (auto& x : w.shape_features) x = rng.normal() * scale;
    w.color_features.resize(kColorCount * static_cast<std::size_t>(w.feature_dim));
    for (auto& x : w.color_features) x = rng.normal() * scale;
    return w;
}

MemoryColorsDataset world_dataset(const SyntheticWorld& w) {
    MemoryColorsDataset d;
    int index = 1;
    for (const auto& o : w.objects) d.items.push_back({index++, "the", o.name, o.color, ""});
    return d;
}

WorldExample sample_example(const SyntheticWorld& w, Rng& rng) {
    WorldExample ex;
    const auto& g = w.grammar;
    const auto& gen = w.generic_objects;
    const bool canonical = !w.objects.empty() && rng.real() < g.p_canonical;
    if (canonical) {
        const int oi = static_cast<int>(rng.below(w.objects.size()));
        const auto& obj = w.objects[oi];
        ex.object_index = oi;
        const bool reveal = w.reveal_colors && rng.real() < g.p_reveal;
        ex.reveals = reveal;
        if (reveal) {
            const std::string color(to_string(obj.color));
            switch (rng.below(3)) {
                case 0: ex.caption = "the " + obj.name + " is " + color; break;
                case 1: ex.caption = "a " + color + " " + obj.name; break;
                default:
                    ex.caption = "the color of the " + obj.name + " is " + color;
                    break;
            }
        } else {
            const std::string& other = gen[rng.below(gen.size())];
            switch (rng.below(5)) {
                case 0: ex.caption = "a " + obj.name + " near the " + other; break;
                case 1: ex.caption = "the " + obj.name + " on the " + other; break;
                case 2: ex.caption = "there was a " + obj.name; break;
                case 3: ex.caption = "a photo of the " + obj.name; break;
                default: ex.caption = "the " + obj.name + " and the " + other; break;
            }
        }
        ex.image_feature = w.image_feature(oi, obj.color, rng);
    } else {
        const int gi = static_cast<int>(rng.below(gen.size()));
        const std::string& name = gen[gi];
        const bool usual = gi < static_cast<int>(w.generic_common_colors.size()) &&
                           rng.real() < g.p_generic_common;
        const Color c = usual ? w.generic_common_colors[gi]
                              : static_cast<Color>(rng.below(kColorCount));
        const bool stated = rng.real() < g.p_generic_color;
        if (stated) {
            const std::string color(to_string(c));
            switch (rng.below(3)) {
                case 0: ex.caption = "the " + name + " is " + color; break;
                case 1: ex.caption = "a " + color + " " + name; break;
                default: ex.caption = "the color of the " + name + " is " + color; break;
            }
        } else {
            const std::string& other = gen[rng.below(gen.size())];
            if (rng.below(2) == 0)
                ex.caption = "a " + name + " near the " + other;
            else
                ex.caption = "the " + name + " by the " + other;
        }
        ex.image_feature =
            w.image_feature(static_cast<int>(w.objects.size()) + gi, c, rng);
    }
    return ex;
}

std::vector<WorldExample> sample_corpus(const SyntheticWorld& w, std::size_t n, Rng& rng) {
    std::vector<WorldExample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample_example(w, rng));
    return out;
}

void save_corpus(std::ostream& out, const std::vector<WorldExample>& corpus) {
    for (const auto& ex : corpus) {
        nlohmann::ordered_json j;
        j["caption"] = ex.caption;
        j["image_feature"] = ex.image_feature;
        out << j.dump() << '\n';
    }
}

std::vector<WorldExample> load_corpus(std::istream& in, const std::string& source_name) {
    std::vector<WorldExample> out;
    std::string line;
    std::size_t lineno = 0;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const std::string where = source_name + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(where + ": invalid JSON: " + e.what());
        }
        if (!j.is_object() || !j.contains("caption") || !j["caption"].is_string() ||
            !j.contains("image_feature") || !j["image_feature"].is_array())
            throw FormatError(where + ": expected {\"caption\", \"image_feature\"}");
        WorldExample ex;
        ex.caption = j["caption"].get<std::string>();
        if (ex.caption.empty()) throw FormatError(where + ": empty caption");
        for (const auto& v : j["image_feature"]) {
            if (!v.is_number()) throw FormatError(where + ": image_feature must be numeric");
            ex.image_feature.push_back(v.get<double>());
        }
        if (ex.image_feature.empty()) throw FormatError(where + ": empty image_feature");
        if (dim == 0) dim = ex.image_feature.size();
        if (ex.image_feature.size() != dim)
            throw FormatError(where + ": inconsistent feature dimension");
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace memcol::toy
