#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "memcol/color.hpp"
#include "memcol/dataset.hpp"
#include "memcol/rng.hpp"

namespace memcol::toy {

// An object whose color is a fixed fact of the world.
struct WorldObject {
    std::string name;
    Color color = Color::black;
};

struct CaptionGrammar {
    double p_canonical = 0.5;      // caption is about a canonical object
    double p_reveal = 0.0;         // canonical caption states the object's color
    double p_generic_color = 0.6;  // generic caption states the sighting's color
    double p_generic_common = 0.5; // a generic sighting has its usual color
};

// A micro-world for controlled modality experiments. Canonical objects have
// one fixed color each; generic objects (walls, doors, ...) vary per sighting
// around a usual color, so captions may state generic colors without leaking
// any canonical fact. Every caption is paired with an image feature that
// encodes the depicted shape and color plus bounded noise.
struct SyntheticWorld {
    std::vector<WorldObject> objects;
    std::vector<std::string> generic_objects;
    std::vector<Color> generic_common_colors;  // per-generic usual color
    std::vector<std::string> filler_words;
    CaptionGrammar grammar;
    int feature_dim = 32;
    double noise_scale = 0.25;
    bool reveal_colors = false;
    std::uint64_t seed = 0;
    std::vector<double> shape_features;  // (objects + generics) x feature_dim
    std::vector<double> color_features;  // kColorCount x feature_dim

    int shape_count() const {
        return static_cast<int>(objects.size() + generic_objects.size());
    }
    // Words a corpus drawn from this world can contain, colors excluded.
    std::vector<std::string> vocabulary_words() const;
    std::vector<double> image_feature(int shape_index, Color c, Rng& rng) const;
};

// Deterministic for a given (n_objects, seed, reveal_colors). Object names
// are generated consonant-vowel syllable words that never contain a color
// word; colors are assigned round-robin. Throws ConfigError for n_objects < 2.
SyntheticWorld generate_world(int n_objects, std::uint64_t seed, bool reveal_colors);

// The canonical objects as a dataset, usable for building filter rules and
// cloze queries against this world.
MemoryColorsDataset world_dataset(const SyntheticWorld& w);

struct WorldExample {
    std::string caption;
    std::vector<double> image_feature;
    int object_index = -1;  // canonical object the caption is about, or -1
    bool reveals = false;   // caption states a canonical object's color
};

WorldExample sample_example(const SyntheticWorld& w, Rng& rng);
std::vector<WorldExample> sample_corpus(const SyntheticWorld& w, std::size_t n, Rng& rng);

// JSONL: {"caption": str, "image_feature": [numbers]} per line. Loading
// enforces a consistent feature dimension and throws FormatError otherwise.
void save_corpus(std::ostream& out, const std::vector<WorldExample>& corpus);
std::vector<WorldExample> load_corpus(std::istream& in,
                                      const std::string& source_name = "<corpus>");

}  // namespace memcol::toy
