#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "memcol/color.hpp"

namespace memcol {

// One benchmark entry: "a lemon is yellow" style fact with an optional
// image reference (opaque identifier, never dereferenced here).
struct MemoryColorItem {
    int index = 0;            // positive, unique within a dataset
    std::string descriptor;   // may be empty ("", "a", "the animal", ...)
    std::string item;         // lowercase, trimmed, non-empty; may be multi-word
    Color color = Color::black;
    std::string image_ref;    // optional opaque id, empty when absent
};

struct MemoryColorsDataset {
    std::vector<MemoryColorItem> items;

    std::size_t size() const { return items.size(); }
};

// Raw annotator responses: complete items x annotators grid.
// responses[i * annotators.size() + a] is annotator a's color for item i.
struct AnnotationMatrix {
    std::vector<std::string> items;
    std::vector<std::string> annotators;
    std::vector<Color> responses;

    std::size_t item_count() const { return items.size(); }
    std::size_t annotator_count() const { return annotators.size(); }
    Color response(std::size_t item, std::size_t annotator) const {
        return responses[item * annotators.size() + annotator];
    }
};

struct AggregationConfig {
    int threshold = 8;        // minimum top-vote count for an item to be kept
    int annotator_count = 11;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;         // sample standard deviation (n-1) throughout
};

// Mean and sample standard deviation; std is 0 for fewer than two values.
MeanStd mean_std(const std::vector<double>& xs);

// --- dataset IO ------------------------------------------------------------

// Parses CSV with header index,descriptor,item,color[,image_ref].
// Rejects unknown colors, duplicate or non-positive indices, empty items.
MemoryColorsDataset load_dataset(std::istream& in, const std::string& source_name = "<stream>");
MemoryColorsDataset load_dataset_file(const std::string& path);
void save_dataset(const MemoryColorsDataset& d, std::ostream& out);

// Wide CSV: header "item[,descriptor],<annotator ids...>", one row per item,
// every cell filled with one of the 11 colors.
AnnotationMatrix load_annotations(std::istream& in, const std::string& source_name = "<stream>");
AnnotationMatrix load_annotations_file(const std::string& path);

// Optional per-item descriptors carried alongside an annotation file
// (populated when the CSV has a "descriptor" column, empty strings otherwise).
struct AnnotationsWithDescriptors {
    AnnotationMatrix matrix;
    std::vector<std::string> descriptors;
};
AnnotationsWithDescriptors load_annotations_with_descriptors(std::istream& in,
                                                             const std::string& source_name = "<stream>");

// --- aggregation and agreement ---------------------------------------------

// Majority-vote labels; items whose top count < cfg.threshold are dropped.
// Throws ConfigError when the threshold admits ties (below strict majority).
MemoryColorsDataset aggregate_annotations(const AnnotationMatrix& a, const AggregationConfig& cfg);
MemoryColorsDataset aggregate_annotations(const AnnotationsWithDescriptors& a, const AggregationConfig& cfg);

// Histogram top-vote-count -> number of items, over items whose top count
// is >= min_count (0 keeps every item).
std::map<int, int> vote_histogram(const AnnotationMatrix& a, int min_count = 0);

// Fleiss' kappa over the complete matrix. Returns exactly 1.0 for perfect
// agreement even when the chance-agreement denominator vanishes.
double fleiss_kappa(const AnnotationMatrix& a);

// --- baselines ---------------------------------------------------------------

// Per-annotator accuracy against the dataset's labels, then mean/sample-std
// across annotators. Every dataset item must appear in the matrix.
MeanStd human_baseline(const AnnotationMatrix& a, const MemoryColorsDataset& d);

// Accuracy of always predicting the globally most frequent color
// (ties toward the alphabetically first color).
double majority_baseline(const MemoryColorsDataset& d);

// The color that majority_baseline predicts.
Color majority_color(const MemoryColorsDataset& d);

// Monte Carlo accuracy of uniform guessing, one full pass over the dataset
// per trial; mean/sample-std across trials.
MeanStd random_baseline(const MemoryColorsDataset& d, int trials, std::uint64_t seed);

std::map<Color, int> color_histogram(const MemoryColorsDataset& d);

}  // namespace memcol
