#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "memcol/dataset.hpp"
#include "memcol/porter.hpp"

namespace memcol {

// Lowercases and splits on every non-alphanumeric ASCII byte; empty tokens
// are discarded.
std::vector<std::string> tokenize(std::string_view text);

struct CaptionRecord {
    std::string caption;
    std::string image_id;
    std::string source;
};

// JSONL line {"caption":..., "image_id":..., "source":...}. Throws
// FormatError on malformed input (including empty captions).
CaptionRecord parse_caption_record(const std::string& line,
                                   const std::string& where = "<line>");
std::string to_json_line(const CaptionRecord& rec);

// What the filter screens captions against: the item phrases and the color
// vocabulary, in raw and stemmed form. The stemmed fields are derived from
// the raw ones by make_filter_rule.
struct FilterRule {
    std::vector<std::string> items;
    std::vector<std::string> colors;
    std::vector<std::vector<std::string>> stemmed_items;
    std::vector<std::string> stemmed_colors;
};

FilterRule make_filter_rule(const MemoryColorsDataset& d);

enum class MatchedCondition { none, cond1, cond2, both };
std::string_view to_string(MatchedCondition c);

struct ConditionMatch {
    bool matched = false;
    std::string item;
    std::string color;
};

// Condition 1: the lowercased caption contains some item phrase and some
// color word, both as contiguous substrings.
ConditionMatch matches_condition1(const std::string& caption, const FilterRule& rule);

// Condition 2: the stemmed token sequence contains the stemmed tokens of
// some item phrase contiguously, and some stemmed color token anywhere.
ConditionMatch matches_condition2(const std::string& caption, const FilterRule& rule,
                                  StemCache* cache = nullptr);

struct FilterDecision {
    bool keep = true;
    MatchedCondition matched_condition = MatchedCondition::none;
    std::string matched_item;   // from condition 1 when both match
    std::string matched_color;
};

FilterDecision decide_caption(const std::string& caption, const FilterRule& rule,
                              StemCache* cache = nullptr);

struct SourceTally {
    std::uint64_t captions_in = 0;
    std::uint64_t captions_kept = 0;
    std::uint64_t images_in = 0;   // distinct image_ids seen
    std::uint64_t images_kept = 0; // distinct image_ids among kept records
};

struct FilterStats {
    std::uint64_t captions_in = 0;
    std::uint64_t captions_kept = 0;
    std::uint64_t captions_dropped = 0;
    std::uint64_t images_in = 0;
    std::uint64_t images_kept = 0;
    std::uint64_t dropped_cond1_only = 0;
    std::uint64_t dropped_cond2_only = 0;
    std::uint64_t dropped_both = 0;
    std::uint64_t malformed_skipped = 0;
    double drop_rate = 0.0;
    std::map<std::string, SourceTally> per_source;
};

struct FilterOptions {
    // With strict set, a malformed record aborts with FormatError naming the
    // line; otherwise it is skipped and counted.
    bool strict = true;
};

// Streams JSONL records through the filter. Kept records are echoed to
// kept_out (pass nullptr for stats-only runs) in input order, one line each.
// Memory use is bounded by the rule, the stem cache, and the distinct-image
// tallies; never by the corpus length.
FilterStats filter_stream(std::istream& in, std::ostream* kept_out, const FilterRule& rule,
                          const FilterOptions& opts = {},
                          const std::string& source_name = "<stream>");

// In-memory variant for small corpora.
std::pair<std::vector<CaptionRecord>, FilterStats> filter_records(
    const std::vector<CaptionRecord>& records, const FilterRule& rule);

struct CorpusCounts {
    std::uint64_t captions = 0;
    std::uint64_t images = 0;  // distinct image_ids
};

struct CorpusStats {
    CorpusCounts total;
    std::map<std::string, CorpusCounts> per_source;
    std::uint64_t malformed_skipped = 0;
};

CorpusStats corpus_stats(std::istream& in, const FilterOptions& opts = {},
                         const std::string& source_name = "<stream>");

// JSON documents for the stats files ("memory-colors-filter-stats/1" and
// "memory-colors-corpus-stats/1").
std::string stats_to_json_string(const FilterStats& stats);
std::string corpus_stats_to_json_string(const CorpusStats& stats);

}  // namespace memcol
