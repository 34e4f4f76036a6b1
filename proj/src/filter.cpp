#include "memcol/filter.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "json.hpp"
#include "memcol/errors.hpp"

namespace memcol {

namespace {

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool is_token_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
}

std::string trimmed(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Distinct-string counter backed by a 64-bit hash set; memory scales with
// distinct ids, not stream length.
class DistinctCounter {
public:
    void add(std::string_view s) { seen_.insert(fnv1a64(s)); }
    std::uint64_t count() const { return seen_.size(); }

private:
    std::unordered_set<std::uint64_t> seen_;
};

struct StreamTallies {
    DistinctCounter images_in;
    DistinctCounter images_kept;
    std::map<std::string, DistinctCounter> images_in_by_source;
    std::map<std::string, DistinctCounter> images_kept_by_source;
};

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char raw : text) {
        const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
        if (is_token_char(c)) {
            cur += c;
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

CaptionRecord parse_caption_record(const std::string& line, const std::string& where) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(where + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw FormatError(where + ": record must be a JSON object");
    CaptionRecord rec;
    for (const char* field : {"caption", "image_id", "source"}) {
        if (!j.contains(field) || !j[field].is_string())
            throw FormatError(where + ": missing or non-string field \"" + field + "\"");
    }
    rec.caption = j["caption"].get<std::string>();
    rec.image_id = j["image_id"].get<std::string>();
    rec.source = j["source"].get<std::string>();
    if (trimmed(rec.caption).empty()) throw FormatError(where + ": empty caption");
    if (rec.image_id.empty()) throw FormatError(where + ": empty image_id");
    return rec;
}

std::string to_json_line(const CaptionRecord& rec) {
    nlohmann::ordered_json j;
    j["caption"] = rec.caption;
    j["image_id"] = rec.image_id;
    j["source"] = rec.source;
    return j.dump();
}

FilterRule make_filter_rule(const MemoryColorsDataset& d) {
    if (d.items.empty()) throw ConfigError("filter rule needs a non-empty dataset");
    FilterRule rule;
    for (const auto& it : d.items) {
        rule.items.push_back(it.item);
        rule.stemmed_items.push_back(porter_stem_all(tokenize(it.item)));
        if (rule.stemmed_items.back().empty())
            throw ConfigError("item '" + it.item + "' has no tokens");
    }
    for (std::size_t c = 0; c < kColorCount; ++c) {
        rule.colors.emplace_back(kColorNames[c]);
        rule.stemmed_colors.push_back(porter_stem(kColorNames[c]));
    }
    return rule;
}

std::string_view to_string(MatchedCondition c) {
    switch (c) {
        case MatchedCondition::none: return "none";
        case MatchedCondition::cond1: return "cond1";
        case MatchedCondition::cond2: return "cond2";
        case MatchedCondition::both: return "both";
    }
    return "none";
}

ConditionMatch matches_condition1(const std::string& caption, const FilterRule& rule) {
    ConditionMatch m;
    const std::string low = lowercase(caption);
    std::string color;
    for (const auto& c : rule.colors) {
        if (low.find(c) != std::string::npos) {
            color = c;
            break;
        }
    }
    if (color.empty()) return m;
    for (const auto& item : rule.items) {
        if (low.find(item) != std::string::npos) {
            m.matched = true;
            m.item = item;
            m.color = color;
            return m;
        }
    }
    return m;
}

ConditionMatch matches_condition2(const std::string& caption, const FilterRule& rule,
                                  StemCache* cache) {
    ConditionMatch m;
    const std::vector<std::string> tokens = tokenize(caption);
    if (tokens.empty()) return m;
    std::vector<std::string> stems;
    stems.reserve(tokens.size());
    for (const auto& t : tokens) stems.push_back(cache ? cache->stem(t) : porter_stem(t));

    std::string color;
    for (const auto& sc : rule.stemmed_colors) {
        if (std::find(stems.begin(), stems.end(), sc) != stems.end()) {
            color = sc;
            break;
        }
    }
    if (color.empty()) return m;

    for (std::size_t i = 0; i < rule.stemmed_items.size(); ++i) {
        const auto& seq = rule.stemmed_items[i];
        if (seq.size() > stems.size()) continue;
        if (std::search(stems.begin(), stems.end(), seq.begin(), seq.end()) != stems.end()) {
            m.matched = true;
            m.item = rule.items[i];
            m.color = color;
            return m;
        }
    }
    return m;
}

FilterDecision decide_caption(const std::string& caption, const FilterRule& rule,
                              StemCache* cache) {
    FilterDecision d;
    const ConditionMatch c1 = matches_condition1(caption, rule);
    const ConditionMatch c2 = matches_condition2(caption, rule, cache);
    if (c1.matched && c2.matched) {
        d.matched_condition = MatchedCondition::both;
    } else if (c1.matched) {
        d.matched_condition = MatchedCondition::cond1;
    } else if (c2.matched) {
        d.matched_condition = MatchedCondition::cond2;
    } else {
        d.matched_condition = MatchedCondition::none;
    }
    d.keep = d.matched_condition == MatchedCondition::none;
    if (c1.matched) {
        d.matched_item = c1.item;
        d.matched_color = c1.color;
    } else if (c2.matched) {
        d.matched_item = c2.item;
        d.matched_color = c2.color;
    }
    return d;
}

FilterStats filter_stream(std::istream& in, std::ostream* kept_out, const FilterRule& rule,
                          const FilterOptions& opts, const std::string& source_name) {
    FilterStats stats;
    StreamTallies tallies;
    StemCache cache;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trimmed(line).empty()) continue;
        CaptionRecord rec;
        try {
            rec = parse_caption_record(line, source_name + ":" + std::to_string(lineno));
        } catch (const FormatError&) {
            if (opts.strict) throw;
            ++stats.malformed_skipped;
            continue;
        }
        ++stats.captions_in;
        auto& src = stats.per_source[rec.source];
        ++src.captions_in;
        tallies.images_in.add(rec.image_id);
        tallies.images_in_by_source[rec.source].add(rec.image_id);

        const FilterDecision d = decide_caption(rec.caption, rule, &cache);
        if (d.keep) {
            ++stats.captions_kept;
            ++src.captions_kept;
            tallies.images_kept.add(rec.image_id);
            tallies.images_kept_by_source[rec.source].add(rec.image_id);
            if (kept_out) (*kept_out) << line << '\n';
        } else {
            ++stats.captions_dropped;
            switch (d.matched_condition) {
                case MatchedCondition::cond1: ++stats.dropped_cond1_only; break;
                case MatchedCondition::cond2: ++stats.dropped_cond2_only; break;
                case MatchedCondition::both: ++stats.dropped_both; break;
                case MatchedCondition::none: break;
            }
        }
    }
    stats.images_in = tallies.images_in.count();
    stats.images_kept = tallies.images_kept.count();
    for (auto& [source, tally] : stats.per_source) {
        tally.images_in = tallies.images_in_by_source[source].count();
        tally.images_kept = tallies.images_kept_by_source[source].count();
    }
    stats.drop_rate = stats.captions_in == 0
                          ? 0.0
                          : static_cast<double>(stats.captions_dropped) /
                                static_cast<double>(stats.captions_in);
    return stats;
}

std::pair<std::vector<CaptionRecord>, FilterStats> filter_records(
    const std::vector<CaptionRecord>& records, const FilterRule& rule) {
    std::vector<CaptionRecord> kept;
    FilterStats stats;
    StreamTallies tallies;
    StemCache cache;
    for (const auto& rec : records) {
        ++stats.captions_in;
        auto& src = stats.per_source[rec.source];
        ++src.captions_in;
        tallies.images_in.add(rec.image_id);
        tallies.images_in_by_source[rec.source].add(rec.image_id);
        const FilterDecision d = decide_caption(rec.caption, rule, &cache);
        if (d.keep) {
            ++stats.captions_kept;
            ++src.captions_kept;
            tallies.images_kept.add(rec.image_id);
            tallies.images_kept_by_source[rec.source].add(rec.image_id);
            kept.push_back(rec);
        } else {
            ++stats.captions_dropped;
            switch (d.matched_condition) {
                case MatchedCondition::cond1: ++stats.dropped_cond1_only; break;
                case MatchedCondition::cond2: ++stats.dropped_cond2_only; break;
                case MatchedCondition::both: ++stats.dropped_both; break;
                case MatchedCondition::none: break;
            }
        }
    }
    stats.images_in = tallies.images_in.count();
    stats.images_kept = tallies.images_kept.count();
    for (auto& [source, tally] : stats.per_source) {
        tally.images_in = tallies.images_in_by_source[source].count();
        tally.images_kept = tallies.images_kept_by_source[source].count();
    }
    stats.drop_rate = stats.captions_in == 0
                          ? 0.0
                          : static_cast<double>(stats.captions_dropped) /
                                static_cast<double>(stats.captions_in);
    return {std::move(kept), std::move(stats)};
}

CorpusStats corpus_stats(std::istream& in, const FilterOptions& opts,
                         const std::string& source_name) {
    CorpusStats stats;
    DistinctCounter images_total;
    std::map<std::string, DistinctCounter> images_by_source;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trimmed(line).empty()) continue;
        CaptionRecord rec;
        try {
            rec = parse_caption_record(line, source_name + ":" + std::to_string(lineno));
        } catch (const FormatError&) {
            if (opts.strict) throw;
            ++stats.malformed_skipped;
            continue;
        }
        ++stats.total.captions;
        ++stats.per_source[rec.source].captions;
        images_total.add(rec.image_id);
        images_by_source[rec.source].add(rec.image_id);
    }
    stats.total.images = images_total.count();
    for (auto& [source, counts] : stats.per_source)
        counts.images = images_by_source[source].count();
    return stats;
}

std::string stats_to_json_string(const FilterStats& stats) {
    nlohmann::ordered_json j;
    j["format"] = "memory-colors-filter-stats/1";
    j["captions_in"] = stats.captions_in;
    j["captions_kept"] = stats.captions_kept;
    j["captions_dropped"] = stats.captions_dropped;
    j["drop_rate"] = stats.drop_rate;
    j["images_in"] = stats.images_in;
    j["images_kept"] = stats.images_kept;
    j["dropped_by_condition"] = {
        {"cond1_only", stats.dropped_cond1_only},
        {"cond2_only", stats.dropped_cond2_only},
        {"both", stats.dropped_both},
    };
    j["malformed_skipped"] = stats.malformed_skipped;
    nlohmann::ordered_json per_source = nlohmann::ordered_json::object();
    for (const auto& [source, tally] : stats.per_source) {
        per_source[source] = {
            {"captions_in", tally.captions_in},
            {"captions_kept", tally.captions_kept},
            {"images_in", tally.images_in},
            {"images_kept", tally.images_kept},
        };
    }
    j["per_source"] = per_source;
    return j.dump(2) + "\n";
}

std::string corpus_stats_to_json_string(const CorpusStats& stats) {
    nlohmann::ordered_json j;
    j["format"] = "memory-colors-corpus-stats/1";
    j["captions"] = stats.total.captions;
    j["images"] = stats.total.images;
    j["malformed_skipped"] = stats.malformed_skipped;
    nlohmann::ordered_json per_source = nlohmann::ordered_json::object();
    for (const auto& [source, counts] : stats.per_source) {
        per_source[source] = {
            {"captions", counts.captions},
            {"images", counts.images},
        };
    }
    j["per_source"] = per_source;
    return j.dump(2) + "\n";
}

}  // namespace memcol
