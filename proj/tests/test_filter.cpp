#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "memcol/errors.hpp"
#include "memcol/filter.hpp"
#include "memcol/porter.hpp"
#include "memcol/rng.hpp"

using namespace memcol;

namespace {

// Independent re-implementations of both conditions, used as the oracle in
// the equivalence fuzz. Substring and sequence searches are hand-rolled.
std::string naive_lower(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) out.push_back(static_cast<char>(std::tolower(c)));
    return out;
}

bool naive_contains(const std::string& hay, const std::string& needle) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        std::size_t k = 0;
        while (k < needle.size() && hay[i + k] == needle[k]) ++k;
        if (k == needle.size()) return true;
    }
    return false;
}

std::vector<std::string> naive_tokenize(const std::string& s) {
    std::vector<std::string> toks;
    std::string cur;
    for (unsigned char c : s) {
        const bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
        if (alnum) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            toks.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) toks.push_back(cur);
    return toks;
}

bool naive_cond1(const std::string& caption, const FilterRule& rule) {
    const std::string lc = naive_lower(caption);
    bool color = false;
    for (const auto& c : rule.colors)
        if (naive_contains(lc, c)) color = true;
    if (!color) return false;
    for (const auto& it : rule.items)
        if (naive_contains(lc, it)) return true;
    return false;
}

bool naive_cond2(const std::string& caption, const FilterRule& rule) {
    const auto toks = naive_tokenize(caption);
    std::vector<std::string> stems;
    stems.reserve(toks.size());
    for (const auto& t : toks) stems.push_back(porter_stem(t));
    bool color = false;
    for (const auto& c : rule.stemmed_colors)
        for (const auto& s : stems)
            if (s == c) color = true;
    if (!color) return false;
    for (const auto& seq : rule.stemmed_items) {
        if (seq.empty() || seq.size() > stems.size()) continue;
        for (std::size_t i = 0; i + seq.size() <= stems.size(); ++i) {
            std::size_t k = 0;
            while (k < seq.size() && stems[i + k] == seq[k]) ++k;
            if (k == seq.size()) return true;
        }
    }
    return false;
}

MatchedCondition naive_decision(const std::string& caption, const FilterRule& rule) {
    const bool c1 = naive_cond1(caption, rule);
    const bool c2 = naive_cond2(caption, rule);
    if (c1 && c2) return MatchedCondition::both;
    if (c1) return MatchedCondition::cond1;
    if (c2) return MatchedCondition::cond2;
    return MatchedCondition::none;
}

MemoryColorsDataset small_dataset() {
    MemoryColorsDataset d;
    d.items.push_back({1, "a", "lime", Color::green, ""});
    d.items.push_back({2, "a", "polar bear", Color::white, ""});
    d.items.push_back({3, "a", "cherry", Color::red, ""});
    d.items.push_back({4, "a", "banana", Color::yellow, ""});
    return d;
}

std::string jsonl_line(const std::string& caption, const std::string& image_id,
                       const std::string& source) {
    CaptionRecord r{caption, image_id, source};
    return to_json_line(r) + "\n";
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on non-alphanumeric bytes") {
    CHECK(tokenize("A red-breasted robin!") ==
          std::vector<std::string>{"a", "red", "breasted", "robin"});
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("Polar Bear, 2021") == std::vector<std::string>{"polar", "bear", "2021"});
    CHECK(tokenize("   \t\n ") == std::vector<std::string>{});
    CHECK(tokenize("one,two;;three") == std::vector<std::string>{"one", "two", "three"});
    // Non-ASCII bytes act as separators.
    CHECK(tokenize("caf\xc3\xa9 au lait") == std::vector<std::string>{"caf", "au", "lait"});
}

TEST_CASE("filter rule is recomputable from the raw fields") {
    const auto d = memcol::testing::load_bundled_dataset();
    const auto rule = make_filter_rule(d);
    REQUIRE(rule.items.size() == 109);
    REQUIRE(rule.colors.size() == kColorCount);
    REQUIRE(rule.stemmed_items.size() == rule.items.size());
    REQUIRE(rule.stemmed_colors.size() == rule.colors.size());
    for (std::size_t c = 0; c < kColorCount; ++c) {
        CHECK(rule.colors[c] == kColorNames[c]);
        CHECK(rule.stemmed_colors[c] == porter_stem(rule.colors[c]));
    }
    CHECK(rule.stemmed_colors[static_cast<int>(Color::grey)] == "grei");
    CHECK(rule.stemmed_colors[static_cast<int>(Color::orange)] == "orang");
    CHECK(rule.stemmed_colors[static_cast<int>(Color::purple)] == "purpl");
    CHECK(rule.stemmed_colors[static_cast<int>(Color::red)] == "red");
    for (std::size_t i = 0; i < rule.items.size(); ++i)
        CHECK(rule.stemmed_items[i] == porter_stem_all(tokenize(rule.items[i])));

    CHECK_THROWS_AS(make_filter_rule(MemoryColorsDataset{}), ConfigError);
}

TEST_CASE("condition 1 is a case-insensitive substring test") {
    const auto rule = make_filter_rule(memcol::testing::load_bundled_dataset());

    SUBCASE("item plus color matches") {
        const auto m = matches_condition1("a yellow banana on a plate", rule);
        REQUIRE(m.matched);
        CHECK(m.item == "banana");
        CHECK(m.color == "yellow");
    }
    SUBCASE("multi-word item phrases match as phrases") {
        const auto m = matches_condition1("the polar bear stood on white ice", rule);
        REQUIRE(m.matched);
        CHECK(m.item == "polar bear");
        CHECK(m.color == "white");
    }
    SUBCASE("no item means no match") {
        CHECK_FALSE(matches_condition1("a bowl of fruit", rule).matched);
    }
    SUBCASE("color alone is not enough, item alone is not enough") {
        CHECK_FALSE(matches_condition1("a very red thing", rule).matched);
        CHECK_FALSE(matches_condition1("a banana on a plate", rule).matched);
    }
    SUBCASE("matching ignores case") {
        CHECK(matches_condition1("A YELLOW BANANA!", rule).matched);
        CHECK(matches_condition1("Yellow Banana", rule).matched);
    }
    SUBCASE("substrings cross word boundaries by design") {
        // "banana" inside "bananas", and "grey" inside "greyhound" with the
        // item "stone" elsewhere in the caption.
        CHECK(matches_condition1("bananas are yellow", rule).matched);
        const auto m = matches_condition1("greyhound racing at the stone track", rule);
        REQUIRE(m.matched);
        CHECK(m.item == "stone");
        CHECK(m.color == "grey");
    }
}

TEST_CASE("condition 2 matches stemmed tokens") {
    const auto rule = make_filter_rule(memcol::testing::load_bundled_dataset());

    SUBCASE("morphological variants reach the same stem") {
        const auto m = matches_condition2("red cherries in a bowl", rule);
        REQUIRE(m.matched);
        CHECK(m.item == "cherry");
        CHECK(m.color == "red");
    }
    SUBCASE("no color token, no match") {
        CHECK_FALSE(matches_condition2("a bowl of cherries", rule).matched);
    }
    SUBCASE("stems are compared as whole tokens") {
        // stem("greyhound") stays "greyhound", so no color stem is present
        // even though the raw caption contains "grey".
        CHECK_FALSE(matches_condition2("greyhound racing at the stone track", rule).matched);
    }
    SUBCASE("plural item with color") {
        const auto m = matches_condition2("the limes were green", rule);
        REQUIRE(m.matched);
        CHECK(m.item == "lime");
        CHECK(m.color == "green");
    }
}

TEST_CASE("the two conditions are independent") {
    const auto rule = make_filter_rule(small_dataset());

    SUBCASE("condition 1 only") {
        // "sublime" contains "lime" and "redwood" contains "red" as raw
        // substrings, but the stems (sublim, redwood, tree) hit nothing.
        const std::string cap = "sublime redwood trees";
        CHECK(matches_condition1(cap, rule).matched);
        CHECK_FALSE(matches_condition2(cap, rule).matched);
        const auto d = decide_caption(cap, rule);
        CHECK_FALSE(d.keep);
        CHECK(d.matched_condition == MatchedCondition::cond1);
    }
    SUBCASE("condition 2 only") {
        // "cherries" never contains "cherry" as a raw substring, but stems
        // to cherri = stem("cherry").
        const std::string cap = "cherries are red things";
        CHECK_FALSE(matches_condition1(cap, rule).matched);
        CHECK(matches_condition2(cap, rule).matched);
        const auto d = decide_caption(cap, rule);
        CHECK_FALSE(d.keep);
        CHECK(d.matched_condition == MatchedCondition::cond2);
        CHECK(d.matched_item == "cherry");
        CHECK(d.matched_color == "red");
    }
    SUBCASE("both conditions") {
        const auto d = decide_caption("a yellow banana", rule);
        CHECK_FALSE(d.keep);
        CHECK(d.matched_condition == MatchedCondition::both);
        CHECK(d.matched_item == "banana");
        CHECK(d.matched_color == "yellow");
    }
    SUBCASE("neither condition") {
        const auto d = decide_caption("a bowl of fruit", rule);
        CHECK(d.keep);
        CHECK(d.matched_condition == MatchedCondition::none);
        CHECK(d.matched_item.empty());
        CHECK(d.matched_color.empty());
    }
    SUBCASE("multi-word stems must be contiguous") {
        const std::string cap = "the polar and the bear are white";
        CHECK_FALSE(matches_condition1(cap, rule).matched);
        CHECK_FALSE(matches_condition2(cap, rule).matched);
        CHECK(decide_caption(cap, rule).keep);
    }
}

TEST_CASE("matched-condition names") {
    CHECK(to_string(MatchedCondition::none) == "none");
    CHECK(to_string(MatchedCondition::cond1) == "cond1");
    CHECK(to_string(MatchedCondition::cond2) == "cond2");
    CHECK(to_string(MatchedCondition::both) == "both");
}

TEST_CASE("caption records parse from and serialize to JSONL") {
    const auto r = parse_caption_record(
        R"({"caption": "a dog", "image_id": "img-1", "source": "cc"})");
    CHECK(r.caption == "a dog");
    CHECK(r.image_id == "img-1");
    CHECK(r.source == "cc");

    const auto back = parse_caption_record(to_json_line({"caf\xc3\xa9 scene", "i2", "sbu"}));
    CHECK(back.caption == "caf\xc3\xa9 scene");

    CHECK_THROWS_AS(parse_caption_record("not json", "f:1"), FormatError);
    CHECK_THROWS_AS(parse_caption_record("[1,2]", "f:1"), FormatError);
    CHECK_THROWS_AS(parse_caption_record(R"({"caption": "x", "image_id": "i"})", "f:1"),
                    FormatError);
    CHECK_THROWS_AS(parse_caption_record(R"({"caption": 3, "image_id": "i", "source": "s"})"),
                    FormatError);
    CHECK_THROWS_AS(
        parse_caption_record(R"({"caption": "  ", "image_id": "i", "source": "s"})"),
        FormatError);
    CHECK_THROWS_AS(parse_caption_record(R"({"caption": "x", "image_id": "", "source": "s"})"),
                    FormatError);
    // The location string is carried into the message.
    try {
        parse_caption_record("oops", "corpus.jsonl:17");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("corpus.jsonl:17") != std::string::npos);
    }
}

TEST_CASE("filter_records keeps what the decision keeps") {
    const auto rule = make_filter_rule(small_dataset());
    const std::vector<CaptionRecord> records = {
        {"a bowl of fruit", "img1", "cc"},
        {"a yellow banana", "img1", "cc"},
        {"two dogs playing", "img2", "sbu"},
    };
    const auto [kept, stats] = filter_records(records, rule);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].caption == "a bowl of fruit");
    CHECK(kept[1].caption == "two dogs playing");
    CHECK(stats.captions_in == 3);
    CHECK(stats.captions_kept == 2);
    CHECK(stats.captions_dropped == 1);
    CHECK(stats.drop_rate == 1.0 / 3.0);
    CHECK(stats.dropped_cond1_only == 0);
    CHECK(stats.dropped_cond2_only == 0);
    CHECK(stats.dropped_both == 1);
    // img1 appears twice but only once among distinct inputs.
    CHECK(stats.images_in == 2);
    CHECK(stats.images_kept == 2);
    REQUIRE(stats.per_source.size() == 2);
    CHECK(stats.per_source.at("cc").captions_in == 2);
    CHECK(stats.per_source.at("cc").captions_kept == 1);
    CHECK(stats.per_source.at("cc").images_in == 1);
    CHECK(stats.per_source.at("cc").images_kept == 1);
    CHECK(stats.per_source.at("sbu").captions_in == 1);
    CHECK(stats.per_source.at("sbu").captions_kept == 1);
}

TEST_CASE("filter_stream echoes kept lines in order") {
    const auto rule = make_filter_rule(small_dataset());
    std::ostringstream in_text;
    in_text << jsonl_line("a bowl of fruit", "i1", "cc");
    in_text << "\n";  // blank lines are skipped
    in_text << jsonl_line("a yellow banana", "i2", "cc");
    in_text << jsonl_line("two dogs playing", "i3", "sbu");

    std::istringstream in(in_text.str());
    std::ostringstream out;
    const auto stats = filter_stream(in, &out, rule);
    CHECK(stats.captions_in == 3);
    CHECK(stats.captions_kept == 2);
    CHECK(stats.malformed_skipped == 0);

    std::istringstream kept(out.str());
    std::string line;
    std::vector<std::string> captions;
    while (std::getline(kept, line)) captions.push_back(parse_caption_record(line).caption);
    CHECK(captions == std::vector<std::string>{"a bowl of fruit", "two dogs playing"});

    SUBCASE("kept lines are echoed byte for byte") {
        std::istringstream again(in_text.str());
        std::ostringstream out2;
        filter_stream(again, &out2, rule);
        const std::string expected =
            jsonl_line("a bowl of fruit", "i1", "cc") + jsonl_line("two dogs playing", "i3", "sbu");
        CHECK(out2.str() == expected);
    }
}

TEST_CASE("filter_stream strictness") {
    const auto rule = make_filter_rule(small_dataset());
    const std::string text = jsonl_line("a bowl of fruit", "i1", "cc") + "this is not json\n" +
                             jsonl_line("two dogs playing", "i3", "sbu");

    SUBCASE("strict mode aborts and names the line") {
        std::istringstream in(text);
        try {
            filter_stream(in, nullptr, rule, FilterOptions{true}, "corpus.jsonl");
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("corpus.jsonl:2") != std::string::npos);
        }
    }
    SUBCASE("lenient mode skips and counts") {
        std::istringstream in(text);
        const auto stats = filter_stream(in, nullptr, rule, FilterOptions{false});
        CHECK(stats.malformed_skipped == 1);
        CHECK(stats.captions_in == 2);
        CHECK(stats.captions_kept == 2);
    }
    SUBCASE("carriage returns are tolerated") {
        std::istringstream in(to_json_line({"a bowl of fruit", "i1", "cc"}) + "\r\n");
        std::ostringstream out;
        const auto stats = filter_stream(in, &out, rule);
        CHECK(stats.captions_in == 1);
        CHECK(out.str() == jsonl_line("a bowl of fruit", "i1", "cc"));
    }
    SUBCASE("empty stream yields a zero drop rate") {
        std::istringstream in("");
        const auto stats = filter_stream(in, nullptr, rule);
        CHECK(stats.captions_in == 0);
        CHECK(stats.drop_rate == 0.0);
    }
}

TEST_CASE("decisions agree with an independent implementation on random captions") {
    const auto rule = make_filter_rule(memcol::testing::load_bundled_dataset());
    const auto& d = memcol::testing::load_bundled_dataset();

    const std::vector<std::string> fillers = {
        "people",  "walking", "sitting",  "near",    "during", "festival", "crowd",
        "market",  "morning", "evening",  "photo",   "view",   "street",   "vintage",
        "holding", "looking", "toward",   "behind",  "beside", "along",    "around",
        "bridge",  "station", "sublime",  "redwood", "infrared", "pinkish", "whitewashed",
        "greyhound", "orangery", "skyline", "blackout", "browning", "greenery"};
    const std::vector<std::string> seps = {" ", " ", " ", ", ", "-", "; "};

    Rng rng(7);
    StemCache cache;
    std::size_t kept_count = 0;
    std::size_t dropped_count = 0;
    for (int iter = 0; iter < 10000; ++iter) {
        std::string cap;
        const std::size_t words = 3 + rng.below(8);
        for (std::size_t w = 0; w < words; ++w) {
            if (!cap.empty()) cap += seps[rng.below(seps.size())];
            std::string word;
            const double roll = rng.real();
            if (roll < 0.5) {
                word = fillers[rng.below(fillers.size())];
            } else if (roll < 0.7) {
                word = kColorNames[rng.below(kColorCount)];
            } else {
                word = d.items[rng.below(d.items.size())].item;
                if (rng.real() < 0.3) word += "s";
            }
            if (rng.real() < 0.15) word[0] = static_cast<char>(std::toupper(word[0]));
            if (rng.real() < 0.05)
                for (auto& c : word) c = static_cast<char>(std::toupper(c));
            cap += word;
        }
        const auto got = decide_caption(cap, rule, &cache);
        const auto want = naive_decision(cap, rule);
        CAPTURE(cap);
        REQUIRE(got.matched_condition == want);
        REQUIRE(got.keep == (want == MatchedCondition::none));
        (got.keep ? kept_count : dropped_count) += 1;

        // With and without the stem cache the decision is identical.
        if (iter % 100 == 0) {
            const auto bare = decide_caption(cap, rule, nullptr);
            REQUIRE(bare.matched_condition == got.matched_condition);
            REQUIRE(bare.matched_item == got.matched_item);
        }
    }
    // The mix exercises both outcomes heavily.
    CHECK(kept_count > 1000);
    CHECK(dropped_count > 1000);
}

TEST_CASE("filtering is order-independent") {
    const auto rule = make_filter_rule(memcol::testing::load_bundled_dataset());
    const auto d = memcol::testing::load_bundled_dataset();

    std::vector<CaptionRecord> records;
    Rng rng(11);
    for (int i = 0; i < 400; ++i) {
        std::string cap = "photo of";
        if (rng.real() < 0.4) {
            cap += " " + std::string(kColorNames[rng.below(kColorCount)]);
        }
        if (rng.real() < 0.6) {
            cap += " " + d.items[rng.below(d.items.size())].item;
        } else {
            cap += " things";
        }
        records.push_back({cap, "img" + std::to_string(i / 3), "src" + std::to_string(i % 2)});
    }
    const auto [kept_a, stats_a] = filter_records(records, rule);

    auto shuffled = records;
    rng.shuffle(shuffled);
    const auto [kept_b, stats_b] = filter_records(shuffled, rule);

    auto key = [](const CaptionRecord& r) { return r.caption + "|" + r.image_id; };
    std::multiset<std::string> a, b;
    for (const auto& r : kept_a) a.insert(key(r));
    for (const auto& r : kept_b) b.insert(key(r));
    CHECK(a == b);
    CHECK(stats_a.captions_kept == stats_b.captions_kept);
    CHECK(stats_a.images_kept == stats_b.images_kept);
    CHECK(stats_a.drop_rate == stats_b.drop_rate);

    // Within one run, kept order is input order.
    std::size_t cursor = 0;
    for (const auto& r : kept_a) {
        while (cursor < records.size() && records[cursor].caption != r.caption) ++cursor;
        REQUIRE(cursor < records.size());
        ++cursor;
    }
}

TEST_CASE("a corpus with a planted reveal rate filters to exactly that rate") {
    const auto rule = make_filter_rule(memcol::testing::load_bundled_dataset());
    const auto d = memcol::testing::load_bundled_dataset();

    // Filler words vetted below to hit neither condition.
    const std::vector<std::string> safe = {"people", "walking", "sitting", "near",
                                           "during", "festival", "crowd",  "market",
                                           "morning", "evening", "photo",  "view"};
    Rng rng(23);
    std::vector<CaptionRecord> records;
    std::uint64_t planted = 0;
    for (int i = 0; i < 10000; ++i) {
        std::string cap = safe[rng.below(safe.size())];
        for (int w = 0; w < 4; ++w) cap += " " + safe[rng.below(safe.size())];
        const bool reveal = (i % 100) < 6;
        if (reveal) {
            const auto& item = d.items[rng.below(d.items.size())];
            cap += " " + std::string(to_string(item.color)) + " " + item.item;
            ++planted;
        } else {
            // Fixture sanity: the independent checker agrees it is clean.
            REQUIRE(naive_decision(cap, rule) == MatchedCondition::none);
        }
        records.push_back({cap, "img" + std::to_string(i / 2), "src" + std::to_string(i % 3)});
    }
    REQUIRE(planted == 600);

    const auto [kept, stats] = filter_records(records, rule);
    CHECK(stats.captions_in == 10000);
    CHECK(stats.captions_dropped == 600);
    CHECK(stats.captions_kept == 9400);
    CHECK(kept.size() == 9400);
    CHECK(stats.drop_rate == 600.0 / 10000.0);
    CHECK(stats.captions_in == stats.captions_kept + stats.captions_dropped);
    CHECK(stats.dropped_cond1_only + stats.dropped_cond2_only + stats.dropped_both ==
          stats.captions_dropped);
    CHECK(stats.images_in == 5000);
}

TEST_CASE("corpus_stats counts captions and distinct images per source") {
    SUBCASE("two captions sharing one image") {
        std::istringstream in(jsonl_line("a dog", "imgA", "cc") +
                              jsonl_line("a dog close up", "imgA", "cc"));
        const auto stats = corpus_stats(in);
        CHECK(stats.total.captions == 2);
        CHECK(stats.total.images == 1);
        REQUIRE(stats.per_source.count("cc") == 1);
        CHECK(stats.per_source.at("cc").captions == 2);
        CHECK(stats.per_source.at("cc").images == 1);
    }
    SUBCASE("empty input") {
        std::istringstream in("");
        const auto stats = corpus_stats(in);
        CHECK(stats.total.captions == 0);
        CHECK(stats.total.images == 0);
        CHECK(stats.per_source.empty());
    }
    SUBCASE("multiple sources, more captions than images") {
        std::istringstream in(jsonl_line("one", "i1", "cc") + jsonl_line("two", "i1", "cc") +
                              jsonl_line("three", "i2", "sbu") + jsonl_line("four", "i3", "sbu"));
        const auto stats = corpus_stats(in);
        CHECK(stats.total.captions == 4);
        CHECK(stats.total.images == 3);
        CHECK(stats.total.captions >= stats.total.images);
        CHECK(stats.per_source.at("cc").captions == 2);
        CHECK(stats.per_source.at("cc").images == 1);
        CHECK(stats.per_source.at("sbu").captions == 2);
        CHECK(stats.per_source.at("sbu").images == 2);
    }
    SUBCASE("strict and lenient handling of malformed lines") {
        const std::string text = jsonl_line("one", "i1", "cc") + "garbage\n";
        std::istringstream strict_in(text);
        CHECK_THROWS_AS(corpus_stats(strict_in), FormatError);
        std::istringstream lenient_in(text);
        const auto stats = corpus_stats(lenient_in, FilterOptions{false});
        CHECK(stats.total.captions == 1);
        CHECK(stats.malformed_skipped == 1);
    }
}

TEST_CASE("stats serialize to tagged JSON documents") {
    const auto rule = make_filter_rule(small_dataset());
    const std::vector<CaptionRecord> records = {
        {"a bowl of fruit", "img1", "cc"},
        {"a yellow banana", "img1", "cc"},
        {"cherries are red things", "img2", "sbu"},
        {"sublime redwood trees", "img3", "sbu"},
    };
    const auto [kept, stats] = filter_records(records, rule);
    REQUIRE(kept.size() == 1);

    const auto j = nlohmann::json::parse(stats_to_json_string(stats));
    CHECK(j.at("format") == "memory-colors-filter-stats/1");
    CHECK(j.at("captions_in") == 4);
    CHECK(j.at("captions_kept") == 1);
    CHECK(j.at("captions_dropped") == 3);
    CHECK(j.at("drop_rate") == doctest::Approx(0.75));
    CHECK(j.at("images_in") == 3);
    CHECK(j.at("images_kept") == 1);
    CHECK(j.at("dropped_by_condition").at("cond1_only") == 1);
    CHECK(j.at("dropped_by_condition").at("cond2_only") == 1);
    CHECK(j.at("dropped_by_condition").at("both") == 1);
    CHECK(j.at("malformed_skipped") == 0);
    CHECK(j.at("per_source").at("cc").at("captions_in") == 2);
    CHECK(j.at("per_source").at("cc").at("captions_kept") == 1);
    CHECK(j.at("per_source").at("sbu").at("captions_kept") == 0);

    std::istringstream in(jsonl_line("one", "i1", "cc") + jsonl_line("two", "i1", "cc"));
    const auto cj = nlohmann::json::parse(corpus_stats_to_json_string(corpus_stats(in)));
    CHECK(cj.at("format") == "memory-colors-corpus-stats/1");
    CHECK(cj.at("captions") == 2);
    CHECK(cj.at("images") == 1);
    CHECK(cj.at("per_source").at("cc").at("captions") == 2);
    CHECK(cj.at("per_source").at("cc").at("images") == 1);
}
