#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "memcol/color.hpp"
#include "memcol/dataset.hpp"
#include "memcol/templates.hpp"

namespace memcol::toy {

// Word-level vocabulary for the toy model. Ids are stable for a given word
// list: specials first, then the 11 colors, then the remaining words in
// sorted order.
struct ToyVocab {
    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> ids;
    int pad_id = 0;
    int mask_id = 1;
    int sep_id = 2;
    int cls_id = 3;
    std::array<int, kColorCount> color_ids{};

    int size() const { return static_cast<int>(tokens.size()); }
    bool contains(const std::string& token) const { return ids.count(token) > 0; }
    // Throws EncodingError for unknown tokens.
    int id(const std::string& token) const;
    bool is_special(int id) const { return id >= 0 && id <= 3; }
    bool is_color(int id) const;

    // Splits on whitespace, recognizes bracketed specials ([MASK], [SEP],
    // [CLS], [PAD]), lowercases everything else and strips punctuation.
    // Throws EncodingError on unknown words or unknown bracket tokens.
    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;
};

// Builds a vocabulary from plain lowercase words; specials and colors are
// always present and deduplicated against the list.
ToyVocab make_toy_vocab(const std::vector<std::string>& words);

// Rebuilds a vocabulary from a complete ordered token list (as serialized in
// a checkpoint), preserving ids. Throws ConfigError when the specials are not
// at ids 0..3, a color is missing, or a token repeats.
ToyVocab vocab_from_tokens(const std::vector<std::string>& tokens);

// Every word appearing in the rendered cloze queries for the given dataset
// and templates, so the queries are encodable.
std::vector<std::string> query_vocabulary(const MemoryColorsDataset& d,
                                          const std::vector<QueryTemplate>& templates);

}  // namespace memcol::toy
