#include "memcol/toy/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "memcol/errors.hpp"
#include "memcol/filter.hpp"

namespace memcol::toy {

namespace {

const char* kSpecialNames[4] = {"[PAD]", "[MASK]", "[SEP]", "[CLS]"};

bool plain_word(const std::string& w) {
    if (w.empty()) return false;
    for (unsigned char c : w)
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'))) return false;
    return true;
}

}  // namespace

int ToyVocab::id(const std::string& token) const {
    auto it = ids.find(token);
    if (it == ids.end()) throw EncodingError("token not in toy vocabulary: \"" + token + "\"");
    return it->second;
}

bool ToyVocab::is_color(int id) const {
    for (int c : color_ids)
        if (c == id) return true;
    return false;
}

std::vector<int> ToyVocab::encode(const std::string& text) const {
    std::vector<int> out;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) {
            out.push_back(id(word));
            word.clear();
        }
    };
    std::size_t i = 0;
    while (i < text.size()) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (c == '[') {
            const auto close = text.find(']', i);
            if (close == std::string::npos)
                throw EncodingError("unterminated bracket token in: \"" + text + "\"");
            const std::string bracket = text.substr(i, close - i + 1);
            flush();
            bool known = false;
            for (int s = 0; s < 4; ++s) {
                if (bracket == kSpecialNames[s]) {
                    out.push_back(s == 0 ? pad_id : s == 1 ? mask_id : s == 2 ? sep_id : cls_id);
                    known = true;
                    break;
                }
            }
            if (!known) throw EncodingError("unknown bracket token: " + bracket);
            i = close + 1;
            continue;
        }
        if (std::isalnum(c)) {
            word.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
        ++i;
    }
    flush();
    return out;
}

std::string ToyVocab::decode(const std::vector<int>& seq) const {
    std::string out;
    for (int t : seq) {
        if (t < 0 || t >= size()) throw EncodingError("token id out of range: " + std::to_string(t));
        if (!out.empty()) out += ' ';
        out += tokens[t];
    }
    return out;
}

ToyVocab make_toy_vocab(const std::vector<std::string>& words) {
    ToyVocab v;
    for (const char* s : kSpecialNames) v.tokens.emplace_back(s);
    std::set<std::string> rest;
    for (std::size_t c = 0; c < kColorCount; ++c) v.tokens.emplace_back(kColorNames[c]);
    for (const auto& w : words) {
        if (!plain_word(w))
            throw ConfigError("vocabulary words must be lowercase alphanumeric, got: \"" + w +
                              "\"");
        if (std::find(v.tokens.begin(), v.tokens.end(), w) == v.tokens.end()) rest.insert(w);
    }
    for (const auto& w : rest) v.tokens.push_back(w);
    for (int i = 0; i < v.size(); ++i) v.ids[v.tokens[i]] = i;
    for (std::size_t c = 0; c < kColorCount; ++c)
        v.color_ids[c] = v.ids.at(std::string(kColorNames[c]));
    return v;
}

ToyVocab vocab_from_tokens(const std::vector<std::string>& toks) {
    if (toks.size() < 4 + kColorCount)
        throw ConfigError("token list too short for a vocabulary");
    ToyVocab v;
    for (int i = 0; i < 4; ++i)
        if (toks[i] != kSpecialNames[i])
            throw ConfigError("special token out of place at id " + std::to_string(i));
    v.tokens = toks;
    for (int i = 0; i < v.size(); ++i) {
        if (i >= 4 && !plain_word(v.tokens[i]))
            throw ConfigError("invalid vocabulary token: \"" + v.tokens[i] + "\"");
        if (!v.ids.emplace(v.tokens[i], i).second)
            throw ConfigError("duplicate vocabulary token: \"" + v.tokens[i] + "\"");
    }
    for (std::size_t c = 0; c < kColorCount; ++c) {
        const auto it = v.ids.find(std::string(kColorNames[c]));
        if (it == v.ids.end())
            throw ConfigError(std::string("vocabulary is missing color \"") +
                              std::string(kColorNames[c]) + "\"");
        v.color_ids[c] = it->second;
    }
    return v;
}

std::vector<std::string> query_vocabulary(const MemoryColorsDataset& d,
                                          const std::vector<QueryTemplate>& templates) {
    std::set<std::string> words;
    for (const auto& item : d.items) {
        for (auto& w : tokenize(item.item)) words.insert(w);
        for (auto& w : tokenize(item.descriptor)) words.insert(w);
    }
    for (const auto& t : templates) {
        std::string stripped = t.pattern;
        for (const char* ph : {"[DESCRIPTOR]", "[ITEM]", "[MASK]", "[SEP]"}) {
            std::size_t pos;
            while ((pos = stripped.find(ph)) != std::string::npos)
                stripped.erase(pos, std::string(ph).size());
        }
        for (auto& w : tokenize(stripped)) words.insert(w);
    }
    return {words.begin(), words.end()};
}

}  // namespace memcol::toy
