#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "memcol/errors.hpp"

namespace memcol {

// The fixed 11-color answer vocabulary, in alphabetical order. The order is
// part of the contract: argmax ties and majority-vote ties break toward the
// lower index.
enum class Color : int {
    black = 0,
    blue,
    brown,
    green,
    grey,
    orange,
    pink,
    purple,
    red,
    white,
    yellow,
};

inline constexpr std::size_t kColorCount = 11;

inline constexpr std::array<std::string_view, kColorCount> kColorNames = {
    "black", "blue",   "brown", "green", "grey", "orange",
    "pink",  "purple", "red",   "white", "yellow",
};

inline std::string_view to_string(Color c) {
    return kColorNames[static_cast<std::size_t>(c)];
}

inline std::optional<Color> try_parse_color(std::string_view s) {
    for (std::size_t i = 0; i < kColorCount; ++i) {
        if (kColorNames[i] == s) return static_cast<Color>(i);
    }
    return std::nullopt;
}

inline Color parse_color(std::string_view s) {
    if (auto c = try_parse_color(s)) return *c;
    throw VocabularyError("unknown color \"" + std::string(s) +
                          "\": expected one of the 11 color words");
}

}  // namespace memcol
