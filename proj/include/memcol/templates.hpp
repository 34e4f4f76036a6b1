#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "memcol/color.hpp"
#include "memcol/dataset.hpp"

namespace memcol {

enum class Audience { human, model };

std::string_view to_string(Audience a);

// A cloze pattern with placeholders [DESCRIPTOR], [ITEM] and exactly one
// [MASK]. "[SEP]" is carried through verbatim; what it means is up to the
// model backend.
struct QueryTemplate {
    int id = 0;
    Audience audience = Audience::model;
    std::string pattern;
};

struct ClozeQuery {
    int template_id = 0;
    int item_index = 0;
    std::string text;
    Color gold = Color::black;
    std::array<Color, kColorCount> candidates{};

    // Stable identifier, "t<template_id>-i<item_index>".
    std::string id() const;
};

std::array<Color, kColorCount> all_colors();

// The built-in template sets: 7 for humans, 13 for models, in canonical
// order with 1-based ids.
const std::vector<QueryTemplate>& builtin_templates(Audience audience);

// Enforces the placeholder invariants (exactly one [ITEM], exactly one
// [MASK], no unknown [UPPERCASE] placeholders). Throws RenderError.
void validate_template(const QueryTemplate& t);

// Substitutes the item into the template and normalizes the result:
// single spaces, no space before punctuation, first letter uppercased,
// [MASK]/[SEP] preserved.
ClozeQuery render(const QueryTemplate& t, const MemoryColorItem& item);

// Cartesian product in template-major order.
std::vector<ClozeQuery> render_all(const std::vector<QueryTemplate>& ts,
                                   const MemoryColorsDataset& d);

// One pattern per line; blank lines and '#' comments are skipped; ids are
// assigned 1..N in file order.
std::vector<QueryTemplate> load_templates(std::istream& in, Audience audience,
                                          const std::string& source_name = "<stream>");
std::vector<QueryTemplate> load_templates_file(const std::string& path, Audience audience);

}  // namespace memcol
