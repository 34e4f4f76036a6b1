#include "memcol/templates.hpp"

#include <cctype>
#include <fstream>
#include <istream>

#include "memcol/errors.hpp"

namespace memcol {

namespace {

const char* const kModelPatterns[] = {
    "Q: What is the color of [DESCRIPTOR] [ITEM]? A: It is [MASK].",
    "Q: What is the color of [DESCRIPTOR] [ITEM]? [SEP] A: It is [MASK].",
    "Q: What is the colour of [DESCRIPTOR] [ITEM]? A: It is [MASK].",
    "What is the color of [DESCRIPTOR] [ITEM]? [MASK].",
    "What is the color of [DESCRIPTOR] [ITEM]? [SEP] [MASK].",
    "What is the colour of [DESCRIPTOR] [ITEM]? [MASK].",
    "The color of [DESCRIPTOR] [ITEM] is [MASK].",
    "The usual color of [DESCRIPTOR] [ITEM] is [MASK].",
    "[DESCRIPTOR] [ITEM] usually has the color of [MASK].",
    "What is the usual color of [DESCRIPTOR] [ITEM]? [MASK].",
    "What is the usual color of [DESCRIPTOR] [ITEM]? [SEP] [MASK].",
    "What is the typical color of [DESCRIPTOR] [ITEM]? [MASK].",
    "What is the typical color of [DESCRIPTOR] [ITEM]? [SEP] [MASK].",
};

const char* const kHumanPatterns[] = {
    "Q: What is the color of [DESCRIPTOR] [ITEM]? A: It is [MASK].",
    "What is the color of [DESCRIPTOR] [ITEM]? [MASK].",
    "The color of [DESCRIPTOR] [ITEM] is [MASK].",
    "The usual color of [DESCRIPTOR] [ITEM] is [MASK].",
    "[DESCRIPTOR] [ITEM] usually has the color of [MASK].",
    "What is the usual color of [DESCRIPTOR] [ITEM]? [MASK].",
    "What is the typical color of [DESCRIPTOR] [ITEM]? [MASK].",
};

std::vector<QueryTemplate> make_set(Audience audience, const char* const* patterns,
                                    std::size_t count) {
    std::vector<QueryTemplate> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        QueryTemplate t;
        t.id = static_cast<int>(i) + 1;
        t.audience = audience;
        t.pattern = patterns[i];
        validate_template(t);
        out.push_back(std::move(t));
    }
    return out;
}

std::size_t count_occurrences(const std::string& s, const std::string& needle) {
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = s.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

bool is_punct_close(char c) {
    return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
}

// First [UPPERCASE] bracket token that is not [MASK] or [SEP]; empty when none.
std::string find_unknown_placeholder(const std::string& s) {
    std::size_t pos = 0;
    while ((pos = s.find('[', pos)) != std::string::npos) {
        std::size_t end = pos + 1;
        while (end < s.size() && s[end] >= 'A' && s[end] <= 'Z') ++end;
        if (end > pos + 1 && end < s.size() && s[end] == ']') {
            const std::string token = s.substr(pos, end - pos + 1);
            if (token != "[MASK]" && token != "[SEP]") return token;
            pos = end + 1;
        } else {
            ++pos;
        }
    }
    return std::string();
}

}  // namespace

std::string_view to_string(Audience a) {
    return a == Audience::human ? "human" : "model";
}

std::string ClozeQuery::id() const {
    return "t" + std::to_string(template_id) + "-i" + std::to_string(item_index);
}

std::array<Color, kColorCount> all_colors() {
    std::array<Color, kColorCount> out{};
    for (std::size_t i = 0; i < kColorCount; ++i) out[i] = static_cast<Color>(i);
    return out;
}

const std::vector<QueryTemplate>& builtin_templates(Audience audience) {
    static const std::vector<QueryTemplate> model =
        make_set(Audience::model, kModelPatterns, std::size(kModelPatterns));
    static const std::vector<QueryTemplate> human =
        make_set(Audience::human, kHumanPatterns, std::size(kHumanPatterns));
    return audience == Audience::human ? human : model;
}

void validate_template(const QueryTemplate& t) {
    if (t.id <= 0) throw RenderError("template id must be positive");
    if (count_occurrences(t.pattern, "[ITEM]") != 1)
        throw RenderError("template " + std::to_string(t.id) +
                          " must contain [ITEM] exactly once: \"" + t.pattern + "\"");
    if (count_occurrences(t.pattern, "[MASK]") != 1)
        throw RenderError("template " + std::to_string(t.id) +
                          " must contain [MASK] exactly once: \"" + t.pattern + "\"");
    std::string probe = t.pattern;
    replace_all(probe, "[DESCRIPTOR]", "");
    replace_all(probe, "[ITEM]", "");
    const std::string unknown = find_unknown_placeholder(probe);
    if (!unknown.empty())
        throw RenderError("template " + std::to_string(t.id) + " contains unknown placeholder " +
                          unknown);
}

ClozeQuery render(const QueryTemplate& t, const MemoryColorItem& item) {
    validate_template(t);
    if (item.item.empty()) throw RenderError("cannot render an empty item phrase");

    std::string text = t.pattern;
    replace_all(text, "[DESCRIPTOR]", item.descriptor);
    replace_all(text, "[ITEM]", item.item);

    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        if (c == ' ' && !out.empty() && out.back() == ' ') continue;
        if (c == ' ' && out.empty()) continue;
        if (is_punct_close(c) && !out.empty() && out.back() == ' ') out.pop_back();
        out += c;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();

    const std::string leftover = find_unknown_placeholder(out);
    if (!leftover.empty())
        throw RenderError("rendered text still contains placeholder " + leftover +
                          " (template " + std::to_string(t.id) + ")");
    if (count_occurrences(out, "[MASK]") != 1)
        throw RenderError("rendered text must contain [MASK] exactly once (template " +
                          std::to_string(t.id) + ")");

    for (char& c : out) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            break;
        }
    }

    ClozeQuery q;
    q.template_id = t.id;
    q.item_index = item.index;
    q.text = std::move(out);
    q.gold = item.color;
    q.candidates = all_colors();
    return q;
}

std::vector<ClozeQuery> render_all(const std::vector<QueryTemplate>& ts,
                                   const MemoryColorsDataset& d) {
    std::vector<ClozeQuery> out;
    out.reserve(ts.size() * d.size());
    for (const auto& t : ts) {
        for (const auto& item : d.items) {
            try {
                out.push_back(render(t, item));
            } catch (const RenderError& e) {
                throw RenderError("template " + std::to_string(t.id) + ", item " +
                                  std::to_string(item.index) + ": " + e.what());
            }
        }
    }
    return out;
}

std::vector<QueryTemplate> load_templates(std::istream& in, Audience audience,
                                          const std::string& source_name) {
    std::vector<QueryTemplate> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t b = line.find_first_not_of(" \t");
        if (b == std::string::npos || line[b] == '#') continue;
        std::size_t e = line.find_last_not_of(" \t");
        QueryTemplate t;
        t.id = static_cast<int>(out.size()) + 1;
        t.audience = audience;
        t.pattern = line.substr(b, e - b + 1);
        try {
            validate_template(t);
        } catch (const RenderError& err) {
            throw RenderError(source_name + ":" + std::to_string(lineno) + ": " + err.what());
        }
        out.push_back(std::move(t));
    }
    if (out.empty()) throw ParseError(source_name + ": no templates found");
    return out;
}

std::vector<QueryTemplate> load_templates_file(const std::string& path, Audience audience) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    return load_templates(in, audience, path);
}

}  // namespace memcol
