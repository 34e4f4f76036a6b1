#include "memcol/dataset.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include "memcol/errors.hpp"
#include "memcol/rng.hpp"

namespace memcol {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// One CSV line into fields; double-quoted fields may contain commas and
// doubled quotes.
std::vector<std::string> split_csv(const std::string& line, const std::string& where) {
    std::vector<std::string> out;
    std::string cur;
    std::size_t i = 0;
    const std::size_t n = line.size();
    for (;;) {
        cur.clear();
        if (i < n && line[i] == '"') {
            ++i;
            for (;;) {
                if (i >= n) throw ParseError(where + ": unterminated quoted field");
                if (line[i] == '"') {
                    if (i + 1 < n && line[i + 1] == '"') {
                        cur += '"';
                        i += 2;
                    } else {
                        ++i;
                        break;
                    }
                } else {
                    cur += line[i++];
                }
            }
            if (i < n && line[i] != ',')
                throw ParseError(where + ": unexpected character after closing quote");
        } else {
            while (i < n && line[i] != ',') cur += line[i++];
        }
        out.push_back(cur);
        if (i >= n) break;
        ++i;
    }
    return out;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        out += c;
    }
    out += '"';
    return out;
}

bool read_logical_line(std::istream& in, std::string& line, int& lineno) {
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string probe = trim(line);
        if (probe.empty() || probe[0] == '#') continue;
        return true;
    }
    return false;
}

}  // namespace

MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd r;
    if (xs.empty()) return r;
    double sum = 0.0;
    for (double x : xs) sum += x;
    r.mean = sum / static_cast<double>(xs.size());
    if (xs.size() < 2) return r;
    double ss = 0.0;
    for (double x : xs) {
        const double d = x - r.mean;
        ss += d * d;
    }
    r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    return r;
}

MemoryColorsDataset load_dataset(std::istream& in, const std::string& source_name) {
    MemoryColorsDataset d;
    std::string line;
    int lineno = 0;

    if (!read_logical_line(in, line, lineno))
        throw ParseError(source_name + ": empty input, expected a header row");
    const std::string header_where = source_name + ":" + std::to_string(lineno);
    auto header = split_csv(line, header_where);
    for (auto& h : header) h = lower(trim(h));
    bool has_image_ref = false;
    const bool base_ok = header.size() >= 4 && header[0] == "index" &&
                         header[1] == "descriptor" && header[2] == "item" &&
                         header[3] == "color";
    if (base_ok && header.size() == 4) {
        has_image_ref = false;
    } else if (base_ok && header.size() == 5 && header[4] == "image_ref") {
        has_image_ref = true;
    } else {
        throw ParseError(header_where + ": expected header index,descriptor,item,color[,image_ref]");
    }

    std::set<int> seen;
    while (read_logical_line(in, line, lineno)) {
        const std::string where = source_name + ":" + std::to_string(lineno);
        auto fields = split_csv(line, where);
        const std::size_t want = has_image_ref ? 5u : 4u;
        if (fields.size() != want)
            throw ParseError(where + ": expected " + std::to_string(want) + " fields, got " +
                             std::to_string(fields.size()));
        MemoryColorItem it;
        const std::string idx_s = trim(fields[0]);
        int idx = 0;
        const auto res = std::from_chars(idx_s.data(), idx_s.data() + idx_s.size(), idx);
        if (res.ec != std::errc() || res.ptr != idx_s.data() + idx_s.size() || idx <= 0)
            throw ParseError(where + ": index must be a positive integer, got '" + idx_s + "'");
        if (!seen.insert(idx).second)
            throw ParseError(where + ": duplicate index " + std::to_string(idx));
        it.index = idx;
        it.descriptor = trim(fields[1]);
        it.item = lower(trim(fields[2]));
        if (it.item.empty()) throw ParseError(where + ": empty item");
        const std::string color_s = lower(trim(fields[3]));
        const auto c = try_parse_color(color_s);
        if (!c) throw VocabularyError(where + ": unknown color '" + color_s + "'");
        it.color = *c;
        if (has_image_ref) it.image_ref = trim(fields[4]);
        d.items.push_back(std::move(it));
    }
    return d;
}

MemoryColorsDataset load_dataset_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    return load_dataset(in, path);
}

void save_dataset(const MemoryColorsDataset& d, std::ostream& out) {
    bool any_image = false;
    for (const auto& it : d.items)
        if (!it.image_ref.empty()) any_image = true;
    out << (any_image ? "index,descriptor,item,color,image_ref\n" : "index,descriptor,item,color\n");
    for (const auto& it : d.items) {
        out << it.index << ',' << csv_escape(it.descriptor) << ',' << csv_escape(it.item) << ','
            << to_string(it.color);
        if (any_image) out << ',' << csv_escape(it.image_ref);
        out << '\n';
    }
}

AnnotationsWithDescriptors load_annotations_with_descriptors(std::istream& in,
                                                             const std::string& source_name) {
    AnnotationsWithDescriptors out;
    AnnotationMatrix& m = out.matrix;
    std::string line;
    int lineno = 0;

    if (!read_logical_line(in, line, lineno))
        throw ParseError(source_name + ": empty input, expected a header row");
    const std::string header_where = source_name + ":" + std::to_string(lineno);
    auto header = split_csv(line, header_where);
    if (header.size() < 2)
        throw ParseError(header_where + ": expected item[,descriptor],<annotators...>");
    if (lower(trim(header[0])) != "item")
        throw ParseError(header_where + ": first column must be 'item'");
    std::size_t first_annotator = 1;
    bool has_descriptor = false;
    if (header.size() >= 2 && lower(trim(header[1])) == "descriptor") {
        has_descriptor = true;
        first_annotator = 2;
    }
    if (header.size() <= first_annotator)
        throw ParseError(header_where + ": no annotator columns");
    for (std::size_t j = first_annotator; j < header.size(); ++j) {
        const std::string id = trim(header[j]);
        if (id.empty()) throw ParseError(header_where + ": empty annotator id");
        m.annotators.push_back(id);
    }

    std::set<std::string> seen;
    while (read_logical_line(in, line, lineno)) {
        const std::string where = source_name + ":" + std::to_string(lineno);
        auto fields = split_csv(line, where);
        if (fields.size() != header.size())
            throw ParseError(where + ": expected " + std::to_string(header.size()) +
                             " fields, got " + std::to_string(fields.size()));
        const std::string item = lower(trim(fields[0]));
        if (item.empty()) throw ParseError(where + ": empty item");
        if (!seen.insert(item).second) throw ParseError(where + ": duplicate item '" + item + "'");
        m.items.push_back(item);
        out.descriptors.push_back(has_descriptor ? trim(fields[1]) : std::string());
        for (std::size_t j = first_annotator; j < fields.size(); ++j) {
            const std::string cell = lower(trim(fields[j]));
            if (cell.empty())
                throw ParseError(where + ": empty cell for annotator '" +
                                 m.annotators[j - first_annotator] + "'");
            const auto c = try_parse_color(cell);
            if (!c) throw VocabularyError(where + ": unknown color '" + cell + "'");
            m.responses.push_back(*c);
        }
    }
    return out;
}

AnnotationMatrix load_annotations(std::istream& in, const std::string& source_name) {
    return load_annotations_with_descriptors(in, source_name).matrix;
}

AnnotationMatrix load_annotations_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    return load_annotations(in, path);
}

namespace {

std::array<int, kColorCount> item_counts(const AnnotationMatrix& a, std::size_t i) {
    std::array<int, kColorCount> counts{};
    for (std::size_t j = 0; j < a.annotator_count(); ++j)
        counts[static_cast<int>(a.response(i, j))]++;
    return counts;
}

void check_complete(const AnnotationMatrix& a) {
    if (a.responses.size() != a.item_count() * a.annotator_count())
        throw ShapeError("annotation matrix is incomplete: " + std::to_string(a.responses.size()) +
                         " responses for " + std::to_string(a.item_count()) + " items x " +
                         std::to_string(a.annotator_count()) + " annotators");
}

}  // namespace

MemoryColorsDataset aggregate_annotations(const AnnotationsWithDescriptors& aw,
                                          const AggregationConfig& cfg) {
    const AnnotationMatrix& a = aw.matrix;
    check_complete(a);
    const int n = static_cast<int>(a.annotator_count());
    if (cfg.annotator_count != n)
        throw ConfigError("configured annotator count " + std::to_string(cfg.annotator_count) +
                          " does not match the matrix (" + std::to_string(n) + ")");
    if (cfg.threshold <= 0 || cfg.threshold > n)
        throw ConfigError("threshold must be in [1, " + std::to_string(n) + "]");
    const int strict = n / 2 + 1;
    if (cfg.threshold < strict)
        throw ConfigError("threshold " + std::to_string(cfg.threshold) +
                          " admits ties; the minimum for a unique winner is " +
                          std::to_string(strict));

    MemoryColorsDataset d;
    for (std::size_t i = 0; i < a.item_count(); ++i) {
        const auto counts = item_counts(a, i);
        int best = 0;
        for (int c = 1; c < static_cast<int>(kColorCount); ++c)
            if (counts[c] > counts[best]) best = c;
        if (counts[best] < cfg.threshold) continue;
        MemoryColorItem it;
        it.index = static_cast<int>(d.items.size()) + 1;
        it.descriptor = aw.descriptors.empty() ? std::string() : aw.descriptors[i];
        it.item = a.items[i];
        it.color = static_cast<Color>(best);
        d.items.push_back(std::move(it));
    }
    return d;
}

MemoryColorsDataset aggregate_annotations(const AnnotationMatrix& a, const AggregationConfig& cfg) {
    AnnotationsWithDescriptors aw;
    aw.matrix = a;
    return aggregate_annotations(aw, cfg);
}

std::map<int, int> vote_histogram(const AnnotationMatrix& a, int min_count) {
    check_complete(a);
    std::map<int, int> h;
    for (std::size_t i = 0; i < a.item_count(); ++i) {
        const auto counts = item_counts(a, i);
        int top = 0;
        for (int c = 0; c < static_cast<int>(kColorCount); ++c)
            if (counts[c] > top) top = counts[c];
        if (top >= min_count) h[top]++;
    }
    return h;
}

double fleiss_kappa(const AnnotationMatrix& a) {
    const std::size_t item_n = a.item_count();
    const std::size_t rater_n = a.annotator_count();
    if (rater_n < 2) throw ConfigError("fleiss_kappa needs at least 2 annotators");
    if (item_n < 1) throw ConfigError("fleiss_kappa needs at least 1 item");
    check_complete(a);

    std::array<double, kColorCount> totals{};
    double pbar_sum = 0.0;
    const double n = static_cast<double>(rater_n);
    for (std::size_t i = 0; i < item_n; ++i) {
        const auto counts = item_counts(a, i);
        double s = 0.0;
        for (std::size_t c = 0; c < kColorCount; ++c) {
            s += static_cast<double>(counts[c]) * static_cast<double>(counts[c]);
            totals[c] += static_cast<double>(counts[c]);
        }
        pbar_sum += (s - n) / (n * (n - 1.0));
    }
    const double pbar = pbar_sum / static_cast<double>(item_n);
    double pe = 0.0;
    const double total = static_cast<double>(item_n) * n;
    for (std::size_t c = 0; c < kColorCount; ++c) {
        const double p = totals[c] / total;
        pe += p * p;
    }
    const double denom = 1.0 - pe;
    if (denom <= 0.0) return 1.0;
    return (pbar - pe) / denom;
}

MeanStd human_baseline(const AnnotationMatrix& a, const MemoryColorsDataset& d) {
    check_complete(a);
    if (d.items.empty()) throw ConfigError("human_baseline needs a non-empty dataset");
    if (a.annotator_count() == 0) throw ConfigError("human_baseline needs at least 1 annotator");

    std::unordered_map<std::string, std::size_t> row;
    row.reserve(a.item_count());
    for (std::size_t i = 0; i < a.item_count(); ++i) row[a.items[i]] = i;
    std::vector<std::size_t> rows;
    rows.reserve(d.size());
    for (const auto& it : d.items) {
        const auto f = row.find(it.item);
        if (f == row.end())
            throw CoverageError("item '" + it.item + "' has no annotations");
        rows.push_back(f->second);
    }

    std::vector<double> accs(a.annotator_count(), 0.0);
    for (std::size_t j = 0; j < a.annotator_count(); ++j) {
        int correct = 0;
        for (std::size_t k = 0; k < d.size(); ++k)
            if (a.response(rows[k], j) == d.items[k].color) ++correct;
        accs[j] = static_cast<double>(correct) / static_cast<double>(d.size());
    }
    return mean_std(accs);
}

Color majority_color(const MemoryColorsDataset& d) {
    if (d.items.empty()) throw ConfigError("majority_color needs a non-empty dataset");
    std::array<int, kColorCount> counts{};
    for (const auto& it : d.items) counts[static_cast<int>(it.color)]++;
    int best = 0;
    for (int c = 1; c < static_cast<int>(kColorCount); ++c)
        if (counts[c] > counts[best]) best = c;
    return static_cast<Color>(best);
}

double majority_baseline(const MemoryColorsDataset& d) {
    if (d.items.empty()) throw ConfigError("majority_baseline needs a non-empty dataset");
    const Color best = majority_color(d);
    int count = 0;
    for (const auto& it : d.items)
        if (it.color == best) ++count;
    return static_cast<double>(count) / static_cast<double>(d.size());
}

MeanStd random_baseline(const MemoryColorsDataset& d, int trials, std::uint64_t seed) {
    if (trials < 1) throw ConfigError("random_baseline needs trials >= 1");
    if (d.items.empty()) throw ConfigError("random_baseline needs a non-empty dataset");
    Rng rng(seed);
    std::vector<double> accs(static_cast<std::size_t>(trials), 0.0);
    for (int t = 0; t < trials; ++t) {
        int correct = 0;
        for (const auto& it : d.items) {
            const auto guess = static_cast<Color>(rng.below(kColorCount));
            if (guess == it.color) ++correct;
        }
        accs[static_cast<std::size_t>(t)] =
            static_cast<double>(correct) / static_cast<double>(d.size());
    }
    return mean_std(accs);
}

std::map<Color, int> color_histogram(const MemoryColorsDataset& d) {
    std::map<Color, int> h;
    for (std::size_t c = 0; c < kColorCount; ++c) h[static_cast<Color>(c)] = 0;
    for (const auto& it : d.items) h[it.color]++;
    return h;
}

}  // namespace memcol
