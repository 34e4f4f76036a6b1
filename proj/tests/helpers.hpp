#pragma once

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "memcol/dataset.hpp"
#include "memcol/errors.hpp"

namespace memcol::testing {

// Directory with the bundled data files. Taken from MEMCOL_DATA_DIR when set
// (ctest sets it); otherwise searched upward from the working directory.
inline std::string data_dir() {
    if (const char* env = std::getenv("MEMCOL_DATA_DIR")) return env;
    namespace fs = std::filesystem;
    fs::path p = fs::current_path();
    for (int depth = 0; depth < 6; ++depth) {
        const fs::path candidate = p / "data" / "memory-colors.csv";
        if (fs::exists(candidate)) return (p / "data").string();
        if (!p.has_parent_path() || p.parent_path() == p) break;
        p = p.parent_path();
    }
    throw ConfigError("cannot locate the data directory; set MEMCOL_DATA_DIR");
}

inline MemoryColorsDataset load_bundled_dataset() {
    return load_dataset_file(data_dir() + "/memory-colors.csv");
}

// Builds a complete matrix from per-item response rows.
inline AnnotationMatrix make_matrix(const std::vector<std::string>& items,
                                    const std::vector<std::vector<Color>>& rows) {
    AnnotationMatrix m;
    m.items = items;
    const std::size_t n = rows.empty() ? 0 : rows[0].size();
    for (std::size_t j = 0; j < n; ++j) m.annotators.push_back("a" + std::to_string(j + 1));
    for (const auto& row : rows)
        for (Color c : row) m.responses.push_back(c);
    return m;
}

// Synthetic annotation run shaped like the published one: 121 candidate
// items judged by 11 annotators, 12 of which miss the 8-vote bar, leaving
// 109 with top-vote counts {11: 60, 10: 32, 9: 7, 8: 10}. The majority
// colors of the retained items are the bundled dataset's colors, so the
// marginal color distribution is realistic.
struct SyntheticAnnotations {
    AnnotationMatrix full;      // all 121 items
    AnnotationMatrix retained;  // the 109 items with top count >= 8
};

inline SyntheticAnnotations make_synthetic_annotations() {
    const MemoryColorsDataset bundled = load_bundled_dataset();
    const std::size_t kept = bundled.size();  // 109
    const std::size_t annotators = 11;

    std::vector<int> levels;
    for (int i = 0; i < 60; ++i) levels.push_back(11);
    for (int i = 0; i < 32; ++i) levels.push_back(10);
    for (int i = 0; i < 7; ++i) levels.push_back(9);
    for (int i = 0; i < 10; ++i) levels.push_back(8);

    SyntheticAnnotations out;
    for (std::size_t j = 0; j < annotators; ++j) {
        out.full.annotators.push_back("a" + std::to_string(j + 1));
        out.retained.annotators.push_back("a" + std::to_string(j + 1));
    }

    auto emit = [&](AnnotationMatrix& m, const std::string& name, Color majority, Color minority,
                    int top, std::size_t phase) {
        m.items.push_back(name);
        std::vector<Color> row(annotators, majority);
        for (int k = 0; k < static_cast<int>(annotators) - top; ++k)
            row[(phase + static_cast<std::size_t>(k)) % annotators] = minority;
        for (Color c : row) m.responses.push_back(c);
    };

    for (std::size_t i = 0; i < kept; ++i) {
        // 37 is coprime to 109, scattering agreement levels across colors.
        const int top = levels[(i * 37) % kept];
        const Color majority = bundled.items[i].color;
        const auto minority =
            static_cast<Color>((static_cast<std::size_t>(majority) + 1) % kColorCount);
        emit(out.full, bundled.items[i].item, majority, minority, top, i);
        emit(out.retained, bundled.items[i].item, majority, minority, top, i);
    }
    for (std::size_t i = 0; i < 12; ++i) {
        const auto majority = static_cast<Color>(i % kColorCount);
        const auto minority =
            static_cast<Color>((static_cast<std::size_t>(majority) + 5) % kColorCount);
        emit(out.full, "dropped" + std::to_string(i + 1), majority, minority, 7, i);
    }
    return out;
}

}  // namespace memcol::testing
