#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace memcol {

// Porter stemming, classic 5-step definition as distributed in the
// reference C implementation: its two revisions (-bli/-logi in step 2) and
// the rule that words of length <= 2 are returned unchanged are included.
// Input is expected lowercase; bytes outside a-z are treated as consonants.
std::string porter_stem(std::string_view token);

std::vector<std::string> porter_stem_all(const std::vector<std::string>& tokens);

// Bounded memoization around porter_stem. Clears itself when full, so the
// footprint stays fixed on unbounded token streams.
class StemCache {
public:
    explicit StemCache(std::size_t max_entries = 1u << 20) : max_(max_entries) {}

    const std::string& stem(const std::string& token) {
        auto it = map_.find(token);
        if (it != map_.end()) return it->second;
        if (map_.size() >= max_) map_.clear();
        return map_.emplace(token, porter_stem(token)).first->second;
    }

    std::size_t size() const { return map_.size(); }

private:
    std::size_t max_;
    std::unordered_map<std::string, std::string> map_;
};

}  // namespace memcol
