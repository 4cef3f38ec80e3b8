#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sysfb {

using Tokens = std::vector<std::string>;

/// Floor applied to each modified n-gram precision before the geometric mean.
inline constexpr double kBleuPrecisionFloor = 0.01;

/// Strips leading/trailing Unicode whitespace from UTF-8 text.
std::string trim(std::string_view text);

/// Lowercased word tokens. Any maximal run of non-alphanumeric code points
/// separates tokens, except an apostrophe (' or U+2019) with alphanumerics
/// on both sides, which stays inside the token as '.
Tokens tokenize(std::string_view text);

/// Smoothed sentence BLEU-4 of one candidate against one reference.
/// Throws DomainError on an empty side.
double bleu4(const Tokens& candidate, const Tokens& reference);

/// ROUGE-2 F1 over bigram multisets; 0 when either side has no bigram.
double rouge2_f1(const Tokens& candidate, const Tokens& reference);

class WordFrequencyTable {
public:
    WordFrequencyTable() = default;
    /// Words in descending frequency order; position i gets rank i+1.
    /// Words are lowercased; a repeated word throws ValidationError.
    explicit WordFrequencyTable(const std::vector<std::string>& words_by_frequency);

    std::size_t rank(std::string_view word) const;
    std::size_t size() const noexcept { return size_; }
    std::size_t oov_rank() const noexcept { return size_ + 1; }

private:
    std::unordered_map<std::string, std::size_t> rank_of_;
    std::size_t size_ = 0;
};

/// Reads a "word,count" CSV with counts in non-increasing order.
WordFrequencyTable load_frequency_table(const std::filesystem::path& path);

}  // namespace sysfb
