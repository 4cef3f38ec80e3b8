#include "sysfb/text_analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "sysfb/errors.hpp"

namespace sysfb {
namespace {

struct CodePoint {
    char32_t value;
    std::size_t length;
};

// Invalid bytes decode as U+FFFD of length 1 so tokenization never stalls.
CodePoint decode(std::string_view s, std::size_t i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) return {b0, 1};
    std::size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return {0xFFFD, 1};
    }
    if (i + len > s.size()) return {0xFFFD, 1};
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80) return {0xFFFD, 1};
        cp = (cp << 6) | (b & 0x3F);
    }
    return {cp, len};
}

void encode(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_space(char32_t c) {
    return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
           (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
           c == 0x205F || c == 0x3000;
}

// No ICU here: ASCII is classified exactly; above ASCII everything outside the
// common punctuation/symbol blocks counts as a word character.
bool is_alnum(char32_t c) {
    if (c < 0x80) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    }
    if (is_space(c)) return false;
    if (c >= 0x80 && c <= 0xBF) return false;              // Latin-1 controls, punctuation
    if (c == 0xD7 || c == 0xF7) return false;              // multiplication, division
    if (c >= 0x2000 && c <= 0x2BFF) return false;          // punctuation, symbols, arrows
    if (c >= 0x3000 && c <= 0x303F) return false;          // CJK punctuation
    if (c >= 0xFE30 && c <= 0xFE4F) return false;          // CJK compatibility forms
    if (c >= 0xFF00 && c <= 0xFF0F) return false;          // fullwidth punctuation
    if (c == 0xFFFD) return false;
    if (c >= 0x1F000 && c <= 0x1FAFF) return false;        // emoji
    return true;
}

bool is_apostrophe(char32_t c) { return c == U'\'' || c == 0x2019; }

char32_t to_lower(char32_t c) {
    if (c >= 'A' && c <= 'Z') return c + 32;
    if ((c >= 0xC0 && c <= 0xDE) && c != 0xD7) return c + 32;
    if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;  // Greek
    if (c >= 0x410 && c <= 0x42F) return c + 32;                // Cyrillic
    return c;
}

using NgramCounts = std::map<std::vector<std::string_view>, std::size_t>;

NgramCounts ngrams(const Tokens& tokens, std::size_t n) {
    NgramCounts counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::vector<std::string_view> gram(tokens.begin() + i, tokens.begin() + i + n);
        ++counts[std::move(gram)];
    }
    return counts;
}

}  // namespace

std::string trim(std::string_view text) {
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end) {
        auto cp = decode(text, begin);
        if (!is_space(cp.value)) break;
        begin += cp.length;
    }
    // Walk forward remembering the end of the last non-space code point.
    std::size_t last_end = begin;
    for (std::size_t i = begin; i < end;) {
        auto cp = decode(text, i);
        i += cp.length;
        if (!is_space(cp.value)) last_end = i;
    }
    return std::string(text.substr(begin, last_end - begin));
}

Tokens tokenize(std::string_view text) {
    Tokens tokens;
    std::string current;
    bool prev_alnum = false;
    for (std::size_t i = 0; i < text.size();) {
        auto cp = decode(text, i);
        i += cp.length;
        if (is_alnum(cp.value)) {
            encode(to_lower(cp.value), current);
            prev_alnum = true;
            continue;
        }
        if (is_apostrophe(cp.value) && prev_alnum && i < text.size() && is_alnum(decode(text, i).value)) {
            current.push_back('\'');
            prev_alnum = false;
            continue;
        }
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
        prev_alnum = false;
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

double bleu4(const Tokens& candidate, const Tokens& reference) {
    if (candidate.empty() || reference.empty()) {
        throw DomainError("bleu4 needs non-empty candidate and reference");
    }
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        const auto cand = ngrams(candidate, n);
        const auto ref = ngrams(reference, n);
        std::size_t total = 0;
        std::size_t clipped = 0;
        for (const auto& [gram, count] : cand) {
            total += count;
            auto it = ref.find(gram);
            if (it != ref.end()) clipped += std::min(count, it->second);
        }
        // A candidate shorter than n has no n-grams; that precision is 0.
        double precision = total ? static_cast<double>(clipped) / static_cast<double>(total) : 0.0;
        log_sum += std::log(std::max(precision, kBleuPrecisionFloor));
    }
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(reference.size());
    const double brevity = std::exp(std::min(0.0, 1.0 - r / c));
    return brevity * std::exp(log_sum / 4.0);
}

double rouge2_f1(const Tokens& candidate, const Tokens& reference) {
    const auto cand = ngrams(candidate, 2);
    const auto ref = ngrams(reference, 2);
    if (cand.empty() || ref.empty()) return 0.0;
    std::size_t overlap = 0;
    for (const auto& [gram, count] : cand) {
        auto it = ref.find(gram);
        if (it != ref.end()) overlap += std::min(count, it->second);
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / static_cast<double>(candidate.size() - 1);
    const double recall = static_cast<double>(overlap) / static_cast<double>(reference.size() - 1);
    return 2.0 * precision * recall / (precision + recall);
}

WordFrequencyTable::WordFrequencyTable(const std::vector<std::string>& words_by_frequency) {
    rank_of_.reserve(words_by_frequency.size());
    for (const auto& word : words_by_frequency) {
        // Keys must match tokenizer output; multi-token entries can never match
        // a token and are kept verbatim only to hold their rank.
        auto toks = tokenize(word);
        std::string key = toks.size() == 1 ? toks.front() : word;
        if (!rank_of_.emplace(key, rank_of_.size() + 1).second) {
            throw ValidationError("duplicate word in frequency table: " + word);
        }
    }
    size_ = rank_of_.size();
}

std::size_t WordFrequencyTable::rank(std::string_view word) const {
    auto it = rank_of_.find(std::string(word));
    if (it == rank_of_.end()) {
        auto toks = tokenize(word);
        if (toks.size() == 1) it = rank_of_.find(toks.front());
    }
    return it == rank_of_.end() ? oov_rank() : it->second;
}

WordFrequencyTable load_frequency_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open frequency table: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty frequency table", 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line != "word,count") throw ParseError("expected header \"word,count\"", line_no);

    std::vector<std::string> words;
    std::uint64_t previous = UINT64_MAX;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos || comma == 0) throw ParseError("expected word,count", line_no);
        std::uint64_t count = 0;
        const char* first = line.data() + comma + 1;
        const char* last = line.data() + line.size();
        auto [ptr, ec] = std::from_chars(first, last, count);
        if (ec != std::errc{} || ptr != last || first == last) {
            throw ParseError("count is not a non-negative integer", line_no);
        }
        if (count > previous) {
            throw ValidationError("line " + std::to_string(line_no) + ": counts must be non-increasing");
        }
        previous = count;
        words.push_back(line.substr(0, comma));
    }
    return WordFrequencyTable(words);
}

}  // namespace sysfb
