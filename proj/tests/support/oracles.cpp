#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <regex>

namespace sysfb::test::oracle {

std::vector<std::string> tokens(const std::string& text) {
    std::string lower = text;
    for (auto& c : lower) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    static const std::regex word("[a-z0-9]+('[a-z0-9]+)*");
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(lower.begin(), lower.end(), word); it != std::sregex_iterator(); ++it) {
        out.push_back(it->str());
    }
    return out;
}

namespace {

bool same_gram(const std::vector<std::string>& a, std::size_t i, const std::vector<std::string>& b, std::size_t j,
               std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
        if (a[i + k] != b[j + k]) return false;
    }
    return true;
}

std::size_t occurrences(const std::vector<std::string>& hay, const std::vector<std::string>& needle_src,
                        std::size_t at, std::size_t n) {
    std::size_t count = 0;
    for (std::size_t j = 0; j + n <= hay.size(); ++j) count += same_gram(hay, j, needle_src, at, n);
    return count;
}

// Sum over distinct candidate n-grams of min(count in candidate, count in reference).
std::size_t clipped_matches(const std::vector<std::string>& c, const std::vector<std::string>& r, std::size_t n) {
    std::size_t total = 0;
    for (std::size_t i = 0; i + n <= c.size(); ++i) {
        bool first = true;
        for (std::size_t p = 0; p < i; ++p) {
            if (same_gram(c, p, c, i, n)) {
                first = false;
                break;
            }
        }
        if (!first) continue;
        total += std::min(occurrences(c, c, i, n), occurrences(r, c, i, n));
    }
    return total;
}

}  // namespace

double bleu4(const std::vector<std::string>& c, const std::vector<std::string>& r) {
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        const double grams = c.size() >= n ? static_cast<double>(c.size() - n + 1) : 0.0;
        double p = grams > 0 ? static_cast<double>(clipped_matches(c, r, n)) / grams : 0.0;
        if (p < 0.01) p = 0.01;
        log_sum += std::log(p);
    }
    const double bp = c.size() >= r.size() ? 1.0 : std::exp(1.0 - static_cast<double>(r.size()) / c.size());
    return bp * std::exp(log_sum / 4.0);
}

double rouge2_f1(const std::vector<std::string>& c, const std::vector<std::string>& r) {
    if (c.size() < 2 || r.size() < 2) return 0.0;
    const double overlap = static_cast<double>(clipped_matches(c, r, 2));
    if (overlap == 0.0) return 0.0;
    const double precision = overlap / static_cast<double>(c.size() - 1);
    const double recall = overlap / static_cast<double>(r.size() - 1);
    return 2.0 * precision * recall / (precision + recall);
}

double non_copy(const std::string& query, const std::string& question) {
    return 1.0 / bleu4(tokens(query), tokens(question));
}

double readability(const std::string& query, const std::vector<std::string>& words, double C) {
    const auto toks = tokens(query);
    double sum = 0.0;
    for (const auto& t : toks) {
        std::size_t rank = words.size() + 1;
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (words[i] == t) {
                rank = i + 1;
                break;
            }
        }
        sum += static_cast<double>(rank);
    }
    return C * static_cast<double>(toks.size()) / sum;
}

double conciseness(const std::string& query) { return 100.0 / static_cast<double>(tokens(query).size()); }

double groundedness(const std::string& response, const std::vector<std::string>& documents) {
    double best = 0.0;
    for (const auto& d : documents) best = std::max(best, rouge2_f1(tokens(response), tokens(d)));
    return best;
}

Calibration calibrate(const std::vector<std::pair<double, bool>>& scored, double target) {
    std::size_t positives = 0;
    for (const auto& [s, y] : scored) positives += y;
    Calibration best;
    for (const auto& [t, unused] : scored) {
        std::size_t tp = 0, taken = 0;
        for (const auto& [s, y] : scored) {
            if (s >= t) {
                ++taken;
                tp += y;
            }
        }
        const double precision = static_cast<double>(tp) / static_cast<double>(taken);
        if (precision >= target && (!best.qualified || t < best.threshold)) {
            best.qualified = true;
            best.threshold = t;
            best.precision = precision;
            best.recall = positives ? static_cast<double>(tp) / static_cast<double>(positives) : 0.0;
        }
    }
    return best;
}

std::string percent2(long long count, long long total) {
    const long long hundredths = (count * 20000 + total) / (2 * total);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld.%02lld", hundredths / 100, hundredths % 100);
    return buf;
}

}  // namespace sysfb::test::oracle
