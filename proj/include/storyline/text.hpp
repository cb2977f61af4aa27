#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "storyline/wordlists.hpp"

namespace storyline {

/// Bytes >= 0x80 count as word characters so multi-byte UTF-8 words stay
/// whole; ASCII is split on anything that is not a letter or digit.
inline bool is_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

/// Lowercase, split on non-alphanumerics. Stopwords are kept.
inline std::vector<std::string> raw_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (is_word_byte(c)) {
            cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        out.push_back(std::move(cur));
    }
    return out;
}

/// Retrieval tokenization: raw tokens with stopwords dropped.
inline std::vector<std::string> index_tokens(std::string_view text) {
    std::vector<std::string> out;
    for (auto& t : raw_tokens(text)) {
        if (!stopwords().contains(t)) {
            out.push_back(std::move(t));
        }
    }
    return out;
}

/// Removes URLs, @mentions and #hashtags; what remains is prose.
inline std::string strip_social_markup(std::string_view text) {
    std::string out;
    std::size_t i = 0;
    auto token_end = [&](std::size_t from) {
        while (from < text.size() && text[from] != ' ' && text[from] != '\t' && text[from] != '\n') ++from;
        return from;
    };
    while (i < text.size()) {
        const bool at_word_start = i == 0 || text[i - 1] == ' ' || text[i - 1] == '\t' || text[i - 1] == '\n';
        if (at_word_start && (text.substr(i, 7) == "http://" || text.substr(i, 8) == "https://" ||
                              text.substr(i, 4) == "www." || text[i] == '@' || text[i] == '#')) {
            i = token_end(i);
            out.push_back(' ');
            continue;
        }
        out.push_back(text[i]);
        ++i;
    }
    return out;
}

struct EnglishCheck {
    std::size_t tokens = 0;
    std::size_t known = 0;
    double ratio() const { return tokens == 0 ? 0.0 : static_cast<double>(known) / tokens; }
};

inline EnglishCheck english_check(std::string_view text) {
    EnglishCheck c;
    for (const auto& t : raw_tokens(strip_social_markup(text))) {
        ++c.tokens;
        if (is_english_word(t)) ++c.known;
    }
    return c;
}

/// Passes when at least min_ratio of the prose tokens are known English words.
/// Text with no prose tokens (only links, tags, mentions) is given the benefit
/// of the doubt.
inline bool looks_english(std::string_view text, double min_ratio = 0.25) {
    const auto c = english_check(text);
    return c.tokens == 0 || c.ratio() >= min_ratio;
}

}  // namespace storyline
