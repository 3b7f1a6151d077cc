#pragma once

#include <cctype>
#include <string>
#include <vector>

namespace spur {

inline std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::vector<std::string> split_whitespace(const std::string& text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) tokens.push_back(text.substr(start, i - start));
    }
    return tokens;
}

inline std::size_t word_count(const std::string& text) {
    return split_whitespace(text).size();
}

inline bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

// Case-insensitive whole-word containment: "number" matches "Number," but
// not "outnumbered".
inline bool contains_whole_word(const std::string& text, const std::string& word) {
    if (word.empty()) return false;
    const std::string haystack = to_lower(text);
    const std::string needle = to_lower(word);
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
        const std::size_t end = pos + needle.size();
        const bool right_ok = end == haystack.size() || !is_word_char(haystack[end]);
        if (left_ok && right_ok) return true;
        pos += 1;
    }
    return false;
}

// Lowercased, single-space-separated form used for deduplication.
inline std::string dedup_key(const std::string& text) {
    std::string out;
    for (const std::string& tok : split_whitespace(text)) {
        if (!out.empty()) out += ' ';
        out += to_lower(tok);
    }
    return out;
}

// Token with leading/trailing non-alphanumeric characters removed.
inline std::string strip_edge_punct(const std::string& token) {
    std::size_t b = 0, e = token.size();
    while (b < e && !is_word_char(token[b])) ++b;
    while (e > b && !is_word_char(token[e - 1])) --e;
    return token.substr(b, e - b);
}

inline bool all_alphabetic(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isalpha(static_cast<unsigned char>(c))) return false;
    return true;
}

} // namespace spur
