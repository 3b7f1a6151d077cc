#include "spur/extraction.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>

namespace spur {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string strip_edges(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Multi-byte currency prefixes we tolerate in front of a numeric answer.
const char* kCurrencyPrefixes[] = {"$", "\xE2\x82\xAC" /* euro */, "\xC2\xA3" /* pound */};

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    for (auto& l : lines)
        if (!l.empty() && l.back() == '\r') l.pop_back();
    return lines;
}

bool iequals_prefix_after_ws(const std::string& line, const std::string& prefix,
                             std::size_t* rest_pos) {
    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (line.size() - i < prefix.size()) return false;
    for (std::size_t k = 0; k < prefix.size(); ++k) {
        if (std::tolower(static_cast<unsigned char>(line[i + k])) !=
            std::tolower(static_cast<unsigned char>(prefix[k])))
            return false;
    }
    *rest_pos = i + prefix.size();
    return true;
}

ExtractedAnswer normalize_letter(const std::string& raw, const std::string& line) {
    std::string s = strip_edges(raw);
    // Peel decoration like "(B)", "B.", "*B*".
    auto is_noise = [](char c) {
        return c == '(' || c == ')' || c == '[' || c == ']' || c == '*' || c == '.' ||
               c == ',' || c == ':' || c == ';' || c == '"' || c == '\'';
    };
    std::size_t b = 0, e = s.size();
    while (b < e && is_noise(s[b])) ++b;
    while (e > b && is_noise(s[e - 1])) --e;
    s = s.substr(b, e - b);

    ExtractedAnswer ans;
    if (s.size() == 1 && std::isalpha(static_cast<unsigned char>(s[0]))) {
        ans.kind = AnswerKind::letter;
        ans.value = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(s[0]))));
        ans.source_line = line;
    }
    return ans;
}

ExtractedAnswer normalize_numeric_answer(const std::string& raw, const std::string& line) {
    ExtractedAnswer ans;
    if (auto canon = normalize_numeric(raw)) {
        ans.kind = AnswerKind::numeric;
        ans.value = *canon;
        ans.source_line = line;
    }
    return ans;
}

} // namespace

std::optional<std::string> normalize_numeric(const std::string& raw) {
    std::string s = strip_edges(raw);

    for (const char* cur : kCurrencyPrefixes) {
        const std::size_t len = std::char_traits<char>::length(cur);
        if (s.size() >= len && s.compare(0, len, cur) == 0) {
            s = strip_edges(s.substr(len));
            break;
        }
    }

    // Thousands separators.
    s.erase(std::remove(s.begin(), s.end(), ','), s.end());

    // Trailing punctuation after the value ("42.", "42!", "42.;"). A final
    // '.' can never be a decimal point since no digits follow it.
    while (!s.empty()) {
        char c = s.back();
        if (c == '.' || c == '!' || c == '?' || c == ';' || c == ':') {
            s.pop_back();
            continue;
        }
        break;
    }

    if (s.empty()) return std::nullopt;

    std::size_t i = 0;
    bool negative = false;
    if (s[i] == '+' || s[i] == '-') {
        negative = s[i] == '-';
        ++i;
    }
    std::string int_part, frac_part;
    bool dot = false;
    for (; i < s.size(); ++i) {
        if (is_digit(s[i])) {
            (dot ? frac_part : int_part) += s[i];
        } else if (s[i] == '.' && !dot) {
            dot = true;
        } else {
            return std::nullopt;
        }
    }
    if (int_part.empty() && frac_part.empty()) return std::nullopt;

    // Canonical form: no leading integer zeros (keep one before ".x"), no
    // trailing fractional zeros, no "-0".
    std::size_t nz = 0;
    while (nz + 1 < int_part.size() && int_part[nz] == '0') ++nz;
    int_part = int_part.substr(nz);
    if (int_part.empty()) int_part = "0";
    while (!frac_part.empty() && frac_part.back() == '0') frac_part.pop_back();

    std::string out = int_part;
    if (!frac_part.empty()) out += "." + frac_part;
    if (negative && !(int_part == "0" && frac_part.empty())) out.insert(out.begin(), '-');
    return out;
}

ExtractedAnswer extract_final(const std::string& text, AnswerFormat format) {
    const std::vector<std::string> lines = split_lines(text);

    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        const std::string& line = *it;
        if (format == AnswerFormat::hash_marker) {
            if (line.rfind("#### ", 0) == 0)
                return normalize_numeric_answer(line.substr(5), line);
        } else {
            std::size_t rest = 0;
            if (iequals_prefix_after_ws(line, "final answer:", &rest)) {
                const std::string remainder = line.substr(rest);
                return format == AnswerFormat::final_answer_letter
                           ? normalize_letter(remainder, line)
                           : normalize_numeric_answer(remainder, line);
            }
        }
    }
    return {};
}

int compare_decimal(const std::string& a, const std::string& b) {
    const bool neg_a = !a.empty() && a[0] == '-';
    const bool neg_b = !b.empty() && b[0] == '-';
    if (neg_a != neg_b) return neg_a ? -1 : 1;

    auto parts = [](const std::string& s) {
        std::string t = (!s.empty() && (s[0] == '-' || s[0] == '+')) ? s.substr(1) : s;
        auto dot = t.find('.');
        if (dot == std::string::npos) return std::pair<std::string, std::string>{t, ""};
        return std::pair<std::string, std::string>{t.substr(0, dot), t.substr(dot + 1)};
    };
    auto [ia, fa] = parts(a);
    auto [ib, fb] = parts(b);

    int mag;
    if (ia.size() != ib.size()) {
        mag = ia.size() < ib.size() ? -1 : 1;
    } else if (ia != ib) {
        mag = ia < ib ? -1 : 1;
    } else {
        // Compare fractions digit-by-digit, absent digits count as zero.
        mag = 0;
        const std::size_t len = std::max(fa.size(), fb.size());
        for (std::size_t i = 0; i < len; ++i) {
            char da = i < fa.size() ? fa[i] : '0';
            char db = i < fb.size() ? fb[i] : '0';
            if (da != db) {
                mag = da < db ? -1 : 1;
                break;
            }
        }
    }
    return neg_a ? -mag : mag;
}

bool is_correct(const ExtractedAnswer& ans, const Example& ex) {
    if (ans.kind == AnswerKind::none) return false;
    if (!ex.options.empty()) {
        return ans.kind == AnswerKind::letter && ans.value == ex.gold;
    }
    if (ans.kind != AnswerKind::numeric) return false;
    auto gold = normalize_numeric(ex.gold);
    return gold && compare_decimal(ans.value, *gold) == 0;
}

namespace {

// Non-negative integer value of a canonical decimal, if it is one.
std::optional<std::uint64_t> as_uint(const std::string& v) {
    if (v.empty() || v[0] == '-' || v.find('.') != std::string::npos) return std::nullopt;
    std::uint64_t n = 0;
    for (char c : v) {
        if (!is_digit(c)) return std::nullopt;
        if (n > (UINT64_MAX - static_cast<std::uint64_t>(c - '0')) / 10) return std::nullopt;
        n = n * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return n;
}

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>(static_cast<__uint128_t>(a) * b % m);
}

std::uint64_t powmod(std::uint64_t a, std::uint64_t e, std::uint64_t m) {
    std::uint64_t r = 1;
    a %= m;
    while (e) {
        if (e & 1) r = mulmod(r, a, m);
        a = mulmod(a, a, m);
        e >>= 1;
    }
    return r;
}

// Deterministic Miller-Rabin, exact for all 64-bit inputs with this witness
// set. Used above the trial-division range so adversarially large numbers in
// completions cannot stall the scorer.
bool miller_rabin(std::uint64_t n) {
    std::uint64_t d = n - 1;
    int r = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++r;
    }
    for (std::uint64_t a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL,
                            31ULL, 37ULL}) {
        if (a % n == 0) continue;
        std::uint64_t x = powmod(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool witness = true;
        for (int i = 1; i < r; ++i) {
            x = mulmod(x, x, n);
            if (x == n - 1) {
                witness = false;
                break;
            }
        }
        if (witness) return false;
    }
    return true;
}

} // namespace

bool is_even(const ExtractedAnswer& ans) {
    if (ans.kind != AnswerKind::numeric) return false;
    const std::string& v = ans.value;
    if (v.empty() || v[0] == '-' || v.find('.') != std::string::npos) return false;
    char last = v.back();
    return (last - '0') % 2 == 0;
}

bool is_prime(const ExtractedAnswer& ans) {
    if (ans.kind != AnswerKind::numeric) return false;
    auto n_opt = as_uint(ans.value);
    if (!n_opt) return false;
    std::uint64_t n = *n_opt;
    if (n < 2) return false;
    if (n % 2 == 0) return n == 2;
    if (n < (1ULL << 32)) {
        for (std::uint64_t d = 3; d * d <= n; d += 2)
            if (n % d == 0) return false;
        return true;
    }
    return miller_rabin(n);
}

bool is_below(const ExtractedAnswer& ans, const std::string& bound) {
    if (ans.kind != AnswerKind::numeric) return false;
    auto b = normalize_numeric(bound);
    return b && compare_decimal(ans.value, *b) < 0;
}

} // namespace spur
