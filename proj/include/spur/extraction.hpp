#pragma once

#include <optional>
#include <string>

#include "spur/corpus.hpp"

namespace spur {

enum class AnswerKind { numeric, letter, none };

// The prediction parsed out of a completion. Absence is a value
// (kind == none), never an exception.
struct ExtractedAnswer {
    AnswerKind kind = AnswerKind::none;
    std::string value;       // canonical decimal, or a single uppercase letter
    std::string source_line; // the raw line the marker matched
};

// Scans lines bottom-up for the format's marker and normalizes the remainder.
// hash_marker: last line starting "#### ". final_answer_*: last line whose
// prefix (case-insensitive, leading whitespace ignored) is "final answer:".
ExtractedAnswer extract_final(const std::string& text, AnswerFormat format);

// Whitespace/currency/thousands-separator/trailing-punctuation stripping and
// decimal canonicalization ("07.50" -> "7.5", "$1,234." -> "1234").
std::optional<std::string> normalize_numeric(const std::string& raw);

// Exact comparison of two canonical decimal strings (-1, 0, +1).
int compare_decimal(const std::string& a, const std::string& b);

bool is_correct(const ExtractedAnswer& ans, const Example& ex);

// Steering predicates. Even/prime hold only for non-negative integers;
// unparseable answers (kind == none) are false for all three.
bool is_even(const ExtractedAnswer& ans);
bool is_prime(const ExtractedAnswer& ans);
bool is_below(const ExtractedAnswer& ans, const std::string& bound);

} // namespace spur
