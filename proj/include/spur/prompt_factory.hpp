#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace spur {

// A system-prompt candidate with provenance.
struct CandidatePrompt {
    std::string id;
    std::string text;
    std::uint64_t creation_index = 0; // global, strictly increasing
    enum class Origin { initial, mutation } origin = Origin::initial;
    int round_created = 1;
    std::vector<std::string> parent_ids; // nonempty iff origin == mutation
    std::size_t word_count = 0;          // whitespace-delimited tokens of text
};

enum class TemplateMode {
    generate,
    mutate,
    generate_gibberish,
    mutate_gibberish,
    generate_steering,
    mutate_steering,
};

TemplateMode template_mode_from_string(const std::string& s);
std::string to_string(TemplateMode mode);
bool is_mutation_mode(TemplateMode mode);

// Last-N already-accepted prompts shown to the generator: 5 when generating,
// 10 when mutating.
std::size_t tail_length(TemplateMode mode);

struct MetaPromptTemplate {
    TemplateMode mode = TemplateMode::generate;
    std::string body; // plain text with {slot} placeholders
};

MetaPromptTemplate load_template(const std::string& path, TemplateMode mode);

// Values for the template slots. A slot referenced by the body but left
// unset here is a render error naming the slot.
struct RenderContext {
    std::optional<int> batch_size;
    std::optional<std::string> output_format_token;
    std::optional<std::vector<std::string>> variety_hints;
    std::optional<std::vector<std::string>> existing_prompts; // full list; render truncates
    std::optional<std::vector<std::string>> seed_prompts;
};

std::string render_meta_prompt(const MetaPromptTemplate& tmpl, const RenderContext& ctx);

// Extracts the {"prompts": [...]} batch from a generator completion,
// tolerating markdown fences. Throws CandidateParseError on any other shape.
std::vector<std::string> parse_candidates(const std::string& completion);

struct LexiconEntry {
    std::string term;
    std::vector<std::string> variants;
};

// One term per line, tab-separated inflected variants after it.
std::vector<LexiconEntry> load_lexicon(const std::string& path);

std::shared_ptr<const std::unordered_set<std::string>> load_common_words(const std::string& path);

struct GibberishRules {
    double min_gibberish_fraction = 0.65;
    double min_symbol_fraction_of_gibberish = 0.5;
    int max_plain_words_before_format_rule = 20;
};

struct ValidationRuleSet {
    std::vector<LexiconEntry> forbidden_lexicon;
    std::size_t min_words = 45;
    std::size_t max_words = 180;
    std::string format_token; // "#### " or "Final answer:"
    std::optional<GibberishRules> gibberish;
    std::shared_ptr<const std::unordered_set<std::string>> common_words;
};

// Rejection is a value, not an error.
struct ValidationResult {
    bool accepted = false;
    std::string rule;   // failing rule when rejected
    std::string detail; // offending term or measure
};

// Checks run in order: forbidden lexicon, word band, format token, gibberish
// density. First failure wins.
ValidationResult validate(const std::string& candidate, const ValidationRuleSet& rules);

// Drops candidates whose case-folded, whitespace-collapsed text equals any
// key already in `seen`; keeps order and inserts survivors into `seen`.
std::vector<std::string> dedup(const std::vector<std::string>& candidates,
                               std::unordered_set<std::string>& seen);

} // namespace spur
