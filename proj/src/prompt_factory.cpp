#include "spur/prompt_factory.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spur/errors.hpp"
#include "spur/textutil.hpp"

namespace spur {

using nlohmann::json;

TemplateMode template_mode_from_string(const std::string& s) {
    if (s == "generate") return TemplateMode::generate;
    if (s == "mutate") return TemplateMode::mutate;
    if (s == "generate_gibberish") return TemplateMode::generate_gibberish;
    if (s == "mutate_gibberish") return TemplateMode::mutate_gibberish;
    if (s == "generate_steering") return TemplateMode::generate_steering;
    if (s == "mutate_steering") return TemplateMode::mutate_steering;
    throw ConfigError("unknown template mode: " + s);
}

std::string to_string(TemplateMode mode) {
    switch (mode) {
        case TemplateMode::generate: return "generate";
        case TemplateMode::mutate: return "mutate";
        case TemplateMode::generate_gibberish: return "generate_gibberish";
        case TemplateMode::mutate_gibberish: return "mutate_gibberish";
        case TemplateMode::generate_steering: return "generate_steering";
        case TemplateMode::mutate_steering: return "mutate_steering";
    }
    return "generate";
}

bool is_mutation_mode(TemplateMode mode) {
    return mode == TemplateMode::mutate || mode == TemplateMode::mutate_gibberish ||
           mode == TemplateMode::mutate_steering;
}

std::size_t tail_length(TemplateMode mode) { return is_mutation_mode(mode) ? 10 : 5; }

MetaPromptTemplate load_template(const std::string& path, TemplateMode mode) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open template file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return MetaPromptTemplate{mode, buf.str()};
}

namespace {

std::string json_string_list(const std::vector<std::string>& items) {
    json arr = json::array();
    for (const auto& s : items) arr.push_back(s);
    return arr.dump();
}

} // namespace

std::string render_meta_prompt(const MetaPromptTemplate& tmpl, const RenderContext& ctx) {
    struct Slot {
        const char* name;
        bool present;
        std::string value;
    };

    std::vector<std::string> tail;
    if (ctx.existing_prompts) {
        const std::size_t n = tail_length(tmpl.mode);
        const auto& all = *ctx.existing_prompts;
        const std::size_t start = all.size() > n ? all.size() - n : 0;
        tail.assign(all.begin() + static_cast<std::ptrdiff_t>(start), all.end());
    }

    std::string hints;
    if (ctx.variety_hints) {
        for (std::size_t i = 0; i < ctx.variety_hints->size(); ++i) {
            if (i) hints += ", ";
            hints += (*ctx.variety_hints)[i];
        }
    }

    const Slot slots[] = {
        {"batch_size", ctx.batch_size.has_value(),
         ctx.batch_size ? std::to_string(*ctx.batch_size) : ""},
        {"output_format_token", ctx.output_format_token.has_value(),
         ctx.output_format_token.value_or("")},
        {"variety_hints", ctx.variety_hints.has_value(), hints},
        {"existing_prompts_tail", ctx.existing_prompts.has_value(), json_string_list(tail)},
        {"seed_prompts", ctx.seed_prompts.has_value(),
         ctx.seed_prompts ? json_string_list(*ctx.seed_prompts) : ""},
    };

    std::string out = tmpl.body;
    for (const Slot& slot : slots) {
        const std::string placeholder = std::string("{") + slot.name + "}";
        std::size_t pos = out.find(placeholder);
        if (pos == std::string::npos) continue;
        if (!slot.present)
            throw ConfigError("render_meta_prompt: template references slot '" +
                              std::string(slot.name) + "' but the context does not supply it");
        while (pos != std::string::npos) {
            out.replace(pos, placeholder.size(), slot.value);
            pos = out.find(placeholder, pos + slot.value.size());
        }
    }
    return out;
}

std::vector<std::string> parse_candidates(const std::string& completion) {
    std::string body = completion;

    // Defensive fence stripping: some generators wrap the payload anyway.
    auto trim = [](std::string s) {
        std::size_t b = s.find_first_not_of(" \t\r\n");
        std::size_t e = s.find_last_not_of(" \t\r\n");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    body = trim(body);
    if (body.rfind("```", 0) == 0) {
        std::size_t first_nl = body.find('\n');
        if (first_nl != std::string::npos) body = body.substr(first_nl + 1);
        if (auto close = body.rfind("```"); close != std::string::npos) body = body.substr(0, close);
        body = trim(body);
    }

    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw CandidateParseError(std::string("candidate payload is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("prompts"))
        throw CandidateParseError("candidate payload must be an object with a 'prompts' key");
    const json& arr = j["prompts"];
    if (!arr.is_array() || arr.empty())
        throw CandidateParseError("'prompts' must be a non-empty array");

    std::vector<std::string> out;
    out.reserve(arr.size());
    for (const auto& item : arr) {
        if (!item.is_string() || item.get<std::string>().empty())
            throw CandidateParseError("'prompts' entries must be non-empty strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

std::vector<LexiconEntry> load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open lexicon file: " + path);
    std::vector<LexiconEntry> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        LexiconEntry entry;
        std::size_t start = 0;
        while (start <= line.size()) {
            std::size_t tab = line.find('\t', start);
            std::string field = tab == std::string::npos ? line.substr(start)
                                                         : line.substr(start, tab - start);
            if (!field.empty()) {
                if (entry.term.empty())
                    entry.term = field;
                else
                    entry.variants.push_back(field);
            }
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (!entry.term.empty()) out.push_back(std::move(entry));
    }
    return out;
}

std::shared_ptr<const std::unordered_set<std::string>> load_common_words(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open common-words file: " + path);
    auto words = std::make_shared<std::unordered_set<std::string>>();
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) words->insert(to_lower(line));
    }
    return words;
}

namespace {

bool is_plain_token(const std::string& token,
                    const std::unordered_set<std::string>& common_words) {
    const std::string core = strip_edge_punct(token);
    return all_alphabetic(core) && common_words.count(to_lower(core)) > 0;
}

bool is_symbol_bearing(const std::string& token) {
    const std::string core = strip_edge_punct(token);
    return core.empty() || !all_alphabetic(core);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

} // namespace

ValidationResult validate(const std::string& candidate, const ValidationRuleSet& rules) {
    // 1. Forbidden lexicon, whole-word and case-insensitive, variants included.
    for (const auto& entry : rules.forbidden_lexicon) {
        if (contains_whole_word(candidate, entry.term))
            return {false, "forbidden", entry.term};
        for (const auto& variant : entry.variants)
            if (contains_whole_word(candidate, variant))
                return {false, "forbidden", variant + " (variant of " + entry.term + ")"};
    }

    // 2. Word band.
    const std::vector<std::string> tokens = split_whitespace(candidate);
    if (tokens.size() < rules.min_words)
        return {false, "too_short",
                std::to_string(tokens.size()) + " words < " + std::to_string(rules.min_words)};
    if (tokens.size() > rules.max_words)
        return {false, "too_long",
                std::to_string(tokens.size()) + " words > " + std::to_string(rules.max_words)};

    // 3. Required format rule.
    const std::size_t format_pos = candidate.find(rules.format_token);
    if (rules.format_token.empty() || format_pos == std::string::npos)
        return {false, "missing_format_rule", rules.format_token};

    // 4. Lexical density (gibberish searches only).
    if (rules.gibberish) {
        if (!rules.common_words)
            throw ConfigError("validate: gibberish rules require a common-words list");
        const GibberishRules& g = *rules.gibberish;

        std::size_t plain = 0, symbol_bearing = 0, plain_before_rule = 0;
        std::size_t offset = 0;
        for (const auto& token : tokens) {
            offset = candidate.find(token, offset);
            const std::size_t token_end = offset + token.size();
            if (is_plain_token(token, *rules.common_words)) {
                ++plain;
                if (token_end <= format_pos) ++plain_before_rule;
            } else if (is_symbol_bearing(token)) {
                ++symbol_bearing;
            }
            offset = token_end;
        }
        const std::size_t gib = tokens.size() - plain;
        const double gib_fraction = static_cast<double>(gib) / static_cast<double>(tokens.size());
        if (gib_fraction < g.min_gibberish_fraction)
            return {false, "gibberish_fraction",
                    format_double(gib_fraction) + " < " + format_double(g.min_gibberish_fraction)};
        const double symbol_fraction =
            gib == 0 ? 1.0 : static_cast<double>(symbol_bearing) / static_cast<double>(gib);
        if (symbol_fraction < g.min_symbol_fraction_of_gibberish)
            return {false, "symbol_fraction",
                    format_double(symbol_fraction) + " < " +
                        format_double(g.min_symbol_fraction_of_gibberish)};
        if (plain_before_rule > static_cast<std::size_t>(g.max_plain_words_before_format_rule))
            return {false, "plain_before_format_rule",
                    std::to_string(plain_before_rule) + " plain words > " +
                        std::to_string(g.max_plain_words_before_format_rule)};
    }

    return {true, "", ""};
}

std::vector<std::string> dedup(const std::vector<std::string>& candidates,
                               std::unordered_set<std::string>& seen) {
    std::vector<std::string> kept;
    kept.reserve(candidates.size());
    for (const auto& text : candidates) {
        if (seen.insert(dedup_key(text)).second) kept.push_back(text);
    }
    return kept;
}

} // namespace spur
