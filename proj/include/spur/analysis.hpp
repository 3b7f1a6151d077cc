#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spur/corpus.hpp"
#include "spur/gateway.hpp"
#include "spur/objectives.hpp"

namespace spur {

// ---------------------------------------------------------------------------
// Transfer

struct SourceTag {
    std::string model;
    std::string benchmark;
};

struct ProvenancedPrompt {
    std::string id;
    std::string text;
    SourceTag source;
};

struct TransferTarget {
    std::string model_backend_id; // registered gateway backend
    std::string benchmark_id;
    DecodeParams decode;
    std::vector<std::string> eval_ids; // composite ids of the target's test split
};

struct TransferCell {
    std::string prompt_id;
    SourceTag source;
    std::string target_model;
    std::string target_benchmark;
    double rate = 0.0;   // mean accuracy over repeats
    double stddev = 0.0; // sample stddev; 0 when repeats == 1
    int repeats = 1;
};

// Scores each prompt on each target's test split with the accuracy
// objective, `repeats` times under decode seeds derived from master_seed.
std::vector<TransferCell> transfer_matrix(const std::vector<ProvenancedPrompt>& prompts,
                                          const std::vector<TransferTarget>& targets,
                                          const ExampleIndex& index, Gateway& gateway,
                                          int repeats, std::uint64_t master_seed,
                                          int parallelism = 1);

// ---------------------------------------------------------------------------
// Prompt length

struct LengthStats {
    std::map<std::string, double> mean_tokens;           // family -> mean
    std::map<std::string, double> ratios;                // "famA/famB" -> ratio
};

// Token counts are whitespace-delimited.
LengthStats length_stats(const std::map<std::string, std::vector<std::string>>& families);

// ---------------------------------------------------------------------------
// Embedding similarity

double cosine(const std::vector<double>& u, const std::vector<double>& v);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

// POST {base_url}/v1/embeddings with {"model","input"}.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(std::string base_url, std::string model, std::string api_key_env);
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
    std::string base_url_;
    std::string model_;
    std::string api_key_env_;
};

// Hashed bag-of-words vectors; the offline stand-in for a real embedder.
class BagOfWordsEmbedder : public EmbeddingProvider {
public:
    explicit BagOfWordsEmbedder(std::size_t dim = 4096) : dim_(dim) {}
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
    std::size_t dim_;
};

struct SimilarityReport {
    std::string family;
    std::vector<double> per_pair; // cosine per (prompt, task description) pair
    double mean = 0.0;
    std::size_t count = 0;
};

// For each prompt family, embeds every (prompt, task description of the
// prompt's benchmark) pair and reports per-family mean cosine.
std::vector<SimilarityReport> similarity_report(
    const std::map<std::string, std::vector<std::pair<std::string, std::string>>>&
        family_to_prompt_and_benchmark,
    const std::map<std::string, std::string>& task_descriptions, EmbeddingProvider& embedder);

// ---------------------------------------------------------------------------
// Component ablation

enum class ComponentLabel { format, duty, voice, role, output, reframing, prohibition, other };

ComponentLabel component_label_from_string(const std::string& s);
std::string to_string(ComponentLabel label);

struct PromptComponent {
    ComponentLabel label = ComponentLabel::other;
    std::vector<int> sentence_spans; // indices into the prompt's sentences
};

// Sentence segmentation on '.', '!' or '?' followed by whitespace; spans
// partition the text so that concatenating all sentences reproduces it.
std::vector<std::string> split_sentences(const std::string& text);

struct AblationStep {
    std::string added_label; // "format" for the baseline point
    double score = 0.0;
    std::string prompt_text; // cumulative prompt scored at this step
};

// Greedy forward selection from the mandatory format component: each step
// adds the component with the largest score gain (ties resolved by label
// order, then first span). Step 0 is the format-only baseline.
std::vector<AblationStep> component_ablation(
    const std::string& prompt, const std::vector<PromptComponent>& components,
    const std::vector<std::string>& eval_ids, const ExampleIndex& index, Gateway& gateway,
    const std::string& target_backend_id, const DecodeParams& decode,
    const ObjectiveSpec& objective, int parallelism = 1);

// ---------------------------------------------------------------------------
// Static baseline prompts

struct BaselineEntry {
    std::string id;
    std::string text;
    bool append_format_rule = true;
};

// Structured file {"baselines": [{"id","text","append_format_rule"}]}.
// Duplicate ids are rejected at load.
std::vector<BaselineEntry> load_baseline_registry(const std::string& path);

// The per-format sentence appended when append_format_rule is set.
std::string format_rule_sentence(AnswerFormat format);

struct BaselineScore {
    std::string baseline_id;
    std::string benchmark_id;
    std::string target_backend_id;
    double rate = 0.0;
    std::uint64_t satisfied = 0;
    std::uint64_t total = 0;
};

struct BaselineTask {
    std::string benchmark_id;
    AnswerFormat answer_format = AnswerFormat::hash_marker;
    std::string target_backend_id;
    DecodeParams decode;
    std::vector<std::string> eval_ids;
};

std::vector<BaselineScore> run_baselines(const std::vector<BaselineEntry>& registry,
                                         const std::vector<BaselineTask>& tasks,
                                         const ExampleIndex& index, Gateway& gateway,
                                         const ObjectiveSpec& objective, int parallelism = 1);

} // namespace spur
