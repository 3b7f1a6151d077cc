#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "spur/corpus.hpp"
#include "spur/gateway.hpp"
#include "spur/objectives.hpp"
#include "spur/prompt_factory.hpp"

namespace spur {

enum class ValidationScope { per_benchmark, universal };

struct SearchConfig {
    int n_initial = 24;
    int top_k = 5;
    int mutants_per_round = 24;
    int rounds = 3; // mutation rounds R; total scored rounds = R + 1
    double alpha = 0.2;
    int subset_count = 0; // K; 0 means R + 1
    ObjectiveId objective = ObjectiveId::accuracy;
    std::string generator_backend;
    std::string target_backend;
    DecodeParams generator_decode;
    DecodeParams target_decode;
    std::uint64_t master_seed = 42;
    int parse_retry_limit = 3;
    ValidationScope validation_mode = ValidationScope::per_benchmark;
    int parallelism = 1;

    int effective_subset_count() const { return subset_count > 0 ? subset_count : rounds + 1; }
    void check() const; // throws ConfigError on invariant violations
};

// Everything the engine scores against, prepared by the config layer
// (universal mode pools the corpus before it gets here).
struct PreparedCorpus {
    ExampleIndex index;
    std::vector<std::vector<Example>> subsets; // D_1..D_K
    std::vector<Example> val;
};

struct SearchTemplates {
    MetaPromptTemplate generate;
    MetaPromptTemplate mutate;
    std::vector<std::string> variety_hints;
};

struct RejectedCandidate {
    std::string text_digest;
    std::string reason;
};

struct RoundRecord {
    int round_index = 0;
    std::string eval_set_id;
    std::vector<std::string> eval_ids;    // S_i, canonical order; lets re-scoring
                                          // rebuild byte-identical requests
    std::vector<std::string> leaderboard; // prompt ids, best first
    int parsed = 0;
    int admitted = 0;
    int dedup_dropped = 0;
    std::vector<RejectedCandidate> rejected;
    std::vector<std::string> seeds_used; // mutation rounds only
};

struct FinalSelection {
    std::string winner_id;
    std::string winner_text;
    std::vector<ScoreReport> finalist_val_scores; // eval_label == "val"
    std::string ranking_basis;
};

// Full engine state; serialize/deserialize round-trips exactly, which is
// what makes interrupted runs resumable.
struct SearchState {
    std::string config_digest;
    std::vector<CandidatePrompt> pool;
    std::vector<ScoreReport> reports;
    ReplayBuffer buffer;
    int completed_rounds = 0;
    std::uint64_t next_creation_index = 1;
    std::uint64_t next_log_seq = 1;
    std::vector<RoundRecord> round_records;
    std::optional<FinalSelection> final_selection;

    nlohmann::json to_json() const;
    static SearchState from_json(const nlohmann::json& j);
};

// First min(k, size) ids under compare_scores ordering.
std::vector<std::string> select_top_k(const std::vector<ScoreReport>& leaderboard, int k);

// Structured event log: one JSON object per line with a monotonic "seq" and
// a wall-clock "ts" (the only non-deterministic field).
class RunLogger {
public:
    RunLogger(std::string path, std::uint64_t next_seq);
    std::uint64_t next_seq() const { return seq_; }
    void log(const std::string& event, nlohmann::json fields);

private:
    std::string path_;
    std::uint64_t seq_;
};

class SearchEngine {
public:
    SearchEngine(SearchConfig config, std::string config_digest, PreparedCorpus corpus,
                 SearchTemplates templates, ValidationRuleSet rules, Gateway& gateway,
                 std::string run_dir);

    // Fresh run: executes every round and the final selection, writing all
    // artifacts under the run directory.
    FinalSelection run();

    // Continues from state.json; a completed run is returned as-is. Refuses
    // to resume when the stored config digest differs.
    FinalSelection resume();

    const SearchState& state() const { return state_; }

private:
    FinalSelection execute();
    void run_round(int round_index);
    FinalSelection finalize();

    std::vector<std::string> generate_batch(int round_index, const std::string& meta_prompt,
                                            int* attempts_used);
    std::vector<ScoreReport> round_leaderboard(int round_index) const;
    std::vector<std::string> eval_ids_for_round(int round_index) const;
    const CandidatePrompt& prompt_by_id(const std::string& id) const;
    ScoreReport score_admitted(const CandidatePrompt& prompt,
                               const std::vector<std::string>& eval_ids,
                               const std::string& label);
    void persist_state() const;
    void write_round_artifacts(int round_index,
                               const std::vector<std::pair<std::string, std::string>>& verdicts,
                               const std::vector<CandidatePrompt>& admitted);

    SearchConfig config_;
    std::string config_digest_;
    PreparedCorpus corpus_;
    SearchTemplates templates_;
    ValidationRuleSet rules_;
    Gateway& gateway_;
    std::string run_dir_;
    SearchState state_;
    std::unordered_set<std::string> dedup_keys_;
    std::unique_ptr<RunLogger> logger_;
};

} // namespace spur
