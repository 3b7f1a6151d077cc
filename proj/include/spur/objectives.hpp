#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "spur/corpus.hpp"
#include "spur/extraction.hpp"
#include "spur/gateway.hpp"
#include "spur/prompt_factory.hpp"

namespace spur {

enum class ObjectiveId { accuracy, incorrect, option_a, always_even, always_prime, below_ten };

ObjectiveId objective_from_string(const std::string& s);
std::string to_string(ObjectiveId id);

// A named, direction-tagged predicate over (example, extracted answer).
// All objectives are satisfied-rates to maximize.
struct ObjectiveSpec {
    ObjectiveId id = ObjectiveId::accuracy;
    std::function<bool(const Example&, const ExtractedAnswer&)> predicate;
};

ObjectiveSpec objective_spec(ObjectiveId id);

// Decode parameters a scoring call sends to the target backend.
struct DecodeParams {
    std::string model_id;
    double temperature = 0.0;
    double top_p = 1.0;
    int max_new_tokens = 256;
    std::uint64_t decode_seed = 42;
};

// Resolves "benchmark_id/example_id" composites used by eval sets.
class ExampleIndex {
public:
    void add(const Example& ex, const BenchmarkDef& def);
    const std::pair<Example, BenchmarkDef>& resolve(const std::string& composite_id) const;
    std::size_t size() const { return by_id_.size(); }

private:
    std::unordered_map<std::string, std::pair<Example, BenchmarkDef>> by_id_;
};

struct PerExampleOutcome {
    std::string example_id; // composite
    std::string extracted;  // canonical value, empty when unparseable
    bool satisfied = false;
};

struct ScoreReport {
    std::string prompt_id;
    std::uint64_t prompt_creation_index = 0;
    std::string eval_label; // "S1".."Sk", "final", "val", ...
    std::uint64_t eval_digest = 0;
    ObjectiveId objective = ObjectiveId::accuracy;
    std::uint64_t satisfied = 0;
    std::uint64_t total = 0;
    double rate = 0.0; // satisfied/total; comparisons stay exact on the integers
    std::vector<PerExampleOutcome> per_example;
};

// Digest binding a report to its (eval ids, objective) so mismatched
// comparisons can be refused.
std::uint64_t eval_set_digest(const std::vector<std::string>& example_ids, ObjectiveId objective);

// Numeric family: the question verbatim. Multiple choice: question, blank
// line, then one "(L) text" line per option. Byte-stable for caching.
std::string build_user_message(const Example& ex, const BenchmarkDef& def);

// Scores one prompt over an eval set by querying the target backend,
// extracting and applying the objective predicate. Per-example order follows
// the eval set's canonical order regardless of completion order.
ScoreReport score_prompt(const CandidatePrompt& prompt,
                         const std::vector<std::string>& eval_example_ids,
                         const std::string& eval_label, const ExampleIndex& index,
                         Gateway& gateway, const std::string& target_backend_id,
                         const DecodeParams& decode, const ObjectiveSpec& objective,
                         int parallelism = 1);

// Ranking: higher rate first (exact rational compare), ties broken by earlier
// creation index. Returns <0, 0, >0. Throws UsageError when the reports were
// not scored on the same eval set and objective.
int compare_scores(const ScoreReport& a, const ScoreReport& b);

// True when a should be ranked ahead of b.
bool leaderboard_less(const ScoreReport& a, const ScoreReport& b);

} // namespace spur
