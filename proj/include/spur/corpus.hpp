#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace spur {

enum class TaskFamily { numeric, multiple_choice };

enum class AnswerFormat { hash_marker, final_answer_numeric, final_answer_letter };

std::string to_string(TaskFamily f);
std::string to_string(AnswerFormat f);
TaskFamily task_family_from_string(const std::string& s);
AnswerFormat answer_format_from_string(const std::string& s);

// One benchmark item. `options` is ordered letter -> text; absent for
// numeric tasks, in which case `gold` is a canonical decimal string.
struct Example {
    std::string id;
    std::string benchmark_id;
    std::string question;
    std::map<char, std::string> options;
    std::string gold;
    std::map<std::string, std::string> meta;
};

struct BenchmarkDef {
    std::string id;
    TaskFamily task_family = TaskFamily::numeric;
    AnswerFormat answer_format = AnswerFormat::hash_marker;
    std::string forbidden_lexicon_id;
    std::string task_description;
};

struct SplitPlan {
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    double test_fraction = 0.1;
    std::uint64_t seed = 0;
    int subset_count = 1; // K
};

struct Split {
    std::vector<Example> train;
    std::vector<Example> val;
    std::vector<Example> test;
};

// Grows monotonically, never holds an id outside the training split.
struct ReplayBuffer {
    std::vector<std::string> example_ids; // kept in canonical order
    double alpha = 0.2;
    std::uint64_t seed = 0;
};

// S_i: the round-i scoring set, fresh subset plus replay buffer.
struct EvalSet {
    int round_index = 1;
    std::vector<std::string> example_ids; // canonical (benchmark_id, id) order
};

// Canonical ordering used wherever randomness is not explicitly seeded.
bool canonical_less(const Example& a, const Example& b);
void sort_canonical(std::vector<Example>& examples);

// Line-delimited records; validates Example invariants, preserves input order.
// Malformed lines and duplicate ids raise ConfigError naming the line.
std::vector<Example> load_benchmark(const std::string& path, const BenchmarkDef& def);

// Parse a single dataset record (exposed for tests and in-memory corpora).
Example parse_example_record(const std::string& line, const BenchmarkDef& def,
                             const std::string& where);

// Seeded disjoint cover; sizes floor(fraction*n) with the remainder assigned
// to train. Splits come back in canonical order.
Split make_split(const std::vector<Example>& dataset, const SplitPlan& plan);

// Official-split variant: train/test given, val carved out of train with
// size floor(val_fraction * (|train|+|test|)).
Split make_split_official(const std::vector<Example>& train,
                          const std::vector<Example>& test,
                          double val_fraction, std::uint64_t seed);

// K pairwise-disjoint subsets covering train, sizes differing by at most 1.
std::vector<std::vector<Example>> partition_train(const std::vector<Example>& train,
                                                  int k, std::uint64_t seed);

EvalSet build_eval_set(int round_index, const std::vector<Example>& subset,
                       const ReplayBuffer& buffer);

// R_i = R_{i-1} ∪ Sample_alpha(D_i); sample size is round-half-up of
// alpha*|D_i|, drawn uniformly under `seed`.
ReplayBuffer update_buffer(const ReplayBuffer& buffer, const std::vector<Example>& subset,
                           double alpha, std::uint64_t seed);

// Equal representation from each benchmark, per_benchmark_n each, then
// canonical ordering.
std::vector<Example> pool_balanced(
    const std::vector<std::pair<BenchmarkDef, std::vector<Example>>>& benchmarks,
    std::size_t per_benchmark_n, std::uint64_t seed);

std::size_t half_up_sample_size(double alpha, std::size_t n);

} // namespace spur
