#include "spur/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "spur/errors.hpp"
#include "spur/rng.hpp"

namespace spur {

using nlohmann::json;

std::string to_string(TaskFamily f) {
    return f == TaskFamily::numeric ? "numeric" : "multiple_choice";
}

std::string to_string(AnswerFormat f) {
    switch (f) {
        case AnswerFormat::hash_marker: return "hash_marker";
        case AnswerFormat::final_answer_numeric: return "final_answer_numeric";
        case AnswerFormat::final_answer_letter: return "final_answer_letter";
    }
    return "hash_marker";
}

TaskFamily task_family_from_string(const std::string& s) {
    if (s == "numeric") return TaskFamily::numeric;
    if (s == "multiple_choice") return TaskFamily::multiple_choice;
    throw ConfigError("unknown task_family: " + s);
}

AnswerFormat answer_format_from_string(const std::string& s) {
    if (s == "hash_marker") return AnswerFormat::hash_marker;
    if (s == "final_answer_numeric") return AnswerFormat::final_answer_numeric;
    if (s == "final_answer_letter") return AnswerFormat::final_answer_letter;
    throw ConfigError("unknown answer_format: " + s);
}

bool canonical_less(const Example& a, const Example& b) {
    if (a.benchmark_id != b.benchmark_id) return a.benchmark_id < b.benchmark_id;
    return a.id < b.id;
}

void sort_canonical(std::vector<Example>& examples) {
    std::sort(examples.begin(), examples.end(), canonical_less);
}

Example parse_example_record(const std::string& line, const BenchmarkDef& def,
                             const std::string& where) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ConfigError(where + ": malformed record: " + e.what());
    }
    if (!j.is_object()) throw ConfigError(where + ": record is not an object");

    Example ex;
    try {
        ex.id = j.at("id").get<std::string>();
        ex.benchmark_id = j.value("benchmark", def.id);
        ex.question = j.at("question").get<std::string>();
        ex.gold = j.at("answer").get<std::string>();
        if (j.contains("options") && !j["options"].is_null()) {
            for (auto& [key, val] : j["options"].items()) {
                if (key.size() != 1 || key[0] < 'A' || key[0] > 'Z')
                    throw ConfigError(where + ": option letter '" + key + "' is not A-Z");
                ex.options[key[0]] = val.get<std::string>();
            }
        }
        if (j.contains("meta") && j["meta"].is_object()) {
            for (auto& [key, val] : j["meta"].items())
                ex.meta[key] = val.is_string() ? val.get<std::string>() : val.dump();
        }
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }

    if (ex.id.empty()) throw ConfigError(where + ": empty id");
    if (!ex.options.empty()) {
        // Option letters must be consecutive starting at A.
        char expected = 'A';
        for (const auto& [letter, _] : ex.options) {
            if (letter != expected)
                throw ConfigError(where + ": option letters not consecutive from A (saw '" +
                                  std::string(1, letter) + "', expected '" +
                                  std::string(1, expected) + "')");
            ++expected;
        }
        if (ex.gold.size() != 1 || !ex.options.count(ex.gold[0]))
            throw ConfigError(where + ": gold '" + ex.gold + "' is not one of the option letters");
    } else {
        // Numeric task: gold must be a plain decimal.
        const std::string& g = ex.gold;
        std::size_t i = 0;
        if (i < g.size() && (g[i] == '-' || g[i] == '+')) ++i;
        bool digit = false, dot = false;
        for (; i < g.size(); ++i) {
            if (g[i] >= '0' && g[i] <= '9') { digit = true; continue; }
            if (g[i] == '.' && !dot) { dot = true; continue; }
            digit = false;
            break;
        }
        if (!digit || i != g.size())
            throw ConfigError(where + ": gold '" + g + "' does not parse as a decimal");
    }
    return ex;
}

std::vector<Example> load_benchmark(const std::string& path, const BenchmarkDef& def) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file: " + path);

    std::vector<Example> out;
    std::unordered_set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Example ex = parse_example_record(line, def, path + ":" + std::to_string(line_no));
        if (!seen.insert(ex.id).second)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": duplicate id '" +
                              ex.id + "'");
        out.push_back(std::move(ex));
    }
    return out;
}

Split make_split(const std::vector<Example>& dataset, const SplitPlan& plan) {
    if (dataset.empty()) throw ConfigError("make_split: dataset is empty");
    const double sum = plan.train_fraction + plan.val_fraction + plan.test_fraction;
    if (plan.train_fraction < 0 || plan.val_fraction < 0 || plan.test_fraction < 0 ||
        std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("make_split: fractions must be non-negative and sum to 1");

    const std::size_t n = dataset.size();
    const auto n_val = static_cast<std::size_t>(std::floor(plan.val_fraction * n));
    const auto n_test = static_cast<std::size_t>(std::floor(plan.test_fraction * n));
    const std::size_t n_train = n - n_val - n_test;

    if (plan.train_fraction > 0 && n_train == 0)
        throw ConfigError("make_split: train split would be empty");
    if (plan.val_fraction > 0 && n_val == 0)
        throw ConfigError("make_split: val split would be empty (n too small)");
    if (plan.test_fraction > 0 && n_test == 0)
        throw ConfigError("make_split: test split would be empty (n too small)");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(plan.seed);
    rng.shuffle(order);

    Split split;
    split.train.reserve(n_train);
    for (std::size_t i = 0; i < n_train; ++i) split.train.push_back(dataset[order[i]]);
    for (std::size_t i = n_train; i < n_train + n_val; ++i) split.val.push_back(dataset[order[i]]);
    for (std::size_t i = n_train + n_val; i < n; ++i) split.test.push_back(dataset[order[i]]);
    sort_canonical(split.train);
    sort_canonical(split.val);
    sort_canonical(split.test);
    return split;
}

Split make_split_official(const std::vector<Example>& train,
                          const std::vector<Example>& test,
                          double val_fraction, std::uint64_t seed) {
    if (train.empty()) throw ConfigError("make_split_official: train set is empty");
    const std::size_t total = train.size() + test.size();
    const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * total));
    if (val_fraction > 0 && n_val == 0)
        throw ConfigError("make_split_official: val split would be empty (n too small)");
    if (n_val >= train.size())
        throw ConfigError("make_split_official: val split would consume the whole train split");

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    Split split;
    for (std::size_t i = 0; i < n_val; ++i) split.val.push_back(train[order[i]]);
    for (std::size_t i = n_val; i < order.size(); ++i) split.train.push_back(train[order[i]]);
    split.test = test;
    sort_canonical(split.train);
    sort_canonical(split.val);
    sort_canonical(split.test);
    return split;
}

std::vector<std::vector<Example>> partition_train(const std::vector<Example>& train,
                                                  int k, std::uint64_t seed) {
    if (k < 1) throw ConfigError("partition_train: K must be >= 1");
    if (static_cast<std::size_t>(k) > train.size())
        throw ConfigError("partition_train: K=" + std::to_string(k) +
                          " exceeds |train|=" + std::to_string(train.size()));

    std::vector<Example> shuffled = train;
    Rng rng(seed);
    rng.shuffle(shuffled);

    const std::size_t n = shuffled.size();
    const std::size_t base = n / static_cast<std::size_t>(k);
    const std::size_t extra = n % static_cast<std::size_t>(k);

    std::vector<std::vector<Example>> subsets;
    subsets.reserve(static_cast<std::size_t>(k));
    std::size_t pos = 0;
    for (std::size_t s = 0; s < static_cast<std::size_t>(k); ++s) {
        const std::size_t size = base + (s < extra ? 1 : 0);
        std::vector<Example> subset(shuffled.begin() + static_cast<std::ptrdiff_t>(pos),
                                    shuffled.begin() + static_cast<std::ptrdiff_t>(pos + size));
        sort_canonical(subset);
        subsets.push_back(std::move(subset));
        pos += size;
    }
    return subsets;
}

EvalSet build_eval_set(int round_index, const std::vector<Example>& subset,
                       const ReplayBuffer& buffer) {
    EvalSet set;
    set.round_index = round_index;
    std::set<std::pair<std::string, std::string>> ordered; // (benchmark_id, id)
    for (const auto& ex : subset) ordered.emplace(ex.benchmark_id, ex.id);
    for (const auto& id : buffer.example_ids) {
        // Buffer ids are stored as "benchmark_id/id" composites.
        auto slash = id.find('/');
        ordered.emplace(id.substr(0, slash), id.substr(slash + 1));
    }
    for (const auto& [bench, id] : ordered) set.example_ids.push_back(bench + "/" + id);
    return set;
}

std::size_t half_up_sample_size(double alpha, std::size_t n) {
    return static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n) + 0.5));
}

ReplayBuffer update_buffer(const ReplayBuffer& buffer, const std::vector<Example>& subset,
                           double alpha, std::uint64_t seed) {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("update_buffer: alpha must be in [0,1]");

    std::vector<std::string> pool;
    pool.reserve(subset.size());
    for (const auto& ex : subset) pool.push_back(ex.benchmark_id + "/" + ex.id);
    std::sort(pool.begin(), pool.end());

    Rng rng(seed);
    std::vector<std::string> drawn = rng.sample(pool, half_up_sample_size(alpha, pool.size()));

    ReplayBuffer next = buffer;
    next.alpha = alpha;
    next.seed = seed;
    next.example_ids.insert(next.example_ids.end(), drawn.begin(), drawn.end());
    std::sort(next.example_ids.begin(), next.example_ids.end());
    next.example_ids.erase(std::unique(next.example_ids.begin(), next.example_ids.end()),
                           next.example_ids.end());
    return next;
}

std::vector<Example> pool_balanced(
    const std::vector<std::pair<BenchmarkDef, std::vector<Example>>>& benchmarks,
    std::size_t per_benchmark_n, std::uint64_t seed) {
    std::vector<Example> out;
    for (const auto& [def, examples] : benchmarks) {
        if (examples.size() < per_benchmark_n)
            throw ConfigError("pool_balanced: benchmark '" + def.id + "' has only " +
                              std::to_string(examples.size()) + " examples, need " +
                              std::to_string(per_benchmark_n));
        std::vector<Example> sorted = examples;
        sort_canonical(sorted);
        Rng rng(derive_seed(seed, "pool:" + def.id));
        std::vector<Example> drawn = rng.sample(sorted, per_benchmark_n);
        out.insert(out.end(), drawn.begin(), drawn.end());
    }
    sort_canonical(out);
    return out;
}

} // namespace spur
