#include "spur/objectives.hpp"

#include <atomic>
#include <thread>

#include "spur/errors.hpp"
#include "spur/rng.hpp"

namespace spur {

ObjectiveId objective_from_string(const std::string& s) {
    if (s == "accuracy") return ObjectiveId::accuracy;
    if (s == "incorrect") return ObjectiveId::incorrect;
    if (s == "option_a") return ObjectiveId::option_a;
    if (s == "always_even") return ObjectiveId::always_even;
    if (s == "always_prime") return ObjectiveId::always_prime;
    if (s == "below_ten") return ObjectiveId::below_ten;
    throw ConfigError("unknown objective: " + s);
}

std::string to_string(ObjectiveId id) {
    switch (id) {
        case ObjectiveId::accuracy: return "accuracy";
        case ObjectiveId::incorrect: return "incorrect";
        case ObjectiveId::option_a: return "option_a";
        case ObjectiveId::always_even: return "always_even";
        case ObjectiveId::always_prime: return "always_prime";
        case ObjectiveId::below_ten: return "below_ten";
    }
    return "accuracy";
}

ObjectiveSpec objective_spec(ObjectiveId id) {
    ObjectiveSpec spec;
    spec.id = id;
    switch (id) {
        case ObjectiveId::accuracy:
            spec.predicate = [](const Example& ex, const ExtractedAnswer& ans) {
                return is_correct(ans, ex);
            };
            break;
        case ObjectiveId::incorrect:
            // Pointwise negation of accuracy restricted to parseable
            // extractions: unparseable completions satisfy neither.
            spec.predicate = [](const Example& ex, const ExtractedAnswer& ans) {
                return ans.kind != AnswerKind::none && !is_correct(ans, ex);
            };
            break;
        case ObjectiveId::option_a:
            spec.predicate = [](const Example&, const ExtractedAnswer& ans) {
                return ans.kind == AnswerKind::letter && ans.value == "A";
            };
            break;
        case ObjectiveId::always_even:
            spec.predicate = [](const Example&, const ExtractedAnswer& ans) {
                return is_even(ans);
            };
            break;
        case ObjectiveId::always_prime:
            spec.predicate = [](const Example&, const ExtractedAnswer& ans) {
                return is_prime(ans);
            };
            break;
        case ObjectiveId::below_ten:
            spec.predicate = [](const Example&, const ExtractedAnswer& ans) {
                return is_below(ans, "10");
            };
            break;
    }
    return spec;
}

void ExampleIndex::add(const Example& ex, const BenchmarkDef& def) {
    by_id_[ex.benchmark_id + "/" + ex.id] = {ex, def};
}

const std::pair<Example, BenchmarkDef>& ExampleIndex::resolve(
    const std::string& composite_id) const {
    auto it = by_id_.find(composite_id);
    if (it == by_id_.end())
        throw UsageError("eval set references unknown example '" + composite_id + "'");
    return it->second;
}

std::uint64_t eval_set_digest(const std::vector<std::string>& example_ids,
                              ObjectiveId objective) {
    std::uint64_t h = fnv1a64(to_string(objective));
    for (const auto& id : example_ids) {
        h = fnv1a64(id, h);
        h = fnv1a64("\x1f", h);
    }
    return h;
}

std::string build_user_message(const Example& ex, const BenchmarkDef& def) {
    if (def.task_family == TaskFamily::numeric || ex.options.empty()) return ex.question;
    std::string msg = ex.question + "\n";
    for (const auto& [letter, text] : ex.options) {
        msg += "\n(";
        msg += letter;
        msg += ") " + text;
    }
    return msg;
}

ScoreReport score_prompt(const CandidatePrompt& prompt,
                         const std::vector<std::string>& eval_example_ids,
                         const std::string& eval_label, const ExampleIndex& index,
                         Gateway& gateway, const std::string& target_backend_id,
                         const DecodeParams& decode, const ObjectiveSpec& objective,
                         int parallelism) {
    if (eval_example_ids.empty()) throw UsageError("score_prompt: eval set is empty");
    if (!gateway.has_backend(target_backend_id))
        throw ConfigError("score_prompt: backend '" + target_backend_id + "' is not registered");

    ScoreReport report;
    report.prompt_id = prompt.id;
    report.prompt_creation_index = prompt.creation_index;
    report.eval_label = eval_label;
    report.eval_digest = eval_set_digest(eval_example_ids, objective.id);
    report.objective = objective.id;
    report.total = eval_example_ids.size();
    report.per_example.resize(eval_example_ids.size());

    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::string first_error;
    std::size_t first_error_pos = eval_example_ids.size();

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= eval_example_ids.size() || failed.load()) return;
            const std::string& composite = eval_example_ids[i];
            try {
                const auto& [ex, def] = index.resolve(composite);
                ChatRequest req;
                req.backend_id = target_backend_id;
                req.model_id = decode.model_id;
                req.system = prompt.text;
                req.user = build_user_message(ex, def);
                req.temperature = decode.temperature;
                req.top_p = decode.top_p;
                req.max_new_tokens = decode.max_new_tokens;
                req.decode_seed = decode.decode_seed;
                ChatResponse resp = gateway.complete(req);

                ExtractedAnswer ans = extract_final(resp.text, def.answer_format);
                PerExampleOutcome& out = report.per_example[i];
                out.example_id = composite;
                out.extracted = ans.kind == AnswerKind::none ? "" : ans.value;
                out.satisfied = objective.predicate(ex, ans);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                // Keep the canonically-first failing example for the report.
                if (i < first_error_pos) {
                    first_error_pos = i;
                    first_error = "scoring prompt '" + prompt.id + "' failed on example '" +
                                  composite + "': " + e.what();
                }
                failed.store(true);
            }
        }
    };

    const int threads = std::max(1, std::min<int>(parallelism,
                                                  static_cast<int>(eval_example_ids.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) throw BackendError(first_error);

    for (const auto& outcome : report.per_example)
        if (outcome.satisfied) ++report.satisfied;
    report.rate = static_cast<double>(report.satisfied) / static_cast<double>(report.total);
    return report;
}

int compare_scores(const ScoreReport& a, const ScoreReport& b) {
    if (a.eval_digest != b.eval_digest || a.objective != b.objective)
        throw UsageError("compare_scores: reports were scored on different eval sets");
    // Cross-multiplied exact rational comparison; higher rate ranks first.
    const auto lhs = static_cast<unsigned __int128>(a.satisfied) * b.total;
    const auto rhs = static_cast<unsigned __int128>(b.satisfied) * a.total;
    if (lhs != rhs) return lhs > rhs ? -1 : 1;
    if (a.prompt_creation_index != b.prompt_creation_index)
        return a.prompt_creation_index < b.prompt_creation_index ? -1 : 1;
    return 0;
}

bool leaderboard_less(const ScoreReport& a, const ScoreReport& b) {
    return compare_scores(a, b) < 0;
}

} // namespace spur
