#include "spur/search.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "spur/jsonio.hpp"
#include "spur/rng.hpp"
#include "spur/textutil.hpp"

namespace spur {

namespace fs = std::filesystem;
using nlohmann::json;

void SearchConfig::check() const {
    if (n_initial < 1) throw ConfigError("search: n_initial must be >= 1");
    if (top_k < 1 || top_k > n_initial)
        throw ConfigError("search: top_k must be in [1, n_initial]");
    if (mutants_per_round < 1) throw ConfigError("search: mutants_per_round must be >= 1");
    if (rounds < 0) throw ConfigError("search: rounds must be >= 0");
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("search: alpha must be in [0,1]");
    if (subset_count > 0 && subset_count < rounds + 1)
        throw ConfigError("search: subset_count K must be >= rounds + 1");
    if (parse_retry_limit < 1) throw ConfigError("search: parse_retry_limit must be >= 1");
    if (parallelism < 1) throw ConfigError("search: parallelism must be >= 1");
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string hex_digest(const std::string& text) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(text)));
    return buf;
}

json prompt_to_json(const CandidatePrompt& p) {
    return json{{"id", p.id},
                {"text", p.text},
                {"creation_index", p.creation_index},
                {"origin", p.origin == CandidatePrompt::Origin::initial ? "initial" : "mutation"},
                {"round_created", p.round_created},
                {"parent_ids", p.parent_ids},
                {"word_count", p.word_count}};
}

CandidatePrompt prompt_from_json(const json& j) {
    CandidatePrompt p;
    p.id = j.at("id").get<std::string>();
    p.text = j.at("text").get<std::string>();
    p.creation_index = j.at("creation_index").get<std::uint64_t>();
    p.origin = j.at("origin").get<std::string>() == "mutation" ? CandidatePrompt::Origin::mutation
                                                               : CandidatePrompt::Origin::initial;
    p.round_created = j.at("round_created").get<int>();
    p.parent_ids = j.at("parent_ids").get<std::vector<std::string>>();
    p.word_count = j.at("word_count").get<std::size_t>();
    return p;
}

json report_to_json(const ScoreReport& r) {
    json per = json::array();
    for (const auto& o : r.per_example)
        per.push_back(json{{"example_id", o.example_id},
                           {"extracted", o.extracted},
                           {"satisfied", o.satisfied}});
    return json{{"prompt_id", r.prompt_id},
                {"prompt_creation_index", r.prompt_creation_index},
                {"eval_label", r.eval_label},
                {"eval_digest", r.eval_digest},
                {"objective", to_string(r.objective)},
                {"satisfied", r.satisfied},
                {"total", r.total},
                {"rate", r.rate},
                {"per_example", per}};
}

ScoreReport report_from_json(const json& j) {
    ScoreReport r;
    r.prompt_id = j.at("prompt_id").get<std::string>();
    r.prompt_creation_index = j.at("prompt_creation_index").get<std::uint64_t>();
    r.eval_label = j.at("eval_label").get<std::string>();
    r.eval_digest = j.at("eval_digest").get<std::uint64_t>();
    r.objective = objective_from_string(j.at("objective").get<std::string>());
    r.satisfied = j.at("satisfied").get<std::uint64_t>();
    r.total = j.at("total").get<std::uint64_t>();
    r.rate = j.at("rate").get<double>();
    for (const auto& o : j.at("per_example")) {
        PerExampleOutcome out;
        out.example_id = o.at("example_id").get<std::string>();
        out.extracted = o.at("extracted").get<std::string>();
        out.satisfied = o.at("satisfied").get<bool>();
        r.per_example.push_back(std::move(out));
    }
    return r;
}

json record_to_json(const RoundRecord& rec) {
    json rejected = json::array();
    for (const auto& rj : rec.rejected)
        rejected.push_back(json{{"digest", rj.text_digest}, {"reason", rj.reason}});
    return json{{"round_index", rec.round_index}, {"eval_set_id", rec.eval_set_id},
                {"eval_ids", rec.eval_ids},       {"leaderboard", rec.leaderboard},
                {"parsed", rec.parsed},           {"admitted", rec.admitted},
                {"dedup_dropped", rec.dedup_dropped}, {"rejected", rejected},
                {"seeds_used", rec.seeds_used}};
}

} // namespace

json SearchState::to_json() const {
    json pool_json = json::array();
    for (const auto& p : pool) pool_json.push_back(prompt_to_json(p));
    json reports_json = json::array();
    for (const auto& r : reports) reports_json.push_back(report_to_json(r));
    json records = json::array();
    for (const auto& rec : round_records) records.push_back(record_to_json(rec));
    json j{{"config_digest", config_digest},
           {"pool", pool_json},
           {"reports", reports_json},
           {"buffer", json{{"example_ids", buffer.example_ids},
                           {"alpha", buffer.alpha},
                           {"seed", buffer.seed}}},
           {"completed_rounds", completed_rounds},
           {"next_creation_index", next_creation_index},
           {"next_log_seq", next_log_seq},
           {"round_records", records}};
    if (final_selection) {
        json finalists = json::array();
        for (const auto& r : final_selection->finalist_val_scores)
            finalists.push_back(report_to_json(r));
        j["final_selection"] = json{{"winner_id", final_selection->winner_id},
                                    {"winner_text", final_selection->winner_text},
                                    {"finalist_val_scores", finalists},
                                    {"ranking_basis", final_selection->ranking_basis}};
    }
    return j;
}

SearchState SearchState::from_json(const json& j) {
    SearchState s;
    s.config_digest = j.at("config_digest").get<std::string>();
    for (const auto& p : j.at("pool")) s.pool.push_back(prompt_from_json(p));
    for (const auto& r : j.at("reports")) s.reports.push_back(report_from_json(r));
    s.buffer.example_ids = j.at("buffer").at("example_ids").get<std::vector<std::string>>();
    s.buffer.alpha = j.at("buffer").at("alpha").get<double>();
    s.buffer.seed = j.at("buffer").at("seed").get<std::uint64_t>();
    s.completed_rounds = j.at("completed_rounds").get<int>();
    s.next_creation_index = j.at("next_creation_index").get<std::uint64_t>();
    s.next_log_seq = j.at("next_log_seq").get<std::uint64_t>();
    for (const auto& rec_json : j.at("round_records")) {
        RoundRecord rec;
        rec.round_index = rec_json.at("round_index").get<int>();
        rec.eval_set_id = rec_json.at("eval_set_id").get<std::string>();
        rec.eval_ids = rec_json.at("eval_ids").get<std::vector<std::string>>();
        rec.leaderboard = rec_json.at("leaderboard").get<std::vector<std::string>>();
        rec.parsed = rec_json.at("parsed").get<int>();
        rec.admitted = rec_json.at("admitted").get<int>();
        rec.dedup_dropped = rec_json.at("dedup_dropped").get<int>();
        for (const auto& rj : rec_json.at("rejected"))
            rec.rejected.push_back(
                {rj.at("digest").get<std::string>(), rj.at("reason").get<std::string>()});
        rec.seeds_used = rec_json.at("seeds_used").get<std::vector<std::string>>();
        s.round_records.push_back(std::move(rec));
    }
    if (j.contains("final_selection")) {
        FinalSelection fin;
        const json& fj = j["final_selection"];
        fin.winner_id = fj.at("winner_id").get<std::string>();
        fin.winner_text = fj.at("winner_text").get<std::string>();
        for (const auto& r : fj.at("finalist_val_scores"))
            fin.finalist_val_scores.push_back(report_from_json(r));
        fin.ranking_basis = fj.at("ranking_basis").get<std::string>();
        s.final_selection = std::move(fin);
    }
    return s;
}

// ---------------------------------------------------------------------------

std::vector<std::string> select_top_k(const std::vector<ScoreReport>& leaderboard, int k) {
    if (leaderboard.empty()) throw UsageError("select_top_k: leaderboard is empty");
    std::vector<ScoreReport> sorted = leaderboard;
    std::sort(sorted.begin(), sorted.end(), leaderboard_less);
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, k)),
                                                sorted.size());
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ids.push_back(sorted[i].prompt_id);
    return ids;
}

RunLogger::RunLogger(std::string path, std::uint64_t next_seq)
    : path_(std::move(path)), seq_(next_seq) {
    fs::path p(path_);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
    if (seq_ == 1) {
        std::ofstream truncate(path_, std::ios::trunc);
        return;
    }
    // Resume: drop events past the last persisted state so a resumed run's
    // log is byte-identical to an uninterrupted one.
    std::ifstream in(path_);
    if (!in) return;
    std::string kept, line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            if (json::parse(line).value("seq", std::uint64_t{0}) < seq_) kept += line + "\n";
        } catch (const json::exception&) {
        }
    }
    in.close();
    std::ofstream out(path_, std::ios::trunc);
    out << kept;
}

void RunLogger::log(const std::string& event, json fields) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t secs = std::chrono::system_clock::to_time_t(now);
    char ts[32];
    std::tm tm_utc{};
    gmtime_r(&secs, &tm_utc);
    std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);

    fields["seq"] = seq_++;
    fields["ts"] = ts;
    fields["event"] = event;
    std::ofstream out(path_, std::ios::app);
    out << fields.dump() << "\n";
}

// ---------------------------------------------------------------------------

SearchEngine::SearchEngine(SearchConfig config, std::string config_digest, PreparedCorpus corpus,
                           SearchTemplates templates, ValidationRuleSet rules, Gateway& gateway,
                           std::string run_dir)
    : config_(std::move(config)),
      config_digest_(std::move(config_digest)),
      corpus_(std::move(corpus)),
      templates_(std::move(templates)),
      rules_(std::move(rules)),
      gateway_(gateway),
      run_dir_(std::move(run_dir)) {
    config_.check();
    const int k = config_.effective_subset_count();
    if (static_cast<int>(corpus_.subsets.size()) < k)
        throw ConfigError("search: corpus provides " + std::to_string(corpus_.subsets.size()) +
                          " subsets but K=" + std::to_string(k));
    if (corpus_.val.empty()) throw ConfigError("search: validation split is empty");
}

FinalSelection SearchEngine::run() {
    state_ = SearchState{};
    state_.config_digest = config_digest_;
    logger_ = std::make_unique<RunLogger>((fs::path(run_dir_) / "log.ndjson").string(), 1);
    logger_->log("search_start", json{{"rounds", config_.rounds + 1},
                                      {"objective", to_string(config_.objective)}});
    return execute();
}

FinalSelection SearchEngine::resume() {
    const fs::path state_path = fs::path(run_dir_) / "state.json";
    if (!fs::exists(state_path))
        throw ConfigError("resume: no state file at " + state_path.string());
    state_ = SearchState::from_json(read_json_file(state_path.string()));
    if (state_.config_digest != config_digest_)
        throw ConfigError("resume: config digest mismatch (state has " + state_.config_digest +
                          ", current config is " + config_digest_ +
                          "); refusing to resume with an edited configuration");
    dedup_keys_.clear();
    for (const auto& p : state_.pool) dedup_keys_.insert(dedup_key(p.text));
    logger_ = std::make_unique<RunLogger>((fs::path(run_dir_) / "log.ndjson").string(),
                                          state_.next_log_seq);
    if (state_.final_selection) return *state_.final_selection; // completed: no-op
    return execute();
}

FinalSelection SearchEngine::execute() {
    for (int i = state_.completed_rounds + 1; i <= config_.rounds + 1; ++i) run_round(i);
    return finalize();
}

std::vector<ScoreReport> SearchEngine::round_leaderboard(int round_index) const {
    const std::string label = "S" + std::to_string(round_index);
    std::vector<ScoreReport> reports;
    for (const auto& r : state_.reports)
        if (r.eval_label == label) reports.push_back(r);
    std::sort(reports.begin(), reports.end(), leaderboard_less);
    return reports;
}

const CandidatePrompt& SearchEngine::prompt_by_id(const std::string& id) const {
    for (const auto& p : state_.pool)
        if (p.id == id) return p;
    throw UsageError("unknown prompt id '" + id + "'");
}

std::vector<std::string> SearchEngine::generate_batch(int round_index,
                                                      const std::string& meta_prompt,
                                                      int* attempts_used) {
    for (int attempt = 0; attempt < config_.parse_retry_limit; ++attempt) {
        ChatRequest req;
        req.backend_id = config_.generator_backend;
        req.model_id = config_.generator_decode.model_id;
        req.system = "";
        req.user = meta_prompt;
        req.temperature = config_.generator_decode.temperature;
        req.top_p = config_.generator_decode.top_p;
        req.max_new_tokens = config_.generator_decode.max_new_tokens;
        // Same meta-prompt on retry; the bumped seed is what makes the retry
        // a fresh draw rather than a cache replay.
        req.decode_seed = config_.generator_decode.decode_seed + static_cast<std::uint64_t>(attempt);

        ChatResponse resp = gateway_.complete(req);
        *attempts_used = attempt + 1;
        try {
            return parse_candidates(resp.text);
        } catch (const CandidateParseError& e) {
            logger_->log("parse_failure", json{{"round", round_index},
                                               {"attempt", attempt + 1},
                                               {"error", e.what()}});
        }
    }
    logger_->log("generation_failed", json{{"round", round_index},
                                           {"attempts", config_.parse_retry_limit}});
    return {};
}

ScoreReport SearchEngine::score_admitted(const CandidatePrompt& prompt,
                                         const std::vector<std::string>& eval_ids,
                                         const std::string& label) {
    return score_prompt(prompt, eval_ids, label, corpus_.index, gateway_,
                        config_.target_backend, config_.target_decode,
                        objective_spec(config_.objective), config_.parallelism);
}

void SearchEngine::run_round(int round_index) {
    const bool mutation = round_index > 1;
    const auto& subset = corpus_.subsets[static_cast<std::size_t>(round_index - 1)];

    RoundRecord record;
    record.round_index = round_index;
    record.eval_set_id = "S" + std::to_string(round_index);
    record.eval_ids = build_eval_set(round_index, subset, state_.buffer).example_ids;

    std::vector<std::string> existing;
    for (const auto& p : state_.pool) existing.push_back(p.text);

    RenderContext ctx;
    ctx.batch_size = mutation ? config_.mutants_per_round : config_.n_initial;
    ctx.output_format_token = rules_.format_token;
    ctx.variety_hints = templates_.variety_hints;
    ctx.existing_prompts = existing;

    std::vector<std::string> parsed;
    if (mutation) {
        // Seeds come from the immediately preceding round; fall back to the
        // latest round that admitted anything if that one came up empty.
        std::vector<ScoreReport> prev;
        for (int r = round_index - 1; r >= 1 && prev.empty(); --r) prev = round_leaderboard(r);
        if (!prev.empty()) {
            record.seeds_used = select_top_k(prev, config_.top_k);
            std::vector<std::string> seed_texts;
            for (const auto& id : record.seeds_used) seed_texts.push_back(prompt_by_id(id).text);
            ctx.seed_prompts = seed_texts;
            int attempts = 0;
            parsed = generate_batch(round_index, render_meta_prompt(templates_.mutate, ctx),
                                    &attempts);
            logger_->log("generation", json{{"round", round_index}, {"mode", "mutate"},
                                            {"requested", *ctx.batch_size},
                                            {"parsed", parsed.size()},
                                            {"attempts", attempts}});
        } else {
            logger_->log("generation_skipped",
                         json{{"round", round_index}, {"reason", "no seed candidates"}});
        }
    } else {
        int attempts = 0;
        parsed = generate_batch(round_index, render_meta_prompt(templates_.generate, ctx),
                                &attempts);
        logger_->log("generation", json{{"round", round_index}, {"mode", "generate"},
                                        {"requested", *ctx.batch_size},
                                        {"parsed", parsed.size()},
                                        {"attempts", attempts}});
    }
    record.parsed = static_cast<int>(parsed.size());

    // Validate, then dedup against the pool and earlier batch members.
    std::vector<std::pair<std::string, std::string>> verdicts; // (text, verdict), parse order
    std::vector<std::string> admitted_texts;
    for (const auto& text : parsed) {
        ValidationResult verdict = validate(text, rules_);
        if (!verdict.accepted) {
            const std::string reason = verdict.rule + ": " + verdict.detail;
            record.rejected.push_back({hex_digest(text), reason});
            verdicts.emplace_back(text, "rejected: " + reason);
            logger_->log("rejection", json{{"round", round_index},
                                           {"digest", hex_digest(text)},
                                           {"reason", reason}});
            continue;
        }
        if (!dedup_keys_.insert(dedup_key(text)).second) {
            ++record.dedup_dropped;
            verdicts.emplace_back(text, "duplicate");
            continue;
        }
        admitted_texts.push_back(text);
        verdicts.emplace_back(text, "admitted");
    }
    record.admitted = static_cast<int>(admitted_texts.size());

    std::vector<CandidatePrompt> admitted;
    for (const auto& text : admitted_texts) {
        CandidatePrompt p;
        p.id = "p" + std::to_string(state_.next_creation_index);
        p.text = text;
        p.creation_index = state_.next_creation_index++;
        p.origin = mutation ? CandidatePrompt::Origin::mutation
                            : CandidatePrompt::Origin::initial;
        p.round_created = round_index;
        p.parent_ids = record.seeds_used;
        p.word_count = word_count(text);
        state_.pool.push_back(p);
        admitted.push_back(p);
    }

    std::vector<ScoreReport> round_reports;
    for (const auto& p : admitted) {
        ScoreReport report = score_admitted(p, record.eval_ids, record.eval_set_id);
        logger_->log("score", json{{"round", round_index}, {"prompt", p.id},
                                   {"satisfied", report.satisfied}, {"total", report.total},
                                   {"rate", report.rate}});
        round_reports.push_back(report);
        state_.reports.push_back(std::move(report));
    }
    if (!round_reports.empty()) record.leaderboard = select_top_k(round_reports, INT32_MAX);

    state_.buffer = update_buffer(
        state_.buffer, subset, config_.alpha,
        derive_seed(config_.master_seed, "buffer:" + std::to_string(round_index)));

    logger_->log("round_complete",
                 json{{"round", round_index}, {"parsed", record.parsed},
                      {"admitted", record.admitted}, {"rejected", record.rejected.size()},
                      {"dedup_dropped", record.dedup_dropped},
                      {"buffer_size", state_.buffer.example_ids.size()}});

    state_.round_records.push_back(record);
    state_.completed_rounds = round_index;
    write_round_artifacts(round_index, verdicts, admitted);
    persist_state();
}

FinalSelection SearchEngine::finalize() {
    if (state_.pool.empty())
        throw BackendError("search failed: no candidate survived generation and validation "
                           "in any round");

    // Union of every round's top-k, re-scored on the last (largest,
    // buffer-augmented) eval set so training scores are comparable.
    std::vector<std::string> survivors;
    for (const auto& record : state_.round_records) {
        std::vector<ScoreReport> lb = round_leaderboard(record.round_index);
        if (lb.empty()) continue;
        for (const auto& id : select_top_k(lb, config_.top_k))
            if (std::find(survivors.begin(), survivors.end(), id) == survivors.end())
                survivors.push_back(id);
    }
    const std::vector<std::string>& final_ids = state_.round_records.back().eval_ids;

    std::vector<ScoreReport> final_reports;
    for (const auto& id : survivors) {
        ScoreReport report = score_admitted(prompt_by_id(id), final_ids, "final");
        logger_->log("rescore", json{{"stage", "final"}, {"prompt", id},
                                     {"rate", report.rate}});
        state_.reports.push_back(report);
        final_reports.push_back(std::move(report));
    }
    const std::vector<std::string> finalists = select_top_k(final_reports, config_.top_k);

    std::vector<std::string> val_ids;
    for (const auto& ex : corpus_.val) val_ids.push_back(ex.benchmark_id + "/" + ex.id);

    std::vector<ScoreReport> val_reports;
    for (const auto& id : finalists) {
        ScoreReport report = score_admitted(prompt_by_id(id), val_ids, "val");
        logger_->log("validation_score", json{{"prompt", id}, {"rate", report.rate}});
        state_.reports.push_back(report);
        val_reports.push_back(std::move(report));
    }
    std::sort(val_reports.begin(), val_reports.end(), leaderboard_less);

    FinalSelection selection;
    selection.winner_id = val_reports.front().prompt_id;
    selection.winner_text = prompt_by_id(selection.winner_id).text;
    selection.finalist_val_scores = val_reports;
    selection.ranking_basis =
        "per-round top-k union re-scored on the final eval set, then ranked by validation rate";
    logger_->log("selection", json{{"winner", selection.winner_id},
                                   {"val_rate", val_reports.front().rate}});

    state_.final_selection = selection;
    persist_state();

    json finalists_json = json::array();
    for (const auto& r : selection.finalist_val_scores)
        finalists_json.push_back(json{{"prompt_id", r.prompt_id},
                                      {"satisfied", r.satisfied},
                                      {"total", r.total},
                                      {"rate", r.rate}});
    write_file((fs::path(run_dir_) / "final.json").string(),
               json{{"winner_id", selection.winner_id},
                    {"winner_text", selection.winner_text},
                    {"finalist_val_scores", finalists_json},
                    {"ranking_basis", selection.ranking_basis}}
                   .dump(2) +
                   "\n");
    return selection;
}

void SearchEngine::persist_state() const {
    json j = state_.to_json();
    j["next_log_seq"] = logger_->next_seq();
    write_file((fs::path(run_dir_) / "state.json").string(), j.dump(2) + "\n");
}

void SearchEngine::write_round_artifacts(
    int round_index, const std::vector<std::pair<std::string, std::string>>& verdicts,
    const std::vector<CandidatePrompt>& admitted) {
    const fs::path round_dir = fs::path(run_dir_) / "rounds" / std::to_string(round_index);

    std::string lines;
    std::size_t admitted_pos = 0;
    for (const auto& [text, verdict] : verdicts) {
        json row{{"text", text}, {"verdict", verdict},
                 {"origin", round_index > 1 ? "mutation" : "initial"}};
        if (verdict == "admitted" && admitted_pos < admitted.size())
            row["prompt_id"] = admitted[admitted_pos++].id;
        lines += row.dump() + "\n";
    }
    write_file((round_dir / "candidates.jsonl").string(), lines);

    const RoundRecord& record = state_.round_records.back();
    json leaderboard = json::array();
    for (const auto& id : record.leaderboard) {
        for (const auto& r : state_.reports) {
            if (r.prompt_id == id && r.eval_label == record.eval_set_id) {
                leaderboard.push_back(json{{"prompt_id", id},
                                           {"satisfied", r.satisfied},
                                           {"total", r.total},
                                           {"rate", r.rate}});
                break;
            }
        }
    }
    write_file((round_dir / "leaderboard.json").string(),
               json{{"round_index", round_index},
                    {"eval_set_id", record.eval_set_id},
                    {"eval_size", record.eval_ids.size()},
                    {"leaderboard", leaderboard}}
                   .dump(2) +
                   "\n");
}

} // namespace spur
