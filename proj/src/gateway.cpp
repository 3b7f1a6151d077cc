#include "spur/gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "spur/errors.hpp"
#include "spur/rng.hpp"
#include "spur/textutil.hpp"

namespace spur {

namespace fs = std::filesystem;
using nlohmann::json;

std::string canonical_request_json(const ChatRequest& req) {
    json j{{"backend_id", req.backend_id}, {"decode_seed", req.decode_seed},
           {"max_new_tokens", req.max_new_tokens}, {"model_id", req.model_id},
           {"system", req.system}, {"temperature", req.temperature},
           {"top_p", req.top_p}, {"user", req.user}};
    return j.dump();
}

std::string request_cache_key(const ChatRequest& req) {
    const std::string canonical = canonical_request_json(req);
    const std::uint64_t a = fnv1a64(canonical);
    const std::uint64_t b = fnv1a64(canonical, 0xCBF29CE484222325ULL ^ 0x9E3779B97F4A7C15ULL);
    char buf[33];
    std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(a),
                  static_cast<unsigned long long>(b));
    return buf;
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(GatewayOptions options) : options_(std::move(options)) {}

void Gateway::register_backend(const std::string& id, std::shared_ptr<ChatBackend> backend) {
    backends_[id] = std::move(backend);
}

bool Gateway::has_backend(const std::string& id) const { return backends_.count(id) > 0; }

std::optional<std::string> Gateway::lookup(const std::string& key) {
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = memory_cache_.find(key);
        if (it != memory_cache_.end()) return it->second;
    }
    if (options_.cache_dir.empty()) return std::nullopt;
    const fs::path path = fs::path(options_.cache_dir) / key.substr(0, 2) / (key + ".json");
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
        json j = json::parse(in);
        std::string text = j.at("text").get<std::string>();
        std::lock_guard<std::mutex> lock(cache_mutex_);
        memory_cache_[key] = text;
        return text;
    } catch (const json::exception&) {
        return std::nullopt; // unreadable entry, treat as a miss and rewrite
    }
}

void Gateway::store(const std::string& key, const std::string& canonical, const ChatRequest& req,
                    const std::string& text) {
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        memory_cache_[key] = text;
    }
    if (options_.cache_dir.empty()) return;
    const fs::path dir = fs::path(options_.cache_dir) / key.substr(0, 2);
    std::error_code ec;
    fs::create_directories(dir, ec);
    json entry{{"backend_id", req.backend_id}, {"key", key},
               {"request", json::parse(canonical)}, {"text", text}};
    // Temp-file-then-rename keeps concurrent writers of identical keys safe.
    const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    const fs::path tmp = dir / (key + ".tmp" + std::to_string(tid));
    {
        std::ofstream out(tmp);
        out << entry.dump(2) << "\n";
    }
    fs::rename(tmp, dir / (key + ".json"), ec);
    if (ec) fs::remove(tmp, ec);
}

ChatResponse Gateway::complete(const ChatRequest& req) {
    if (req.temperature < 0.0) throw UsageError("complete: temperature must be >= 0");
    if (req.max_new_tokens < 1) throw UsageError("complete: max_new_tokens must be >= 1");
    auto backend_it = backends_.find(req.backend_id);
    if (backend_it == backends_.end())
        throw ConfigError("complete: no backend registered under id '" + req.backend_id + "'");
    ChatBackend& backend = *backend_it->second;

    const std::string canonical = canonical_request_json(req);
    const std::string key = request_cache_key(req);

    if (auto cached = lookup(key)) {
        hits_.fetch_add(1);
        ChatResponse resp;
        resp.text = *cached;
        resp.cached = true;
        resp.backend_id = req.backend_id;
        return resp;
    }
    misses_.fetch_add(1);

    const int attempts_allowed = options_.retries + 1;
    std::string last_error;
    for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
        const auto started = std::chrono::steady_clock::now();
        try {
            if (backend.is_live()) live_calls_.fetch_add(1);
            std::string text = backend.invoke(req);
            store(key, canonical, req, text);
            ChatResponse resp;
            resp.text = std::move(text);
            resp.cached = false;
            resp.backend_id = req.backend_id;
            resp.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - started)
                                  .count();
            resp.attempt_count = attempt;
            return resp;
        } catch (const ProtocolError&) {
            throw; // malformed payloads are not retriable
        } catch (const BackendError& e) {
            last_error = e.what();
            if (attempt < attempts_allowed) {
                const auto delay = std::chrono::milliseconds(
                    static_cast<std::int64_t>(options_.initial_backoff_ms) << (attempt - 1));
                std::this_thread::sleep_for(delay);
            }
        }
    }
    throw BackendError("backend '" + req.backend_id + "' failed after " +
                       std::to_string(attempts_allowed) + " attempts: " + last_error);
}

CacheStats Gateway::cache_stats() const {
    CacheStats stats;
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        stats.entries = memory_cache_.size();
    }
    stats.hits = hits_.load();
    stats.misses = misses_.load();
    stats.live_calls = live_calls_.load();
    return stats;
}

// ---------------------------------------------------------------------------
// Live wire backend

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {}

std::string HttpChatBackend::request_body(const ChatRequest& req) const {
    json body{{"model", config_.model.empty() ? req.model_id : config_.model},
              {"messages", json::array({json{{"role", "system"}, {"content", req.system}},
                                        json{{"role", "user"}, {"content", req.user}}})},
              {"temperature", req.temperature},
              {"top_p", req.top_p},
              {"max_tokens", req.max_new_tokens},
              {"seed", req.decode_seed}};
    return body.dump();
}

std::string HttpChatBackend::invoke(const ChatRequest& req) {
    std::string host = config_.base_url;
    std::string prefix;
    const auto scheme_end = host.find("://");
    const auto path_start = host.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start != std::string::npos) {
        prefix = host.substr(path_start);
        if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
        host = host.substr(0, path_start);
    }

    httplib::Client client(host);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* token = std::getenv(config_.api_key_env.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    auto res = client.Post(prefix + "/v1/chat/completions", headers, request_body(req),
                           "application/json");
    if (!res)
        throw BackendError("transport failure contacting " + config_.base_url + ": " +
                           httplib::to_string(res.error()));
    if (res->status != 200)
        throw BackendError("HTTP " + std::to_string(res->status) + " from " + config_.base_url +
                           ": " + res->body.substr(0, 200));
    try {
        json j = json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProtocolError("malformed completion payload from " + config_.base_url + ": " +
                            e.what());
    }
}

// ---------------------------------------------------------------------------
// Mock world

namespace {

double mock_quality(const std::string& system, const MockWorldConfig& world) {
    double q = world.base_quality;
    for (const auto& [marker, bonus] : world.marker_bonuses)
        if (contains_whole_word(system, marker)) q += bonus;
    if (q < 0.0) q = 0.0;
    if (q > 1.0) q = 1.0;
    return q;
}

std::string plus_one_decimal(const std::string& canonical) {
    std::string s = canonical;
    bool negative = false;
    if (!s.empty() && s[0] == '-') {
        negative = true;
        s.erase(s.begin());
    }
    std::string frac;
    if (auto dot = s.find('.'); dot != std::string::npos) {
        frac = s.substr(dot + 1);
        s = s.substr(0, dot);
    }
    // Increment the integer magnitude; the result always differs from gold.
    int carry = 1;
    for (auto it = s.rbegin(); it != s.rend() && carry; ++it) {
        int d = *it - '0' + carry;
        carry = d / 10;
        *it = static_cast<char>('0' + d % 10);
    }
    if (carry) s.insert(s.begin(), '1');
    std::string out = (negative ? "-" : "") + s;
    if (!frac.empty()) out += "." + frac;
    return out;
}

std::string wrong_answer_for(const Example& ex, WrongAnswerRule rule) {
    if (rule == WrongAnswerRule::next_letter_cyclic && !ex.options.empty()) {
        auto it = ex.options.find(ex.gold[0]);
        if (it != ex.options.end()) {
            auto next = std::next(it);
            if (next == ex.options.end()) next = ex.options.begin();
            return std::string(1, next->first);
        }
        return std::string(1, ex.options.begin()->first);
    }
    return plus_one_decimal(ex.gold);
}

std::string final_line_for(AnswerFormat format, const std::string& answer) {
    switch (format) {
        case AnswerFormat::hash_marker: return "#### " + answer;
        case AnswerFormat::final_answer_numeric:
        case AnswerFormat::final_answer_letter: return "Final answer: " + answer;
    }
    return "#### " + answer;
}

const char* kFillerLines[] = {
    "The matter is weighed in silence before anything is said.",
    "One reading of the page is taken, and no second reading follows.",
    "The response forms slowly and is set down once.",
    "What the inquiry asks for is produced without commentary.",
};

} // namespace

ChatResponse mock_target_complete(const ChatRequest& req, const MockWorldConfig& world,
                                  const Example& example, const BenchmarkDef& def) {
    const std::uint64_t digest = fnv1a64(req.system) ^ fnv1a64(example.id);
    const double u = static_cast<double>(digest % 1000000ULL) / 1e6;
    const double quality = mock_quality(req.system, world);

    const std::string answer =
        u < quality ? example.gold : wrong_answer_for(example, world.wrong_answer_rule);

    ChatResponse resp;
    resp.backend_id = req.backend_id;
    resp.attempt_count = 1;
    resp.text = std::string(kFillerLines[digest % 4]) + "\n" +
                final_line_for(def.answer_format, answer);
    return resp;
}

// ---------------------------------------------------------------------------
// Mock generator: seeded phrase grammar

namespace {

int scan_batch_size(const std::string& text) {
    auto pos = text.find("Produce ");
    if (pos == std::string::npos) return 4;
    pos += 8;
    int n = 0;
    bool any = false;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
        n = n * 10 + (text[pos] - '0');
        any = true;
        ++pos;
    }
    return any && n > 0 ? n : 4;
}

std::string scan_format_token(const std::string& text) {
    if (text.find("#### ") != std::string::npos) return "#### ";
    return "Final answer:";
}

const std::vector<std::string> kAdjectives = {
    "quiet", "pale",    "sealed",  "hollow", "patient", "velvet", "distant", "narrow",
    "amber", "silent",  "folded",  "cold",   "steady",  "dim",    "weathered"};
const std::vector<std::string> kNouns = {
    "archive", "corridor", "bell",    "ledger",  "vestibule", "orchard", "lintel",
    "gallery", "satchel",  "harbor",  "lattice", "veranda",   "cistern", "awning"};
const std::vector<std::string> kVerbs = {
    "rests", "waits", "settles", "gathers", "turns", "lingers", "stands", "leans", "drifts"};
const std::vector<std::string> kRoles = {
    "keeper", "warden", "usher", "custodian", "attendant", "steward", "watcher"};

std::string pick(Rng& rng, const std::vector<std::string>& pool,
                 const MockWorldConfig& world) {
    // Marker tokens are emitted only by the explicit emission draw, so the
    // grammar must never produce one by accident.
    for (int guard = 0; guard < 16; ++guard) {
        const std::string& w = pool[rng.below(pool.size())];
        if (!world.marker_bonuses.count(w)) return w;
    }
    return "plain";
}

std::string make_candidate(Rng& rng, const MockWorldConfig& world,
                           const std::string& format_token) {
    std::vector<std::string> sentences;
    sentences.push_back("You are the " + pick(rng, kRoles, world) + " of the " +
                        pick(rng, kAdjectives, world) + " " + pick(rng, kNouns, world) + ".");

    for (const auto& [marker, _] : world.marker_bonuses)
        if (rng.unit() < world.marker_emission_prob)
            sentences.push_back("Keep the " + marker + " close at hand through every watch.");

    const std::size_t target_words = 55 + rng.below(70);
    std::size_t words = 0;
    for (const auto& s : sentences) words += word_count(s);
    while (words < target_words) {
        std::string s;
        switch (rng.below(3)) {
            case 0:
                s = "The " + pick(rng, kAdjectives, world) + " " + pick(rng, kNouns, world) +
                    " " + pick(rng, kVerbs, world) + " beside the " +
                    pick(rng, kAdjectives, world) + " " + pick(rng, kNouns, world) + ".";
                break;
            case 1:
                s = "Within the " + pick(rng, kNouns, world) + ", a " +
                    pick(rng, kAdjectives, world) + " " + pick(rng, kNouns, world) + " " +
                    pick(rng, kVerbs, world) + " until the hour comes round.";
                break;
            default:
                s = "Answer what is asked of you plainly, in the manner of the " +
                    pick(rng, kAdjectives, world) + " " + pick(rng, kNouns, world) + ".";
                break;
        }
        words += word_count(s);
        sentences.push_back(std::move(s));
    }
    sentences.push_back("Conclude with a final line that begins exactly with \"" + format_token +
                        "\" and then give only the answer.");

    std::string out;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (i) out += ' ';
        out += sentences[i];
    }
    return out;
}

} // namespace

ChatResponse mock_generator_complete(const ChatRequest& req, const MockWorldConfig& world) {
    const std::string prompt_text = req.system + "\n" + req.user;
    const int batch = scan_batch_size(prompt_text);
    const std::string format_token = scan_format_token(prompt_text);

    const std::uint64_t base =
        fnv1a64(canonical_request_json(req)) ^ splitmix64(world.phrase_grammar_seed);

    nlohmann::json prompts = nlohmann::json::array();
    for (int i = 0; i < batch; ++i) {
        Rng rng(splitmix64(base ^ static_cast<std::uint64_t>(i + 1)));
        prompts.push_back(make_candidate(rng, world, format_token));
    }

    ChatResponse resp;
    resp.backend_id = req.backend_id;
    resp.attempt_count = 1;
    resp.text = nlohmann::json{{"prompts", prompts}}.dump();
    return resp;
}

// ---------------------------------------------------------------------------
// Mock backends

void MockTargetBackend::add_example(const std::string& user_message, Example example,
                                    BenchmarkDef def) {
    by_user_message_.emplace(user_message,
                             std::make_pair(std::move(example), std::move(def)));
}

std::string MockTargetBackend::invoke(const ChatRequest& req) {
    auto it = by_user_message_.find(req.user);
    if (it == by_user_message_.end())
        throw ProtocolError("mock target: user message does not correspond to a known example");
    return mock_target_complete(req, world_, it->second.first, it->second.second).text;
}

std::string MockGeneratorBackend::invoke(const ChatRequest& req) {
    return mock_generator_complete(req, world_).text;
}

} // namespace spur
