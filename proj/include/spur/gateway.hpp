#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "spur/corpus.hpp"

namespace spur {

struct ChatRequest {
    std::string backend_id;
    std::string model_id;
    std::string system;
    std::string user;
    double temperature = 0.0;
    double top_p = 1.0;
    int max_new_tokens = 256;
    std::uint64_t decode_seed = 42;
};

struct ChatResponse {
    std::string text; // byte-preserved backend output
    bool cached = false;
    std::string backend_id;
    std::int64_t latency_ms = 0; // 0 for cache hits
    int attempt_count = 0;       // 0 for cache hits
};

struct CacheStats {
    std::uint64_t entries = 0;
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t live_calls = 0; // wire-backend invocations only
};

// Sorted-key, whitespace-free serialization; the cache key input.
std::string canonical_request_json(const ChatRequest& req);
std::string request_cache_key(const ChatRequest& req);

// One backend attempt. Throws BackendError on transport/status failures
// (retried by the gateway) and ProtocolError on malformed payloads (not
// retried).
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string invoke(const ChatRequest& req) = 0;
    virtual bool is_live() const = 0;
};

struct GatewayOptions {
    std::string cache_dir; // empty: in-memory cache only
    int retries = 2;       // attempts = retries + 1
    int initial_backoff_ms = 500;
};

// Routes requests to registered backends with content-addressed response
// caching, bounded retries and call accounting. Safe for concurrent callers.
class Gateway {
public:
    explicit Gateway(GatewayOptions options = {});

    void register_backend(const std::string& id, std::shared_ptr<ChatBackend> backend);
    bool has_backend(const std::string& id) const;

    ChatResponse complete(const ChatRequest& req);

    CacheStats cache_stats() const;

private:
    std::optional<std::string> lookup(const std::string& key);
    void store(const std::string& key, const std::string& canonical, const ChatRequest& req,
               const std::string& text);

    GatewayOptions options_;
    std::map<std::string, std::shared_ptr<ChatBackend>> backends_;
    mutable std::mutex cache_mutex_;
    std::unordered_map<std::string, std::string> memory_cache_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
    std::atomic<std::uint64_t> live_calls_{0};
};

// ---------------------------------------------------------------------------
// Live OpenAI-compatible wire backend.

struct HttpBackendConfig {
    std::string base_url; // e.g. http://localhost:8000
    std::string model;
    std::string api_key_env; // name of the env var holding the bearer token
    int timeout_seconds = 120;
};

class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);
    std::string invoke(const ChatRequest& req) override;
    bool is_live() const override { return true; }

    // Request body for a given request; exposed so tests can assert decode
    // parameters are serialized exactly as configured.
    std::string request_body(const ChatRequest& req) const;

private:
    HttpBackendConfig config_;
};

// ---------------------------------------------------------------------------
// Deterministic mock backends for offline runs and hermetic tests.

enum class WrongAnswerRule { numeric_plus_one, next_letter_cyclic };

struct MockWorldConfig {
    double base_quality = 0.5;
    std::map<std::string, double> marker_bonuses;
    WrongAnswerRule wrong_answer_rule = WrongAnswerRule::numeric_plus_one;
    std::uint64_t phrase_grammar_seed = 0;
    double marker_emission_prob = 0.0;
};

// Correct-iff u < quality, where u is a stable digest of (system prompt,
// example id) and quality is base_quality plus whole-word marker bonuses,
// clipped to [0,1]. Pure function of its arguments.
ChatResponse mock_target_complete(const ChatRequest& req, const MockWorldConfig& world,
                                  const Example& example, const BenchmarkDef& def);

// Emits a {"prompts": [...]} batch from a seeded phrase grammar; batch size
// and format token are recovered from the rendered meta-prompt.
ChatResponse mock_generator_complete(const ChatRequest& req, const MockWorldConfig& world);

class MockTargetBackend : public ChatBackend {
public:
    explicit MockTargetBackend(MockWorldConfig world) : world_(std::move(world)) {}

    // Wiring registers each eval example under its rendered user message.
    void add_example(const std::string& user_message, Example example, BenchmarkDef def);

    std::string invoke(const ChatRequest& req) override;
    bool is_live() const override { return false; }

    const MockWorldConfig& world() const { return world_; }

private:
    MockWorldConfig world_;
    std::unordered_map<std::string, std::pair<Example, BenchmarkDef>> by_user_message_;
};

class MockGeneratorBackend : public ChatBackend {
public:
    explicit MockGeneratorBackend(MockWorldConfig world) : world_(std::move(world)) {}
    std::string invoke(const ChatRequest& req) override;
    bool is_live() const override { return false; }

private:
    MockWorldConfig world_;
};

} // namespace spur
