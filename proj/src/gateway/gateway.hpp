#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"

namespace mf::gw {

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.5;
    std::optional<long long> seed;
    int max_tokens = 4096;

    // all message contents joined, used by scripted matchers
    std::string flattened() const;
    std::string cache_key() const;
};

struct ChatResponse {
    std::string content;
    std::string finish_reason = "stop";
    int prompt_tokens = 0;
    int completion_tokens = 0;
    double latency_ms = 0.0;
};

class Backend {
  public:
    virtual ~Backend() = default;
    virtual ChatResponse complete(const ChatRequest& req) = 0;
    virtual bool is_remote() const { return false; }
};

struct ScriptedRule {
    std::string match;     // substring, or ECMAScript regex when is_regex
    bool is_regex = false;
    std::string response;
    int times = -1;  // rule is consumed after this many hits; -1 = unlimited
};

// Deterministic table-driven backend; first matching live rule wins.
class ScriptedBackend : public Backend {
  public:
    explicit ScriptedBackend(std::vector<ScriptedRule> rules);
    static std::shared_ptr<ScriptedBackend> from_json(const json& rules);

    ChatResponse complete(const ChatRequest& req) override;
    int call_count() const;

  private:
    mutable std::mutex mu_;
    std::vector<ScriptedRule> rules_;
    std::vector<int> hits_;
    int calls_ = 0;
};

std::shared_ptr<ScriptedBackend> scripted_rule_set(std::vector<ScriptedRule> rules);

struct HttpBackendConfig {
    std::string base_url;  // e.g. https://api.example.com
    std::string path = "/v1/chat/completions";
    std::string api_key;   // usually from METAFLOW_API_KEY
    int timeout_s = 120;
};

std::shared_ptr<Backend> make_http_backend(HttpBackendConfig cfg);

// Transparent cache plus bounded retry in front of any backend.
class Gateway {
  public:
    Gateway(std::shared_ptr<Backend> backend,
            std::optional<std::filesystem::path> cache_dir = std::nullopt,
            int max_retries = 3, int backoff_base_ms = 1000);

    ChatResponse complete(const ChatRequest& req);

    // Calls that actually reached the backend (cache hits excluded).
    int backend_calls() const;
    Backend& backend() { return *backend_; }

  private:
    std::optional<ChatResponse> cache_lookup(const std::string& key);
    void cache_store(const std::string& key, const ChatResponse& resp);

    std::shared_ptr<Backend> backend_;
    std::optional<std::filesystem::path> cache_dir_;
    int max_retries_;
    int backoff_base_ms_;
    mutable std::mutex mu_;
    std::map<std::string, ChatResponse> memory_;
    int backend_calls_ = 0;
};

// Pulls the expected keys out of a structured-object block in the
// response text (fenced blocks unwrapped). Returns a map with exactly
// the expected fields or throws MalformedOutput naming the missing ones.
std::map<std::string, std::string> extract_fields(const std::string& text,
                                                  const std::vector<std::string>& expected);

// complete() followed by extract_fields(), with one automatic repair
// round (a re-prompt asking for the missing keys) before failing.
std::map<std::string, std::string> complete_structured(Gateway& gw, const ChatRequest& req,
                                                       const std::vector<std::string>& expected);

}  // namespace mf::gw
