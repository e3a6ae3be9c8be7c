#include "gateway/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <regex>
#include <thread>

namespace mf::gw {

std::string ChatRequest::flattened() const {
    std::string out;
    for (const auto& m : messages) {
        out += m.content;
        out += '\n';
    }
    return out;
}

std::string ChatRequest::cache_key() const {
    std::string blob = model + "\x1f" + std::to_string(temperature) + "\x1f";
    blob += seed ? std::to_string(*seed) : std::string("-");
    blob += "\x1f" + std::to_string(max_tokens);
    for (const auto& m : messages) {
        blob += "\x1e" + m.role + "\x1f" + m.content;
    }
    return digest_hex(blob);
}

// ---------------------------------------------------------------- scripted

ScriptedBackend::ScriptedBackend(std::vector<ScriptedRule> rules)
    : rules_(std::move(rules)), hits_(rules_.size(), 0) {}

std::shared_ptr<ScriptedBackend> scripted_rule_set(std::vector<ScriptedRule> rules) {
    return std::make_shared<ScriptedBackend>(std::move(rules));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const json& rules) {
    std::vector<ScriptedRule> out;
    for (const auto& r : rules) {
        ScriptedRule rule;
        rule.match = r.at("match").get<std::string>();
        rule.is_regex = r.value("regex", false);
        rule.response = r.at("response").get<std::string>();
        rule.times = r.value("times", -1);
        out.push_back(std::move(rule));
    }
    return std::make_shared<ScriptedBackend>(std::move(out));
}

namespace {

bool rule_matches(const ScriptedRule& rule, const std::string& prompt) {
    if (rule.is_regex) {
        return std::regex_search(prompt, std::regex(rule.match));
    }
    return prompt.find(rule.match) != std::string::npos;
}

// crude similarity for the ScriptMiss diagnostic: shared 4-gram count
size_t similarity(const std::string& a, const std::string& b) {
    if (a.size() < 4) return 0;
    size_t n = 0;
    for (size_t i = 0; i + 4 <= a.size(); i += 2) {
        if (b.find(a.substr(i, 4)) != std::string::npos) ++n;
    }
    return n;
}

}  // namespace

ChatResponse ScriptedBackend::complete(const ChatRequest& req) {
    std::string prompt = req.flattened();
    std::lock_guard lock(mu_);
    ++calls_;
    for (size_t i = 0; i < rules_.size(); ++i) {
        const auto& rule = rules_[i];
        if (rule.times >= 0 && hits_[i] >= rule.times) continue;
        if (rule_matches(rule, prompt)) {
            ++hits_[i];
            ChatResponse resp;
            resp.content = rule.response;
            resp.prompt_tokens = static_cast<int>(prompt.size() / 4);
            resp.completion_tokens = static_cast<int>(rule.response.size() / 4);
            return resp;
        }
    }
    std::string closest = "<no rules>";
    size_t best = 0;
    for (const auto& rule : rules_) {
        size_t s = similarity(rule.match, prompt);
        if (s >= best && !rule.match.empty()) {
            best = s;
            closest = rule.match;
        }
    }
    fail(ErrorKind::ScriptMiss,
         "no scripted rule matches the prompt; closest rule: \"" + closest + "\"");
}

int ScriptedBackend::call_count() const {
    std::lock_guard lock(mu_);
    return calls_;
}

// ----------------------------------------------------------------- gateway

Gateway::Gateway(std::shared_ptr<Backend> backend,
                 std::optional<std::filesystem::path> cache_dir, int max_retries,
                 int backoff_base_ms)
    : backend_(std::move(backend)),
      cache_dir_(std::move(cache_dir)),
      max_retries_(max_retries),
      backoff_base_ms_(backoff_base_ms) {}

std::optional<ChatResponse> Gateway::cache_lookup(const std::string& key) {
    {
        std::lock_guard lock(mu_);
        auto it = memory_.find(key);
        if (it != memory_.end()) return it->second;
    }
    if (cache_dir_) {
        auto path = *cache_dir_ / (key + ".json");
        if (std::filesystem::exists(path)) {
            json j = json::parse(read_file(path));
            ChatResponse resp;
            resp.content = j.at("content").get<std::string>();
            resp.finish_reason = j.value("finish_reason", "stop");
            resp.prompt_tokens = j.value("prompt_tokens", 0);
            resp.completion_tokens = j.value("completion_tokens", 0);
            std::lock_guard lock(mu_);
            memory_[key] = resp;
            return resp;
        }
    }
    return std::nullopt;
}

void Gateway::cache_store(const std::string& key, const ChatResponse& resp) {
    {
        std::lock_guard lock(mu_);
        memory_[key] = resp;
    }
    if (cache_dir_) {
        json j{{"content", resp.content},
               {"finish_reason", resp.finish_reason},
               {"prompt_tokens", resp.prompt_tokens},
               {"completion_tokens", resp.completion_tokens}};
        write_file_atomic(*cache_dir_ / (key + ".json"), json_dump_stable(j));
    }
}

ChatResponse Gateway::complete(const ChatRequest& req) {
    if (req.messages.empty()) fail(ErrorKind::ConfigError, "empty message list");
    if (req.temperature < 0.0 || req.temperature > 2.0)
        fail(ErrorKind::ConfigError, "temperature out of [0,2]");

    std::string key = req.cache_key();
    if (auto hit = cache_lookup(key)) return *hit;

    int attempt = 0;
    while (true) {
        try {
            {
                std::lock_guard lock(mu_);
                ++backend_calls_;
            }
            ChatResponse resp = backend_->complete(req);
            cache_store(key, resp);
            return resp;
        } catch (const Error& e) {
            bool transient = e.kind() == ErrorKind::TransportError ||
                             e.kind() == ErrorKind::RateLimited;
            if (!transient || attempt >= max_retries_) throw;
            int delay = backoff_base_ms_ << attempt;
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            ++attempt;
        }
    }
}

int Gateway::backend_calls() const {
    std::lock_guard lock(mu_);
    return backend_calls_;
}

// ------------------------------------------------------------ field parsing

namespace {

// Returns the first balanced {...} block, honoring string literals.
std::optional<std::string> first_json_object(const std::string& text) {
    size_t start = text.find('{');
    while (start != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        for (size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (c == '\\') {
                    ++i;
                } else if (c == '"') {
                    in_string = false;
                }
            } else if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) return text.substr(start, i - start + 1);
            }
        }
        start = text.find('{', start + 1);
    }
    return std::nullopt;
}

std::string strip_fences(const std::string& text) {
    size_t open = text.find("```");
    if (open == std::string::npos) return text;
    size_t body = text.find('\n', open);
    if (body == std::string::npos) return text;
    size_t close = text.find("```", body);
    if (close == std::string::npos) return text;
    return text.substr(body + 1, close - body - 1);
}

}  // namespace

std::map<std::string, std::string> extract_fields(const std::string& text,
                                                  const std::vector<std::string>& expected) {
    if (expected.empty()) fail(ErrorKind::ConfigError, "expected field list is empty");
    std::map<std::string, std::string> out;
    std::vector<std::string> missing;

    auto try_parse = [&](const std::string& candidate) -> bool {
        auto obj = first_json_object(candidate);
        if (!obj) return false;
        json j = json::parse(*obj, nullptr, false);
        if (j.is_discarded() || !j.is_object()) return false;
        out.clear();
        for (const auto& key : expected) {
            if (!j.contains(key)) continue;
            const auto& v = j.at(key);
            out[key] = v.is_string() ? v.get<std::string>() : v.dump();
        }
        return true;
    };

    if (!try_parse(strip_fences(text))) try_parse(text);

    for (const auto& key : expected) {
        if (!out.count(key)) missing.push_back(key);
    }
    if (!missing.empty()) {
        std::string names;
        for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
        fail(ErrorKind::MalformedOutput, "missing fields: [" + names + "]");
    }
    return out;
}

std::map<std::string, std::string> complete_structured(Gateway& gw, const ChatRequest& req,
                                                       const std::vector<std::string>& expected) {
    ChatResponse resp = gw.complete(req);
    try {
        return extract_fields(resp.content, expected);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::MalformedOutput) throw;
        ChatRequest repair = req;
        repair.messages.push_back({"assistant", resp.content});
        std::string keys;
        for (const auto& k : expected) keys += (keys.empty() ? "" : ", ") + ("\"" + k + "\"");
        repair.messages.push_back(
            {"user", "Your previous reply could not be parsed (" + std::string(e.what()) +
                         "). Reply with only a JSON object containing the keys: " + keys + "."});
        ChatResponse second = gw.complete(repair);
        return extract_fields(second.content, expected);
    }
}

}  // namespace mf::gw
