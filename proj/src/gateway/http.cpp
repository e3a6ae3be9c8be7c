#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>

#include "gateway/gateway.hpp"

namespace mf::gw {
namespace {

class HttpBackend : public Backend {
  public:
    explicit HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.base_url.empty()) fail(ErrorKind::ConfigError, "backend base_url not set");
    }

    bool is_remote() const override { return true; }

    ChatResponse complete(const ChatRequest& req) override {
        json body{{"model", req.model},
                  {"temperature", req.temperature},
                  {"max_tokens", req.max_tokens}};
        if (req.seed) body["seed"] = *req.seed;
        json messages = json::array();
        for (const auto& m : req.messages) {
            messages.push_back({{"role", m.role}, {"content", m.content}});
        }
        body["messages"] = messages;

        httplib::Client client(cfg_.base_url);
        client.set_connection_timeout(cfg_.timeout_s);
        client.set_read_timeout(cfg_.timeout_s);
        httplib::Headers headers;
        if (!cfg_.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + cfg_.api_key);
        }

        auto t0 = std::chrono::steady_clock::now();
        auto res = client.Post(cfg_.path, headers, body.dump(), "application/json");
        auto t1 = std::chrono::steady_clock::now();

        if (!res) {
            fail(ErrorKind::TransportError,
                 "request failed: " + httplib::to_string(res.error()));
        }
        if (res->status == 401 || res->status == 403) {
            fail(ErrorKind::AuthError, "backend rejected credentials (HTTP " +
                                           std::to_string(res->status) + ")");
        }
        if (res->status == 429) {
            std::string after = res->get_header_value("Retry-After");
            fail(ErrorKind::RateLimited,
                 "rate limited" + (after.empty() ? "" : ", retry after " + after + "s"));
        }
        if (res->status != 200) {
            fail(ErrorKind::TransportError,
                 "HTTP " + std::to_string(res->status) + ": " + res->body);
        }

        json j = json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
            fail(ErrorKind::TransportError, "unparseable completion body");
        }
        const auto& choice = j["choices"][0];
        ChatResponse out;
        out.content = choice.at("message").at("content").get<std::string>();
        out.finish_reason = choice.value("finish_reason", "stop");
        if (j.contains("usage")) {
            out.prompt_tokens = j["usage"].value("prompt_tokens", 0);
            out.completion_tokens = j["usage"].value("completion_tokens", 0);
        }
        out.latency_ms =
            std::chrono::duration<double, std::milli>(t1 - t0).count();
        if (out.finish_reason == "stop" && out.content.empty()) {
            fail(ErrorKind::TransportError, "empty content with normal finish reason");
        }
        return out;
    }

  private:
    HttpBackendConfig cfg_;
};

}  // namespace

std::shared_ptr<Backend> make_http_backend(HttpBackendConfig cfg) {
    return std::make_shared<HttpBackend>(std::move(cfg));
}

}  // namespace mf::gw
