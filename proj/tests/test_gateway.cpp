#include <doctest.h>

#include <filesystem>

#include "fixture.hpp"
#include "gateway/gateway.hpp"

using namespace mf;
using namespace mf::gw;

namespace {

ChatRequest request(const std::string& text) {
    ChatRequest req;
    req.model = "executor";
    req.messages = {{"system", "sys"}, {"user", text}};
    req.seed = 1;
    return req;
}

// deliberately failing backend for the retry tests
struct Flaky : Backend {
    int failures_left;
    int calls = 0;
    explicit Flaky(int failures) : failures_left(failures) {}
    ChatResponse complete(const ChatRequest&) override {
        ++calls;
        if (failures_left-- > 0) fail(ErrorKind::TransportError, "connection reset");
        return {"recovered", "stop", 0, 0, 0.0};
    }
};

}  // namespace

TEST_CASE("scripted backend: first live matching rule wins, ordered") {
    auto backend = scripted_rule_set({
        {"alpha", false, "first", -1},
        {"alpha beta", false, "second", -1},
    });
    CHECK(backend->complete(request("alpha beta")).content == "first");
}

TEST_CASE("scripted backend: times-limited rules are consumed") {
    auto backend = scripted_rule_set({
        {"go", false, "limited", 2},
        {"go", false, "fallback", -1},
    });
    CHECK(backend->complete(request("go")).content == "limited");
    CHECK(backend->complete(request("go")).content == "limited");
    CHECK(backend->complete(request("go")).content == "fallback");
}

TEST_CASE("scripted backend: regex rules use ECMAScript syntax") {
    auto backend = scripted_rule_set({
        {R"(skill:add[\s\S]*topic:add)", true, "gated", -1},
        {"", false, "default", -1},
    });
    CHECK(backend->complete(request("skill:add ...\n... topic:add q")).content == "gated");
    CHECK(backend->complete(request("topic:add but no skill")).content == "default");
}

TEST_CASE("script miss names the closest rule") {
    auto backend = scripted_rule_set({
        {"compute the determinant", false, "a", -1},
        {"unrelated lorem ipsum", false, "b", -1},
    });
    try {
        backend->complete(request("please invert the matrix M"));
        FAIL("expected ScriptMiss");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ScriptMiss);
        CHECK(std::string(e.what()).find("closest rule") != std::string::npos);
    }
}

TEST_CASE("script miss diagnostic prefers the most similar rule") {
    auto backend = scripted_rule_set({
        {"zzzz qqqq", false, "a", -1},
        {"Solve the following problem step by step", false, "b", -1},
    });
    try {
        backend->complete(request("Solve the following problem quickly"));
        FAIL("expected ScriptMiss");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("Solve the following") != std::string::npos);
    }
}

TEST_CASE("gateway memory cache short-circuits identical requests") {
    auto backend = scripted_rule_set({{"", false, "cached", -1}});
    Gateway gw(backend);
    CHECK(gw.complete(request("same")).content == "cached");
    CHECK(gw.complete(request("same")).content == "cached");
    CHECK(gw.backend_calls() == 1);
    CHECK(backend->call_count() == 1);
    gw.complete(request("different"));
    CHECK(gw.backend_calls() == 2);
}

TEST_CASE("gateway disk cache survives across instances") {
    auto dir = fixture::scratch_dir("gwcache");
    auto backend = scripted_rule_set({{"", false, "persisted", -1}});
    {
        Gateway gw(backend, dir);
        gw.complete(request("durable"));
        CHECK(gw.backend_calls() == 1);
    }
    {
        Gateway gw(backend, dir);
        CHECK(gw.complete(request("durable")).content == "persisted");
        CHECK(gw.backend_calls() == 0);
    }
}

TEST_CASE("cache keys depend on model, temperature, seed and messages") {
    ChatRequest a = request("text");
    ChatRequest b = a;
    CHECK(a.cache_key() == b.cache_key());
    b.temperature = a.temperature + 0.1;
    CHECK(a.cache_key() != b.cache_key());
    b = a;
    b.model = "other";
    CHECK(a.cache_key() != b.cache_key());
    b = a;
    b.seed = 99;
    CHECK(a.cache_key() != b.cache_key());
    b = a;
    b.messages[1].content = "text2";
    CHECK(a.cache_key() != b.cache_key());
}

TEST_CASE("transient backend errors are retried with backoff") {
    auto flaky = std::make_shared<Flaky>(2);
    Gateway gw(flaky, std::nullopt, 3, 1);
    CHECK(gw.complete(request("r")).content == "recovered");
    CHECK(flaky->calls == 3);
}

TEST_CASE("retries exhausted propagates the transport error") {
    auto flaky = std::make_shared<Flaky>(10);
    Gateway gw(flaky, std::nullopt, 3, 1);
    try {
        gw.complete(request("r"));
        FAIL("expected TransportError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::TransportError);
    }
    CHECK(flaky->calls == 4);  // initial try + 3 retries
}

TEST_CASE("extract_fields unwraps fences and surrounding prose") {
    auto direct = extract_fields(R"({"thought": "t", "name": "n"})", {"thought", "name"});
    CHECK(direct.at("name") == "n");

    auto fenced = extract_fields("Here you go:\n```json\n{\"a\": \"1\", \"b\": \"2\"}\n```\n",
                                 {"a", "b"});
    CHECK(fenced.at("a") == "1");

    auto prose = extract_fields("Sure. {\"x\": \"deep {nested} braces\"} Done.", {"x"});
    CHECK(prose.at("x") == "deep {nested} braces");
}

TEST_CASE("extract_fields names the missing keys") {
    try {
        extract_fields(R"({"thought": "only"})", {"thought", "name", "code"});
        FAIL("expected MalformedOutput");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MalformedOutput);
        std::string msg = e.what();
        CHECK(msg.find("name") != std::string::npos);
        CHECK(msg.find("code") != std::string::npos);
    }
}

TEST_CASE("complete_structured runs one repair round before failing") {
    SUBCASE("repair succeeds") {
        auto backend = scripted_rule_set({
            {"go", false, "garbage output", 1},
            {"go", false, R"({"answer": "fixed"})", -1},
        });
        Gateway gw(backend);
        auto fields = complete_structured(gw, request("go"), {"answer"});
        CHECK(fields.at("answer") == "fixed");
        CHECK(backend->call_count() == 2);
    }
    SUBCASE("repair fails") {
        auto backend = scripted_rule_set({{"go", false, "still garbage", -1}});
        Gateway gw(backend);
        try {
            complete_structured(gw, request("go"), {"answer"});
            FAIL("expected MalformedOutput");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::MalformedOutput);
        }
        CHECK(backend->call_count() == 2);
    }
}
