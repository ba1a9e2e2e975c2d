#include "doctest.h"

#include <memory>

#include "ragforge/errors.hpp"
#include "ragforge/live_backend.hpp"
#include "ragforge/scripted_backend.hpp"
#include "test_support.hpp"

using namespace ragforge;
using namespace ragforge::llm;

namespace {

// Scripted HTTP responses; throwing entries simulate connect failures.
class FakeTransport : public Transport {
public:
    struct Step {
        bool throws = false;
        HttpResponse response;
    };

    explicit FakeTransport(std::vector<Step> steps) : steps_(std::move(steps)) {}

    HttpResponse post_json(const std::string& path, const std::string& body,
                           const HttpHeaders& headers) override {
        ++calls;
        last_path = path;
        last_body = body;
        last_headers = headers;
        if (steps_.empty()) throw TransportError("fake transport exhausted");
        Step step = steps_.front();
        steps_.erase(steps_.begin());
        if (step.throws) throw TransportError("connection refused (scripted)");
        return step.response;
    }

    int calls = 0;
    std::string last_path;
    std::string last_body;
    HttpHeaders last_headers;

private:
    std::vector<Step> steps_;
};

std::string ok_chat_body(const std::string& content) {
    Json msg = Json::object();
    msg["role"] = "assistant";
    msg["content"] = content;
    Json body = Json::object();
    body["choices"] = Json::array({Json{{"message", msg}}});
    return body.dump();
}

ChatRequest simple_request() {
    ChatRequest req;
    req.messages = {ChatMessage::system("s"), ChatMessage::user("hello")};
    req.params.temperature = 0.2;
    return req;
}

LiveBackend::Config live_config() {
    LiveBackend::Config cfg;
    cfg.base_url = "http://example.test/v1";
    cfg.model = "test-model";
    cfg.api_key = "sk-unit";
    cfg.retry.max_attempts = 3;
    cfg.retry.backoff_base_ms = 0;
    return cfg;
}

}  // namespace

TEST_CASE("chat_complete validates the conversation and the reply") {
    auto backend = std::make_shared<ScriptedBackend>(
        std::vector<ScriptEntry>{testsup::text_entry("fine")});
    // Missing system message is rejected before the backend is consulted.
    CHECK_THROWS_AS(chat_complete(*backend, {ChatMessage::user("q")}, {}, SamplingParams{}),
                    ValidationError);
    CHECK(backend->calls_made() == 0);

    const ChatMessage reply = chat_complete(
        *backend, {ChatMessage::system("s"), ChatMessage::user("q")}, {}, SamplingParams{});
    CHECK(reply.content == "fine");
}

TEST_CASE("recording backend keeps every forwarded request") {
    auto inner = std::make_shared<ScriptedBackend>(
        std::vector<ScriptEntry>{testsup::text_entry("one"), testsup::text_entry("two")});
    RecordingBackend recorder(inner);
    ChatRequest req = simple_request();
    recorder.complete(req);
    req.messages.push_back(ChatMessage::assistant("one"));
    req.messages.push_back(ChatMessage::user("again"));
    recorder.complete(req);

    CHECK(recorder.call_count() == 2);
    REQUIRE(recorder.recorded().size() == 2);
    CHECK(recorder.recorded()[0].messages.size() == 2);
    CHECK(recorder.recorded()[1].messages.size() == 4);
    const std::string transcript = recorder.transcript_text();
    CHECK(transcript.find("hello") != std::string::npos);
    CHECK(transcript.find("again") != std::string::npos);
}

TEST_CASE("sequential script replays in order and underruns loudly") {
    auto backend = std::make_shared<ScriptedBackend>(
        std::vector<ScriptEntry>{testsup::text_entry("first"), testsup::text_entry("second")});
    CHECK_FALSE(backend->keyed());
    CHECK(backend->complete(simple_request()).content == "first");
    CHECK(backend->complete(simple_request()).content == "second");
    CHECK(backend->remaining() == 0);
    CHECK_THROWS_WITH_AS(backend->complete(simple_request()),
                         doctest::Contains("script underrun after 2 turns"), ScriptUnderrun);
}

TEST_CASE("keyed script serves interleaved consumers by user text") {
    std::vector<ScriptEntry> entries{
        testsup::keyed(testsup::text_entry("alpha-1"), "topic alpha"),
        testsup::keyed(testsup::text_entry("alpha-2"), "topic alpha"),
        testsup::keyed(testsup::text_entry("beta-1"), "topic beta"),
    };
    auto backend = std::make_shared<ScriptedBackend>(entries);
    CHECK(backend->keyed());

    ChatRequest alpha;
    alpha.messages = {ChatMessage::system("s"), ChatMessage::user("about topic alpha please")};
    ChatRequest beta;
    beta.messages = {ChatMessage::system("s"), ChatMessage::user("about topic beta please")};

    // Interleaved: same-key entries arrive in listed order.
    CHECK(backend->complete(alpha).content == "alpha-1");
    CHECK(backend->complete(beta).content == "beta-1");
    CHECK(backend->complete(alpha).content == "alpha-2");
    CHECK_THROWS_WITH_AS(backend->complete(alpha), doctest::Contains("no unconsumed entry"),
                         ScriptUnderrun);
}

TEST_CASE("keyed script with last_user_text keys on the newest user message") {
    std::vector<ScriptEntry> entries{
        testsup::keyed(testsup::text_entry("matched"), "second prompt"),
    };
    auto backend = std::make_shared<ScriptedBackend>(entries, last_user_text);
    ChatRequest req;
    req.messages = {ChatMessage::system("s"), ChatMessage::user("first prompt"),
                    ChatMessage::assistant("ok"), ChatMessage::user("second prompt")};
    CHECK(backend->complete(req).content == "matched");
}

TEST_CASE("mixing keyed and sequential entries is rejected") {
    std::vector<ScriptEntry> entries{
        testsup::keyed(testsup::text_entry("a"), "k"),
        testsup::text_entry("b"),
    };
    CHECK_THROWS_WITH_AS(ScriptedBackend{entries}, doctest::Contains("mixes keyed"),
                         ValidationError);
}

TEST_CASE("script jsonl loading assigns stable call ids") {
    testsup::TempDir tmp;
    const auto path = tmp.path() / "script.jsonl";
    util::atomic_write_file(
        path,
        "{\"content\": \"go\", \"tool_calls\": [{\"name\": \"f\", \"arguments\": {\"q\": 1}}]}\n");
    auto backend = ScriptedBackend::from_jsonl(path);
    const ChatMessage turn = backend->complete(simple_request());
    REQUIRE(turn.tool_calls.size() == 1);
    CHECK(turn.tool_calls[0].call_id == "call-0");
    CHECK(turn.tool_calls[0].arguments == Json{{"q", 1}});
}

TEST_CASE("script entries need content or tool calls") {
    CHECK_THROWS_WITH_AS(script_turn_from_json(Json{{"key", "k"}}, 4),
                         doctest::Contains("entry 5"), ParseError);
}

TEST_CASE("live backend retries transport failures, then succeeds") {
    auto transport = std::make_shared<FakeTransport>(std::vector<FakeTransport::Step>{
        {true, {}},
        {false, {500, "upstream exploded"}},
        {false, {200, ok_chat_body("recovered")}},
    });
    LiveBackend backend(live_config(), transport);
    const ChatMessage reply = backend.complete(simple_request());
    CHECK(reply.content == "recovered");
    CHECK(transport->calls == 3);
    CHECK(transport->last_path == "/v1/chat/completions");
    bool has_auth = false;
    for (const auto& [k, v] : transport->last_headers) {
        has_auth = has_auth || (k == "Authorization" && v == "Bearer sk-unit");
    }
    CHECK(has_auth);
}

TEST_CASE("live backend gives up after exactly max_attempts") {
    auto transport = std::make_shared<FakeTransport>(std::vector<FakeTransport::Step>{
        {true, {}}, {true, {}}, {true, {}}, {false, {200, ok_chat_body("never reached")}}});
    LiveBackend backend(live_config(), transport);
    CHECK_THROWS_AS(backend.complete(simple_request()), TransportError);
    CHECK(transport->calls == 3);
}

TEST_CASE("live backend retries 429 and 5xx but not 400") {
    auto t429 = std::make_shared<FakeTransport>(std::vector<FakeTransport::Step>{
        {false, {429, "slow down"}}, {false, {200, ok_chat_body("after backoff")}}});
    LiveBackend b429(live_config(), t429);
    CHECK(b429.complete(simple_request()).content == "after backoff");
    CHECK(t429->calls == 2);

    auto t400 = std::make_shared<FakeTransport>(
        std::vector<FakeTransport::Step>{{false, {400, "bad request"}}});
    LiveBackend b400(live_config(), t400);
    CHECK_THROWS_WITH_AS(b400.complete(simple_request()), doctest::Contains("HTTP 400"),
                         ProtocolError);
    CHECK(t400->calls == 1);
}

TEST_CASE("live backend surfaces malformed completions as protocol errors") {
    auto bad_json = std::make_shared<FakeTransport>(
        std::vector<FakeTransport::Step>{{false, {200, "not json"}}});
    LiveBackend b1(live_config(), bad_json);
    CHECK_THROWS_AS(b1.complete(simple_request()), ProtocolError);

    auto no_choices = std::make_shared<FakeTransport>(
        std::vector<FakeTransport::Step>{{false, {200, "{\"choices\": []}"}}});
    LiveBackend b2(live_config(), no_choices);
    CHECK_THROWS_WITH_AS(b2.complete(simple_request()), doctest::Contains("no choices"),
                         ProtocolError);
}

TEST_CASE("request body carries model, temperature, tools, and wire messages") {
    LiveBackend backend(live_config(), std::make_shared<FakeTransport>(
                                           std::vector<FakeTransport::Step>{}));
    ChatRequest req = simple_request();
    req.tools = {dense_search_tool_schema()};
    req.params.temperature = 0.7;
    req.params.max_tokens = 64;
    const Json body = backend.build_request_body(req);
    CHECK(body["model"] == "test-model");
    CHECK(body["temperature"] == 0.7);
    CHECK(body["max_tokens"] == 64);
    CHECK(body["tool_choice"] == "auto");
    REQUIRE(body["messages"].size() == 2);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["tools"][0]["function"]["name"] == "query_knowledge_base_dense");

    ChatRequest bare = simple_request();
    const Json no_tools = backend.build_request_body(bare);
    CHECK_FALSE(no_tools.contains("tools"));
    CHECK_FALSE(no_tools.contains("max_tokens"));
}
