#include <gtest/gtest.h>

#include <json.hpp>

#include "autoresearch/llm_gateway.hpp"
#include "test_support.hpp"

using namespace autoresearch;
using namespace testing_support;

namespace {

ChatRequest one_user(const std::string& content) {
    ChatRequest r;
    r.model = "gpt-4";
    r.messages = {{Role::user, content}};
    return r;
}

// Values computed independently with Python hashlib over the canonical text.
constexpr const char* kOnePlusOne = "1eb5a8485b4a0ef774e5af40bd96487a502b3c4bd0cdae2c70f2aadd53e40a6b";
constexpr const char* kSystemFirst = "8bec42fe3f74dc73c76f31cd4a3612d2e9b07db1b9e49b3045ffb2d74c00ed65";
constexpr const char* kUserFirst = "0fc0e1d1af6912ff24a9004a2b7970b56b9a1b79e8dc771296f042fadd2acbb1";

ChatResponse with_content(const std::string& content, FinishReason reason = FinishReason::stop) {
    ChatResponse r;
    r.content = content;
    r.finish_reason = reason;
    return r;
}

class FixedBackend : public ChatBackend {
public:
    explicit FixedBackend(ChatResponse response) : response_(std::move(response)) {}
    ChatResponse send(const ChatRequest&) override { return response_; }

private:
    ChatResponse response_;
};

} // namespace

TEST(Fingerprint, CanonicalTextIsSortedCompactJson) {
    EXPECT_EQ(canonical_request(one_user("What is 1 + 1?")),
              R"({"max_output_tokens":null,"messages":[{"content":"What is 1 + 1?","role":"user"}],"model":"gpt-4","temperature":0.0})");
}

TEST(Fingerprint, MatchesIndependentSha256) {
    EXPECT_EQ(fingerprint(one_user("What is 1 + 1?")), kOnePlusOne);
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Fingerprint, MessageOrderMatters) {
    ChatRequest a;
    a.model = "gpt-4";
    a.max_output_tokens = 256;
    a.messages = {{Role::system, "first"}, {Role::user, "second"}};
    ChatRequest b = a;
    b.messages = {{Role::user, "second"}, {Role::system, "first"}};
    EXPECT_EQ(fingerprint(a), kSystemFirst);
    EXPECT_EQ(fingerprint(b), kUserFirst);
    EXPECT_NE(fingerprint(a), fingerprint(b));
}

TEST(Fingerprint, SensitiveToEveryField) {
    const ChatRequest base = one_user("x");
    ChatRequest m = base;
    m.model = "gpt-4o";
    ChatRequest t = base;
    t.temperature = 0.5;
    ChatRequest k = base;
    k.max_output_tokens = 10;
    ChatRequest c = base;
    c.messages[0].content = "y";
    for (const auto& other : {m, t, k, c}) EXPECT_NE(fingerprint(base), fingerprint(other));
}

TEST(ChatRequestValidate, RejectsBrokenRequests) {
    ChatRequest r = one_user("x");
    EXPECT_NO_THROW(r.validate());
    ChatRequest no_model = r;
    no_model.model.clear();
    EXPECT_THROW(no_model.validate(), InvalidRequest);
    ChatRequest no_msgs = r;
    no_msgs.messages.clear();
    EXPECT_THROW(no_msgs.validate(), InvalidRequest);
    ChatRequest bad_max = r;
    bad_max.max_output_tokens = 0;
    EXPECT_THROW(bad_max.validate(), InvalidRequest);
    ChatRequest neg = r;
    neg.temperature = -1;
    EXPECT_THROW(neg.validate(), InvalidRequest);
}

TEST(Transcript, SerializeParseRoundTrip) {
    TranscriptEntry e{fingerprint(one_user("q")), with_content("line1\nline2 \"quoted\"", FinishReason::length)};
    e.response.usage = {12, 34};
    const std::string line = serialize_entry(e);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    Transcript t = parse_transcript(line + "\n");
    ASSERT_EQ(t.entries.size(), 1u);
    EXPECT_EQ(t.entries[0].fingerprint, e.fingerprint);
    EXPECT_EQ(t.entries[0].response.content, e.response.content);
    EXPECT_EQ(t.entries[0].response.finish_reason, FinishReason::length);
    EXPECT_EQ(t.entries[0].response.usage.completion_tokens, 34);
}

TEST(Transcript, EmptyInputRejected) {
    EXPECT_THROW(parse_transcript(""), EmptyTranscript);
    EXPECT_THROW(parse_transcript("\n  \n"), EmptyTranscript);
}

TEST(Transcript, ParseErrorNamesEntryAndLine) {
    const std::string good = serialize_entry({"abc", with_content("ok")});
    try {
        parse_transcript(good + "\n\n{not json}\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.entry_index(), 1u);
        EXPECT_EQ(e.line(), 3u);
        EXPECT_GE(e.offset(), good.size() + 2);
    }
    EXPECT_THROW(parse_transcript(R"({"fingerprint":"a"})"), ParseError);
    EXPECT_THROW(parse_transcript(R"({"fingerprint":"a","response":{"content":"x","finish_reason":"odd"}})"),
                 ParseError);
}

TEST(ReplayBackend, ServesInOrderAndDetectsDrift) {
    Transcript t;
    t.entries = {{fingerprint(one_user("a")), with_content("A")}, {fingerprint(one_user("b")), with_content("B")}};
    ReplayBackend replay(t);
    EXPECT_EQ(replay.send(one_user("a")).content, "A");
    EXPECT_EQ(replay.consumed(), 1u);
    try {
        replay.send(one_user("c"));
        FAIL() << "expected ReplayMiss";
    } catch (const ReplayMiss& e) {
        EXPECT_EQ(e.index(), 1u);
        EXPECT_EQ(e.expected_fingerprint(), fingerprint(one_user("b")));
        EXPECT_EQ(e.actual_fingerprint(), fingerprint(one_user("c")));
    }
    EXPECT_EQ(replay.send(one_user("b")).content, "B");
    EXPECT_EQ(replay.remaining(), 0u);
    EXPECT_THROW(replay.send(one_user("b")), ReplayMiss);
}

TEST(ReplayBackend, UncheckedModeIgnoresFingerprints) {
    Transcript t;
    t.entries = {{"", with_content("anything")}};
    ReplayBackend replay(t, false);
    EXPECT_EQ(replay.send(one_user("whatever")).content, "anything");
}

TEST(LlmGateway, RejectsNonZeroTemperature) {
    LlmGateway gw(std::make_unique<FixedBackend>(with_content("x")));
    ChatRequest r = one_user("q");
    r.temperature = 0.7;
    EXPECT_THROW(gw.complete(r), InvalidRequest);
    EXPECT_EQ(gw.calls(), 0u);

    LlmGateway lenient(std::make_unique<FixedBackend>(with_content("x")), nullptr, false);
    EXPECT_EQ(lenient.complete(r).content, "x");
}

TEST(LlmGateway, ContentIsVerbatim) {
    const std::string raw = "  leading\r\n```python\nprint('x')\n```\n\ttrailing  \n";
    LlmGateway gw(std::make_unique<FixedBackend>(with_content(raw)));
    EXPECT_EQ(gw.complete(one_user("q")).content, raw);
}

TEST(LlmGateway, TokenLimitRecordedThenThrown) {
    TempDir dir;
    auto writer = std::make_shared<TranscriptWriter>(dir / "t.jsonl");
    LlmGateway gw(std::make_unique<FixedBackend>(with_content("partial", FinishReason::length)), writer);
    EXPECT_THROW(gw.complete(one_user("q")), TokenLimit);
    Transcript t = load_transcript(dir / "t.jsonl");
    ASSERT_EQ(t.entries.size(), 1u);
    EXPECT_EQ(t.entries[0].fingerprint, fingerprint(one_user("q")));
    EXPECT_EQ(t.entries[0].response.finish_reason, FinishReason::length);
}

TEST(LlmGateway, RecordThenReplayReproducesResponses) {
    TempDir dir;
    auto writer = std::make_shared<TranscriptWriter>(dir / "t.jsonl");
    std::vector<std::string> answers{"first", "second\nwith newline", "third"};
    {
        LlmGateway gw(std::make_unique<ScriptedBackend>(answers), writer);
        for (int i = 0; i < 3; ++i) gw.complete(one_user("q" + std::to_string(i)));
    }
    LlmGateway replay(std::make_unique<ReplayBackend>(load_transcript(dir / "t.jsonl")));
    for (int i = 0; i < 3; ++i) EXPECT_EQ(replay.complete(one_user("q" + std::to_string(i))).content, answers[i]);
}

TEST(WireFormat, RequestBodyAndResponseParsing) {
    ChatRequest r = one_user("hi");
    r.max_output_tokens = 5;
    const auto body = nlohmann::json::parse(wire_request_body(r));
    EXPECT_EQ(body["model"], "gpt-4");
    EXPECT_EQ(body["messages"][0]["role"], "user");
    EXPECT_EQ(body["messages"][0]["content"], "hi");
    EXPECT_EQ(body["temperature"], 0.0);
    EXPECT_EQ(body["max_tokens"], 5);

    const ChatResponse resp = parse_wire_response(
        R"({"choices":[{"message":{"role":"assistant","content":"Yes"},"finish_reason":"length"}],)"
        R"("usage":{"prompt_tokens":3,"completion_tokens":1}})");
    EXPECT_EQ(resp.content, "Yes");
    EXPECT_EQ(resp.finish_reason, FinishReason::length);
    EXPECT_EQ(resp.usage.prompt_tokens, 3);
}

TEST(ReplayFixtures, EntryCounts) {
    // appendix_c: seven stages, no repair. Repair fixtures add one CODE_REPAIR call.
    EXPECT_EQ(load_transcript(fixtures() / "transcripts" / "appendix_c.jsonl").entries.size(), 7u);
    EXPECT_EQ(load_transcript(fixtures() / "transcripts" / "repair_success.jsonl").entries.size(), 8u);
    EXPECT_EQ(load_transcript(fixtures() / "transcripts" / "repair_failure.jsonl").entries.size(), 8u);
}
