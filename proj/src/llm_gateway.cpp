#include "autoresearch/llm_gateway.hpp"

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace autoresearch {

using nlohmann::json;

std::string_view to_string(Role role) {
    switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "user";
}

std::optional<Role> role_from_string(std::string_view name) {
    if (name == "system") return Role::system;
    if (name == "user") return Role::user;
    if (name == "assistant") return Role::assistant;
    return std::nullopt;
}

std::string_view to_string(FinishReason reason) {
    switch (reason) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::error: return "error";
    }
    return "error";
}

std::optional<FinishReason> finish_reason_from_string(std::string_view name) {
    if (name == "stop") return FinishReason::stop;
    if (name == "length") return FinishReason::length;
    if (name == "error") return FinishReason::error;
    return std::nullopt;
}

std::optional<BackendKind> backend_kind_from_string(std::string_view name) {
    if (name == "live") return BackendKind::live;
    if (name == "replay") return BackendKind::replay;
    return std::nullopt;
}

void ChatRequest::validate() const {
    if (model.empty()) throw InvalidRequest("chat request has an empty model identifier");
    if (messages.empty()) throw InvalidRequest("chat request has no messages");
    if (!std::isfinite(temperature) || temperature < 0.0) {
        throw InvalidRequest("chat request temperature must be a finite value >= 0");
    }
    if (max_output_tokens && *max_output_tokens <= 0) {
        throw InvalidRequest("max_output_tokens must be positive when set");
    }
}

ReplayMiss::ReplayMiss(std::size_t index, std::string expected, std::string actual)
    : Error(expected.empty()
                ? "replay miss at request " + std::to_string(index) + ": transcript exhausted"
                : "replay miss at request " + std::to_string(index) + ": transcript has " +
                      expected + ", request is " + actual),
      index_(index), expected_(std::move(expected)), actual_(std::move(actual)) {}

WireError::WireError(int status, std::string body_excerpt, const std::string& what)
    : Error(what), status_(status), body_excerpt_(std::move(body_excerpt)) {}

ParseError::ParseError(std::size_t entry_index, std::size_t line, std::size_t offset,
                       const std::string& detail)
    : Error("transcript entry " + std::to_string(entry_index) + " (line " + std::to_string(line) +
            ", offset " + std::to_string(offset) + "): " + detail),
      entry_index_(entry_index), line_(line), offset_(offset) {}

std::string canonical_request(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    json doc = {
        {"model", request.model},
        {"messages", std::move(messages)},
        {"temperature", request.temperature},
        {"max_output_tokens",
         request.max_output_tokens ? json(*request.max_output_tokens) : json(nullptr)},
    };
    // nlohmann::json objects keep keys sorted, which fixes the field order.
    return doc.dump();
}

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0x0f]);
    }
    return out;
}

std::string fingerprint(const ChatRequest& request) {
    return sha256_hex(canonical_request(request));
}

std::string serialize_entry(const TranscriptEntry& entry) {
    json doc = {
        {"fingerprint", entry.fingerprint},
        {"response",
         {{"content", entry.response.content},
          {"finish_reason", to_string(entry.response.finish_reason)},
          {"usage",
           {{"prompt_tokens", entry.response.usage.prompt_tokens},
            {"completion_tokens", entry.response.usage.completion_tokens}}}}},
    };
    return doc.dump(-1, ' ', false, json::error_handler_t::replace);
}

namespace {

TranscriptEntry entry_from_json(const json& doc, std::size_t index, std::size_t line,
                                std::size_t offset) {
    auto fail = [&](const std::string& detail) -> ParseError {
        return ParseError(index, line, offset, detail);
    };
    if (!doc.is_object()) throw fail("entry is not a JSON object");
    if (!doc.contains("fingerprint") || !doc["fingerprint"].is_string()) {
        throw fail("missing string field 'fingerprint'");
    }
    if (!doc.contains("response") || !doc["response"].is_object()) {
        throw fail("missing object field 'response'");
    }
    const json& r = doc["response"];
    if (!r.contains("content") || !r["content"].is_string()) {
        throw fail("missing string field 'response.content'");
    }
    TranscriptEntry entry;
    entry.fingerprint = doc["fingerprint"].get<std::string>();
    entry.response.content = r["content"].get<std::string>();
    if (r.contains("finish_reason")) {
        if (!r["finish_reason"].is_string()) throw fail("'finish_reason' is not a string");
        auto reason = finish_reason_from_string(r["finish_reason"].get<std::string>());
        if (!reason) throw fail("unknown finish_reason '" + r["finish_reason"].get<std::string>() + "'");
        entry.response.finish_reason = *reason;
    }
    if (r.contains("usage") && r["usage"].is_object()) {
        const json& u = r["usage"];
        entry.response.usage.prompt_tokens = u.value("prompt_tokens", std::int64_t{0});
        entry.response.usage.completion_tokens = u.value("completion_tokens", std::int64_t{0});
    }
    return entry;
}

} // namespace

Transcript parse_transcript(std::string_view text, const std::filesystem::path& source) {
    Transcript transcript;
    transcript.source_path = source;
    std::size_t offset = 0;
    std::size_t line_no = 0;
    while (offset < text.size()) {
        std::size_t end = text.find('\n', offset);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(offset, end - offset);
        ++line_no;
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
            const std::size_t index = transcript.entries.size();
            json doc;
            try {
                doc = json::parse(line);
            } catch (const json::parse_error& e) {
                throw ParseError(index, line_no, offset + e.byte, e.what());
            }
            transcript.entries.push_back(entry_from_json(doc, index, line_no, offset));
        }
        offset = end + 1;
    }
    if (transcript.entries.empty()) {
        throw EmptyTranscript("transcript " + source.string() + " has no entries");
    }
    return transcript;
}

Transcript load_transcript(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open transcript " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_transcript(buffer.str(), path);
}

TranscriptWriter::TranscriptWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::app) {
    if (!out_) throw Error("cannot open transcript for writing: " + path.string());
}

void TranscriptWriter::append(const TranscriptEntry& entry) {
    std::lock_guard lock(mutex_);
    out_ << serialize_entry(entry) << '\n';
    out_.flush();
    if (!out_) throw Error("failed writing transcript " + path_.string());
}

ReplayBackend::ReplayBackend(Transcript transcript, bool check_fingerprints)
    : transcript_(std::move(transcript)), check_fingerprints_(check_fingerprints) {}

ChatResponse ReplayBackend::send(const ChatRequest& request) {
    const std::string actual = fingerprint(request);
    if (next_ >= transcript_.entries.size()) throw ReplayMiss(next_, "", actual);
    const TranscriptEntry& entry = transcript_.entries[next_];
    if (check_fingerprints_ && entry.fingerprint != actual) {
        throw ReplayMiss(next_, entry.fingerprint, actual);
    }
    ++next_;
    return entry.response;
}

LlmGateway::LlmGateway(std::unique_ptr<ChatBackend> backend,
                       std::shared_ptr<TranscriptWriter> recorder, bool require_zero_temperature)
    : backend_(std::move(backend)), recorder_(std::move(recorder)),
      require_zero_temperature_(require_zero_temperature) {
    if (!backend_) throw Error("LlmGateway requires a backend");
}

ChatResponse LlmGateway::complete(const ChatRequest& request) {
    request.validate();
    if (require_zero_temperature_ && request.temperature != 0.0) {
        throw InvalidRequest("pipeline requests must use temperature 0");
    }
    const auto started = std::chrono::steady_clock::now();
    ChatResponse response = backend_->send(request);
    if (response.latency.count() == 0) {
        response.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
    }
    ++calls_;
    if (recorder_) recorder_->append({fingerprint(request), response});
    if (response.finish_reason == FinishReason::length) {
        throw TokenLimit("model output hit the token limit (finish_reason=length)");
    }
    if (response.finish_reason == FinishReason::error) {
        throw WireError(0, response.content.substr(0, 200), "backend reported finish_reason=error");
    }
    return response;
}

} // namespace autoresearch
