#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "autoresearch/types.hpp"

namespace autoresearch {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view name);

struct ChatMessage {
    Role role = Role::user;
    std::string content;
};

/// One chat-completion call. temperature stays at 0 for every request the
/// pipeline builds; max_output_tokens unset means unlimited.
struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    std::optional<int> max_output_tokens;

    /// Throws InvalidRequest when the type invariants do not hold.
    void validate() const;
};

enum class FinishReason { stop, length, error };

std::string_view to_string(FinishReason reason);
std::optional<FinishReason> finish_reason_from_string(std::string_view name);

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

/// content is the verbatim model output.
struct ChatResponse {
    std::string content;
    FinishReason finish_reason = FinishReason::stop;
    TokenUsage usage;
    std::chrono::milliseconds latency{0};
};

class InvalidRequest : public Error {
public:
    using Error::Error;
};

/// Replay found no matching entry (exhausted transcript or fingerprint drift).
class ReplayMiss : public Error {
public:
    ReplayMiss(std::size_t index, std::string expected, std::string actual);

    std::size_t index() const { return index_; }
    const std::string& expected_fingerprint() const { return expected_; }
    const std::string& actual_fingerprint() const { return actual_; }

private:
    std::size_t index_;
    std::string expected_;
    std::string actual_;
};

class WireError : public Error {
public:
    WireError(int status, std::string body_excerpt, const std::string& what);

    /// HTTP status, or 0 for transport failures.
    int status() const { return status_; }
    const std::string& body_excerpt() const { return body_excerpt_; }

private:
    int status_;
    std::string body_excerpt_;
};

class TokenLimit : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t entry_index, std::size_t line, std::size_t offset, const std::string& detail);

    std::size_t entry_index() const { return entry_index_; }
    std::size_t line() const { return line_; }
    std::size_t offset() const { return offset_; }

private:
    std::size_t entry_index_;
    std::size_t line_;
    std::size_t offset_;
};

class EmptyTranscript : public Error {
public:
    using Error::Error;
};

/// Canonical text of a request: compact JSON with sorted keys over model,
/// ordered (role, content) messages, temperature and max_output_tokens.
std::string canonical_request(const ChatRequest& request);

/// Lowercase hex SHA-256 of canonical_request().
std::string fingerprint(const ChatRequest& request);

/// Lowercase hex SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view bytes);

struct TranscriptEntry {
    std::string fingerprint;
    ChatResponse response;
};

struct Transcript {
    std::vector<TranscriptEntry> entries;
    std::filesystem::path source_path;
};

/// Serialises one entry as a single NDJSON line (no trailing newline).
std::string serialize_entry(const TranscriptEntry& entry);

Transcript parse_transcript(std::string_view text, const std::filesystem::path& source = {});
Transcript load_transcript(const std::filesystem::path& path);

/// Appends entries to an NDJSON transcript file, flushing after each one.
class TranscriptWriter {
public:
    explicit TranscriptWriter(const std::filesystem::path& path);

    void append(const TranscriptEntry& entry);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::mutex mutex_;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse send(const ChatRequest& request) = 0;
};

enum class BackendKind { live, replay };

std::optional<BackendKind> backend_kind_from_string(std::string_view name);

/// Serves transcript entries in order. With fingerprint checking on, the
/// next entry must match the request; otherwise ReplayMiss. With it off the
/// backend plays back responses blindly (used to author fixtures).
class ReplayBackend : public ChatBackend {
public:
    explicit ReplayBackend(Transcript transcript, bool check_fingerprints = true);

    ChatResponse send(const ChatRequest& request) override;

    std::size_t consumed() const { return next_; }
    std::size_t remaining() const { return transcript_.entries.size() - next_; }

private:
    Transcript transcript_;
    bool check_fingerprints_;
    std::size_t next_ = 0;
};

struct WireConfig {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string api_key;
    std::chrono::seconds timeout{600};
};

/// Chat-completions over HTTP(S) with bearer-token auth. One call per send;
/// no retries at this layer.
class WireBackend : public ChatBackend {
public:
    explicit WireBackend(WireConfig config);

    ChatResponse send(const ChatRequest& request) override;

private:
    WireConfig config_;
};

/// JSON body sent over the wire for a request.
std::string wire_request_body(const ChatRequest& request);

/// Parses a chat-completions response body.
ChatResponse parse_wire_response(std::string_view body);

/// The single point of contact with a chat backend. Validates requests,
/// optionally records (request fingerprint, response) pairs, and surfaces
/// finish_reason=length as TokenLimit after recording it.
class LlmGateway {
public:
    explicit LlmGateway(std::unique_ptr<ChatBackend> backend,
                        std::shared_ptr<TranscriptWriter> recorder = nullptr,
                        bool require_zero_temperature = true);

    ChatResponse complete(const ChatRequest& request);

    std::size_t calls() const { return calls_; }

private:
    std::unique_ptr<ChatBackend> backend_;
    std::shared_ptr<TranscriptWriter> recorder_;
    bool require_zero_temperature_;
    std::size_t calls_ = 0;
};

} // namespace autoresearch
