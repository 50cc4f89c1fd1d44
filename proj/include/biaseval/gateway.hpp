#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "biaseval/jsonl.hpp"
#include "biaseval/types.hpp"

/// Uniform access to chat-completion backends. Three modes:
///   Http    live endpoint, nothing persisted
///   Record  live endpoint, every (fingerprint -> response) appended to a
///           fixture file; cached fingerprints are served without a request
///   Replay  fixtures only, zero network use
/// Requests are keyed by a fingerprint over (messages, model, temperature,
/// max_tokens), which is also what makes runs resumable.
namespace biaseval::gateway {

enum class BackendKind {
    Http,
    Record,
    Replay,
};

std::string to_string(BackendKind k);
BackendKind parse_backend_kind(std::string_view s);

struct BackendConfig {
    BackendKind kind = BackendKind::Replay;
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4o-2024-05-13";
    double temperature = 0.0;  // deterministic by default; grading assumes it
    int max_tokens = 512;
    int timeout_seconds = 60;
    int max_retries = 3;
    int parallelism = 4;
    std::filesystem::path fixture_path;        // required for Record/Replay
    std::string api_key_env = "BIASEVAL_API_KEY";  // key read from env, never config
    int retry_base_ms = 1000;  // backoff base; tests shrink it to avoid real sleeps

    /// Throws ValidationError on an unusable config (Replay without a
    /// fixture path, negative temperature, non-positive parallelism...).
    void validate() const;
};

struct ModelResponse {
    std::string question_id;
    StrategyKind strategy = StrategyKind::Baseline;
    QuestionFormat format = QuestionFormat::MultipleChoice;
    std::string raw_text;
    std::string model;
    std::uint64_t fingerprint = 0;
    long wall_time_ms = 0;
    std::optional<std::string> error;  // set instead of throwing inside a batch

    bool ok() const { return !error.has_value(); }
};

/// FNV-1a over raw bytes; the building block for request fingerprints and
/// the runner's plan hash.
std::uint64_t fnv1a(const void* data, std::size_t len,
                    std::uint64_t seed = 1469598103934665603ull);

/// FNV-1a over the request fields that determine the completion. Message
/// boundaries and the numeric params are delimited so that, e.g., moving a
/// character between adjacent messages changes the hash.
std::uint64_t fingerprint_request(const std::vector<Message>& messages,
                                  const std::string& model,
                                  double temperature,
                                  int max_tokens);
std::string fingerprint_hex(std::uint64_t fp);
std::uint64_t parse_fingerprint_hex(const std::string& hex);

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// HTTP 429; the gateway retries these with exponential backoff.
class RateLimited : public TransportError {
public:
    using TransportError::TransportError;
};

class FixtureMissing : public std::runtime_error {
public:
    explicit FixtureMissing(std::uint64_t fp)
        : std::runtime_error("no fixture for fingerprint " + fingerprint_hex(fp)),
          fingerprint_(fp) {}
    std::uint64_t fingerprint() const { return fingerprint_; }

private:
    std::uint64_t fingerprint_;
};

/// Fingerprint-keyed response cache, optionally backed by a JSONL file of
/// {fingerprint, model, raw_text}. Appends are serialized; a duplicate
/// fingerprint with different text wins (last write) and logs one warning.
class FixtureStore {
public:
    FixtureStore() = default;  // in-memory only
    explicit FixtureStore(const std::filesystem::path& file);

    std::optional<std::string> lookup(std::uint64_t fp) const;
    void put(std::uint64_t fp, const std::string& model, const std::string& raw_text);
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::unordered_map<std::uint64_t, std::string> entries_;
    std::filesystem::path file_;  // empty for a purely in-memory store
    std::unique_ptr<jsonl::Writer> writer_;  // opened on first put
};

/// How a completion request is actually answered; injected so tests can
/// count calls or simulate rate limits without a server.
class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    /// Returns the first choice's content. Throws RateLimited on HTTP 429,
    /// TransportError on anything else unrecoverable.
    virtual std::string complete(const BackendConfig& config,
                                 const std::vector<Message>& messages) = 0;
};

/// POSTs the chat-completions wire format {model, messages, temperature,
/// max_tokens} with a bearer token from the configured environment variable.
class HttpTransport : public ChatTransport {
public:
    std::string complete(const BackendConfig& config,
                         const std::vector<Message>& messages) override;
};

struct GatewayStats {
    std::atomic<long> network_calls{0};
    std::atomic<long> fixture_hits{0};
    std::atomic<long> fixture_writes{0};
    std::atomic<long> rate_limit_retries{0};
};

class Gateway {
public:
    /// A null transport defaults to HttpTransport; Replay never touches it.
    explicit Gateway(BackendConfig config, std::shared_ptr<ChatTransport> transport = nullptr);

    /// Resolves one prompt. Throws FixtureMissing (Replay miss) or
    /// TransportError (network failure after retries).
    ModelResponse complete(const RenderedPrompt& prompt);

    /// Resolves prompts with at most `parallelism` in flight. Output order
    /// equals input order; per-item failures land in ModelResponse::error
    /// instead of aborting the batch.
    std::vector<ModelResponse> complete_batch(const std::vector<RenderedPrompt>& prompts);

    const BackendConfig& config() const { return config_; }
    const GatewayStats& stats() const { return stats_; }
    FixtureStore& fixtures() { return *store_; }

private:
    ModelResponse complete_or_capture(const RenderedPrompt& prompt);
    std::string transport_with_retry(const std::vector<Message>& messages);

    BackendConfig config_;
    std::shared_ptr<ChatTransport> transport_;
    std::unique_ptr<FixtureStore> store_;  // null in Http mode
    GatewayStats stats_;
};

}  // namespace biaseval::gateway
