#pragma once

// Provider-agnostic chat and embedding access. Transports do one request;
// clients add retry with exponential backoff, structured-output re-asks and
// the on-disk response cache.

#include "normalign/parallel.hpp"
#include "normalign/serialization.hpp"

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace normalign {

enum class FieldType { String, Boolean, Number, Integer, Array, Object };

std::string_view to_string(FieldType type);

struct SchemaField {
  std::string name;
  FieldType type = FieldType::String;
  bool required = true;
};

/// Declares the fields a structured completion must carry.
struct SchemaHint {
  std::string name;
  std::vector<SchemaField> fields;

  /// Stable textual form, used in cache keys and re-ask prompts.
  std::string describe() const;
};

/// Extracts the JSON object or array from a model reply and checks it against
/// the schema. Code fences and prose before the first '{' or '[' are skipped;
/// unknown fields are kept but never required.
Json parse_structured(const SchemaHint& schema, std::string_view raw_text);

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  std::optional<SchemaHint> schema_hint;
  double temperature = 0.0;
  int max_tokens = 2048;
  /// "<provider>:<model>"; filled from the transport when empty.
  std::string model_ref;

  void validate() const;
  /// SHA-256 over every field, so backend or temperature swaps never alias.
  std::string cache_key() const;
  /// SHA-256 of the user prompt; the key scripted mocks are written against.
  std::string prompt_hash() const;
};

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

struct ChatCompletion {
  std::string text;
  std::optional<Json> parsed;
  TokenUsage usage;
  bool cached = false;
};

struct RawReply {
  std::string text;
  TokenUsage usage;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  /// One attempt. Throws TransientError, AuthError or RequestError.
  virtual RawReply send(const ChatRequest& request) = 0;
  virtual std::string model_ref() const = 0;
};

/// Deterministic chat backend driven by a JSONL script. Each line is one
/// entry; an entry is chosen by, in order of precedence:
///   {"ordinal": n}          the n-th call (0-based) to this transport
///   {"prompt_hash": "..."}  ChatRequest::prompt_hash()
///   {"contains": [...]}     every listed substring occurs in the user prompt
///   {"default": true}       anything else
/// and answers with {"response": text-or-object}, or fails with
/// {"status": 429} / {"timeout": true}.
class ScriptedChatTransport : public ChatTransport {
 public:
  struct Entry {
    std::optional<std::size_t> ordinal;
    std::optional<std::string> prompt_hash;
    std::vector<std::string> contains;
    bool is_default = false;
    std::string response;
    int status = 0;
    bool timeout = false;
  };

  explicit ScriptedChatTransport(std::vector<Entry> entries, std::string model_ref = "mock:script");

  static std::shared_ptr<ScriptedChatTransport> load(const std::filesystem::path& script,
                                                     std::string model_ref = {});
  static Entry parse_entry(const Json& json);

  RawReply send(const ChatRequest& request) override;
  std::string model_ref() const override { return model_ref_; }

  std::size_t calls() const { return calls_.load(); }
  /// Every request received, in arrival order.
  std::vector<ChatRequest> captured() const;

 private:
  const Entry* select(const ChatRequest& request, std::size_t ordinal) const;

  std::vector<Entry> entries_;
  std::string model_ref_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex mutex_;
  std::vector<ChatRequest> captured_;
};

struct HttpEndpoint {
  std::string base_url;
  std::string model;
  std::string api_key;
  std::chrono::seconds timeout{120};
};

/// OpenAI-compatible /chat/completions.
class OpenAiChatTransport : public ChatTransport {
 public:
  explicit OpenAiChatTransport(HttpEndpoint endpoint);
  RawReply send(const ChatRequest& request) override;
  std::string model_ref() const override;

  /// Request body for a ChatRequest; exposed for tests.
  Json request_body(const ChatRequest& request) const;

 private:
  HttpEndpoint endpoint_;
};

/// Thread-safe content-addressed store of completions, one file per key.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path directory);

  std::optional<Json> get(const std::string& key) const;
  void put(const std::string& key, const Json& value);
  const std::filesystem::path& directory() const { return directory_; }

 private:
  std::filesystem::path path_for(const std::string& key) const;

  std::filesystem::path directory_;
  mutable std::mutex mutex_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{20'000};

  /// Delay before retry number `retry` (1-based).
  std::chrono::milliseconds delay_for(int retry) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct ClientOptions {
  RetryPolicy retry;
  int max_reasks = 2;
  std::shared_ptr<ResponseCache> cache;
  /// Defaults to std::this_thread::sleep_for.
  Sleeper sleeper;
};

struct ClientStats {
  std::size_t transport_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t retries = 0;
  std::size_t reasks = 0;
};

class ChatClient {
 public:
  explicit ChatClient(std::shared_ptr<ChatTransport> transport, ClientOptions options = {});

  /// Throws AuthError, ExhaustedRetries, RequestError, or SchemaParseError
  /// once the re-asks are used up.
  ChatCompletion complete(const ChatRequest& request) const;

  /// Positionally aligned with `requests`; failures stay in their slot.
  std::vector<Outcome<ChatCompletion>> complete_batch(const std::vector<ChatRequest>& requests,
                                                      std::size_t parallelism) const;

  ClientStats stats() const;
  std::string model_ref() const { return transport_->model_ref(); }

 private:
  RawReply send_with_retries(const ChatRequest& request) const;

  std::shared_ptr<ChatTransport> transport_;
  ClientOptions options_;
  mutable std::atomic<std::size_t> transport_calls_{0};
  mutable std::atomic<std::size_t> cache_hits_{0};
  mutable std::atomic<std::size_t> retries_{0};
  mutable std::atomic<std::size_t> reasks_{0};
};

struct EmbeddingVector {
  std::vector<double> values;
  std::string model_ref;
};

/// 0 when either vector has zero norm.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

class EmbeddingTransport {
 public:
  virtual ~EmbeddingTransport() = default;
  virtual std::vector<double> embed(std::string_view text) = 0;
  virtual std::string model_ref() const = 0;
};

/// Mock embedder: L2-normalised bag of lower-cased word tokens hashed into
/// `dimension` buckets. Order-insensitive and deterministic.
class HashEmbeddingTransport : public EmbeddingTransport {
 public:
  explicit HashEmbeddingTransport(std::size_t dimension = 256);
  std::vector<double> embed(std::string_view text) override;
  std::string model_ref() const override;

  std::size_t calls() const { return calls_.load(); }

 private:
  std::size_t dimension_;
  std::atomic<std::size_t> calls_{0};
};

/// OpenAI-compatible /embeddings.
class OpenAiEmbeddingTransport : public EmbeddingTransport {
 public:
  explicit OpenAiEmbeddingTransport(HttpEndpoint endpoint);
  std::vector<double> embed(std::string_view text) override;
  std::string model_ref() const override;

 private:
  HttpEndpoint endpoint_;
};

class EmbeddingClient {
 public:
  explicit EmbeddingClient(std::shared_ptr<EmbeddingTransport> transport,
                           ClientOptions options = {});

  EmbeddingVector embed(std::string_view text) const;

  ClientStats stats() const;
  std::string model_ref() const { return transport_->model_ref(); }

 private:
  std::shared_ptr<EmbeddingTransport> transport_;
  ClientOptions options_;
  mutable std::atomic<std::size_t> transport_calls_{0};
  mutable std::atomic<std::size_t> cache_hits_{0};
  mutable std::atomic<std::size_t> retries_{0};
};

/// POSTs JSON to `<base_url><path>` and maps HTTP status to the error classes
/// above. Shared by the OpenAI-compatible transports.
Json post_json(const HttpEndpoint& endpoint, const std::string& path, const Json& body);

}  // namespace normalign
