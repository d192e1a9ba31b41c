#pragma once

// Pipeline configuration file (INI) and the registry that turns named
// backend declarations into shared clients.
//
//   [paths]
//   resources = ../data          ; prompts/ and lexicons/
//   cache = .cache               ; omit to disable the response cache
//
//   [settings]
//   language = da
//   parallelism = 4
//   max_attempts = 5             ; per request, including the first
//   base_delay_ms = 500
//   max_reasks = 2
//
//   [temperature]
//   respond = 1.0                ; stages not listed run at 0
//
//   [stages]
//   embed = jina
//   verify = gpt-oss-20b
//   dilemma = gpt-5-mini
//   extract = gpt-oss-120b
//   postprocess = gpt-oss-120b   ; defaults to the extract backend
//   match = gemma                ; "equality" selects the built-in mock judge
//   respond = mistral-small
//
//   [agents]
//   mistral-small = mistral-small  ; agent -> backend for `respond --agent`
//
//   [backend.gemma]
//   kind = chat                  ; chat | embedding | mock | mock-embedding
//   base_url = https://openrouter.ai/api/v1
//   model = google/gemma-3-27b-it
//   api_key_env = NORMALIGN_KEY_OPENROUTER
//
//   [backend.judge-script]
//   kind = mock
//   script = scripts/judge.jsonl ; relative to this file
//
// Credentials are read only from the environment variable named by
// api_key_env.

#include "normalign/model_client.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace normalign {

struct BackendSpec {
  std::string name;
  std::string kind;
  std::string base_url;
  std::string model;
  std::string api_key_env;
  std::filesystem::path script;
  std::size_t dimension = 256;
  int timeout_s = 120;
};

struct PipelineConfig {
  std::filesystem::path resources;
  std::optional<std::filesystem::path> cache_dir;
  std::string language = "da";
  std::size_t parallelism = 1;
  RetryPolicy retry;
  int max_reasks = 2;
  std::map<std::string, double> temperatures;
  std::map<std::string, std::string> stages;
  std::map<std::string, std::string> agents;
  std::map<std::string, BackendSpec> backends;

  double temperature(const std::string& stage) const;
  /// Backend name configured for a stage; throws ConfigError when unset.
  std::string stage_backend(const std::string& stage) const;
};

/// Directory holding the bundled prompts/ and lexicons/.
std::filesystem::path default_resources_dir();

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

/// Lazily builds one client per named backend and shares it between stages.
class BackendRegistry {
 public:
  static constexpr const char* kEqualityJudge = "equality";

  explicit BackendRegistry(PipelineConfig config, Sleeper sleeper = {});

  std::shared_ptr<ChatClient> chat(const std::string& name);
  std::shared_ptr<EmbeddingClient> embedding(const std::string& name);
  /// The transport behind a chat backend, e.g. to inspect a scripted mock.
  std::shared_ptr<ChatTransport> chat_transport(const std::string& name);

  /// "name (model_ref)" for reports.
  std::string describe(const std::string& name);

  /// Sum over every client built so far.
  ClientStats total_stats() const;

  const PipelineConfig& config() const { return config_; }

 private:
  const BackendSpec& spec(const std::string& name) const;
  ClientOptions client_options() const;

  PipelineConfig config_;
  Sleeper sleeper_;
  std::shared_ptr<ResponseCache> cache_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<ChatTransport>> chat_transports_;
  std::map<std::string, std::shared_ptr<ChatClient>> chat_clients_;
  std::map<std::string, std::shared_ptr<EmbeddingClient>> embedding_clients_;
};

}  // namespace normalign
