#include "normalign/model_client.hpp"

#include "normalign/errors.hpp"
#include "normalign/hashing.hpp"
#include "normalign/text.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <thread>

namespace normalign {

namespace {

// Returns [begin, end) of the first balanced JSON object/array, honouring
// string literals, or npos when there is none.
std::pair<std::size_t, std::size_t> find_json_span(std::string_view text) {
  const auto begin = text.find_first_of("{[");
  if (begin == std::string_view::npos) return {std::string_view::npos, std::string_view::npos};
  std::vector<char> stack;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = begin; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      stack.push_back(c == '{' ? '}' : ']');
    } else if (c == '}' || c == ']') {
      if (stack.empty() || stack.back() != c) break;
      stack.pop_back();
      if (stack.empty()) return {begin, i + 1};
    }
  }
  return {std::string_view::npos, std::string_view::npos};
}

bool has_type(const Json& value, FieldType type) {
  switch (type) {
    case FieldType::String:
      return value.is_string();
    case FieldType::Boolean:
      return value.is_boolean();
    case FieldType::Number:
      return value.is_number();
    case FieldType::Integer:
      return value.is_number_integer();
    case FieldType::Array:
      return value.is_array();
    case FieldType::Object:
      return value.is_object();
  }
  return false;
}

void default_sleep(std::chrono::milliseconds delay) { std::this_thread::sleep_for(delay); }

template <class Fn>
auto retry_loop(const RetryPolicy& policy, const Sleeper& sleeper, std::atomic<std::size_t>& calls,
                std::atomic<std::size_t>& retries, Fn&& attempt) {
  std::string last_error;
  const int attempts = std::max(1, policy.max_attempts);
  for (int i = 1; i <= attempts; ++i) {
    try {
      ++calls;
      return attempt();
    } catch (const TransientError& e) {
      last_error = e.what();
      if (i == attempts) break;
      ++retries;
      const auto delay = policy.delay_for(i);
      spdlog::debug("transient failure ({}), retry {} in {} ms", e.what(), i, delay.count());
      (sleeper ? sleeper : Sleeper(default_sleep))(delay);
    }
  }
  throw ExhaustedRetries(attempts, last_error);
}

std::string reask_prompt(const std::string& original, const SchemaHint& schema,
                         const SchemaParseError& error) {
  return original +
         "\n\nYour previous answer could not be parsed: " + error.what() +
         "\nAnswer again with only a JSON object with these fields: " + schema.describe();
}

}  // namespace

std::string_view to_string(FieldType type) {
  switch (type) {
    case FieldType::String:
      return "string";
    case FieldType::Boolean:
      return "boolean";
    case FieldType::Number:
      return "number";
    case FieldType::Integer:
      return "integer";
    case FieldType::Array:
      return "array";
    case FieldType::Object:
      return "object";
  }
  return "string";
}

std::string SchemaHint::describe() const {
  std::string out = "{";
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out += ", ";
    out += fields[i].name;
    out += ": ";
    out += to_string(fields[i].type);
    if (!fields[i].required) out += "?";
  }
  out += "}";
  return out;
}

Json parse_structured(const SchemaHint& schema, std::string_view raw_text) {
  const auto [begin, end] = find_json_span(raw_text);
  if (begin == std::string_view::npos) {
    throw SchemaParseError("no JSON object in model output");
  }
  Json value;
  try {
    value = Json::parse(raw_text.substr(begin, end - begin));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaParseError(std::string("malformed JSON in model output: ") + e.what());
  }
  if (schema.fields.empty()) return value;
  if (!value.is_object()) throw SchemaParseError("expected a JSON object");

  std::vector<std::string> missing;
  std::vector<std::string> mistyped;
  for (const auto& field : schema.fields) {
    const auto it = value.find(field.name);
    if (it == value.end() || it->is_null()) {
      if (field.required) missing.push_back(field.name);
      continue;
    }
    if (!has_type(*it, field.type)) {
      mistyped.push_back(field.name + " (expected " + std::string(to_string(field.type)) + ")");
    }
  }
  if (missing.empty() && mistyped.empty()) return value;

  std::string message;
  std::vector<std::string> names;
  if (!missing.empty()) {
    message = "missing field(s): " + text::join(missing, ", ");
    names.insert(names.end(), missing.begin(), missing.end());
  }
  if (!mistyped.empty()) {
    if (!message.empty()) message += "; ";
    message += "mistyped field(s): " + text::join(mistyped, ", ");
    for (const auto& m : mistyped) names.push_back(m.substr(0, m.find(' ')));
  }
  throw SchemaParseError(message, std::move(names));
}

void ChatRequest::validate() const {
  if (user_prompt.empty()) throw InvalidInput("chat request has an empty user prompt");
  if (!(temperature >= 0.0)) throw InvalidInput("temperature must be >= 0");
  if (max_tokens <= 0) throw InvalidInput("max_tokens must be positive");
}

std::string ChatRequest::cache_key() const {
  const Json key{{"system", system_prompt},
                 {"user", user_prompt},
                 {"schema", schema_hint ? schema_hint->describe() : std::string()},
                 {"temperature", temperature},
                 {"max_tokens", max_tokens},
                 {"model", model_ref}};
  return sha256_hex(dump_line(key));
}

std::string ChatRequest::prompt_hash() const { return sha256_hex(user_prompt); }

// ---- scripted mock ----------------------------------------------------------

ScriptedChatTransport::ScriptedChatTransport(std::vector<Entry> entries, std::string model_ref)
    : entries_(std::move(entries)), model_ref_(std::move(model_ref)) {}

ScriptedChatTransport::Entry ScriptedChatTransport::parse_entry(const Json& json) {
  Entry entry;
  if (json.contains("ordinal")) entry.ordinal = json.at("ordinal").get<std::size_t>();
  if (json.contains("prompt_hash")) entry.prompt_hash = json.at("prompt_hash").get<std::string>();
  if (json.contains("contains")) {
    const auto& contains = json.at("contains");
    if (contains.is_string()) {
      entry.contains.push_back(contains.get<std::string>());
    } else {
      entry.contains = contains.get<std::vector<std::string>>();
    }
  }
  entry.is_default = json.value("default", false);
  if (json.contains("response")) {
    const auto& response = json.at("response");
    entry.response = response.is_string() ? response.get<std::string>() : dump_line(response);
  }
  entry.status = json.value("status", 0);
  entry.timeout = json.value("timeout", false);
  if (!entry.ordinal && !entry.prompt_hash && entry.contains.empty() && !entry.is_default) {
    throw ConfigError("script entry has no selector: " + dump_line(json));
  }
  return entry;
}

std::shared_ptr<ScriptedChatTransport> ScriptedChatTransport::load(
    const std::filesystem::path& script, std::string model_ref) {
  std::vector<Entry> entries;
  for (const auto& value : read_jsonl_values(script)) entries.push_back(parse_entry(value));
  if (model_ref.empty()) model_ref = "mock:" + script.filename().string();
  return std::make_shared<ScriptedChatTransport>(std::move(entries), std::move(model_ref));
}

const ScriptedChatTransport::Entry* ScriptedChatTransport::select(const ChatRequest& request,
                                                                  std::size_t ordinal) const {
  for (const auto& entry : entries_) {
    if (entry.ordinal && *entry.ordinal == ordinal) return &entry;
  }
  const std::string hash = request.prompt_hash();
  for (const auto& entry : entries_) {
    if (entry.prompt_hash && *entry.prompt_hash == hash) return &entry;
  }
  for (const auto& entry : entries_) {
    if (entry.contains.empty()) continue;
    bool all = true;
    for (const auto& needle : entry.contains) {
      if (request.user_prompt.find(needle) == std::string::npos) {
        all = false;
        break;
      }
    }
    if (all) return &entry;
  }
  for (const auto& entry : entries_) {
    if (entry.is_default) return &entry;
  }
  return nullptr;
}

RawReply ScriptedChatTransport::send(const ChatRequest& request) {
  std::size_t ordinal = 0;
  {
    std::lock_guard lock(mutex_);
    ordinal = calls_.fetch_add(1);
    captured_.push_back(request);
  }
  const Entry* entry = select(request, ordinal);
  if (entry == nullptr) {
    throw RequestError("mock script has no entry for prompt " + request.prompt_hash());
  }
  if (entry->timeout) throw TransientError(0, "scripted timeout");
  if (entry->status == 401 || entry->status == 403) {
    throw AuthError("scripted HTTP " + std::to_string(entry->status));
  }
  if (entry->status == 408 || entry->status == 429 || entry->status >= 500) {
    throw TransientError(entry->status, "scripted HTTP " + std::to_string(entry->status));
  }
  if (entry->status >= 400) {
    throw RequestError("scripted HTTP " + std::to_string(entry->status));
  }
  return RawReply{entry->response, TokenUsage{static_cast<long>(request.user_prompt.size() / 4),
                                              static_cast<long>(entry->response.size() / 4)}};
}

std::vector<ChatRequest> ScriptedChatTransport::captured() const {
  std::lock_guard lock(mutex_);
  return captured_;
}

// ---- cache ------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path directory) : directory_(std::move(directory)) {
  std::filesystem::create_directories(directory_);
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
  return directory_ / key.substr(0, 2) / (key + ".json");
}

std::optional<Json> ResponseCache::get(const std::string& key) const {
  std::lock_guard lock(mutex_);
  const auto path = path_for(key);
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    return Json::parse(read_text(path));
  } catch (const std::exception& e) {
    spdlog::warn("ignoring unreadable cache entry {}: {}", path.string(), e.what());
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& key, const Json& value) {
  std::lock_guard lock(mutex_);
  write_text_atomic(path_for(key), dump_line(value));
}

std::chrono::milliseconds RetryPolicy::delay_for(int retry) const {
  const double scaled = static_cast<double>(base_delay.count()) * std::pow(multiplier, retry - 1);
  const double capped = std::min(scaled, static_cast<double>(max_delay.count()));
  return std::chrono::milliseconds(static_cast<long long>(capped));
}

// ---- chat client --------------------------------------------------------------

ChatClient::ChatClient(std::shared_ptr<ChatTransport> transport, ClientOptions options)
    : transport_(std::move(transport)), options_(std::move(options)) {
  if (!transport_) throw ConfigError("chat client needs a transport");
}

RawReply ChatClient::send_with_retries(const ChatRequest& request) const {
  return retry_loop(options_.retry, options_.sleeper, transport_calls_, retries_,
                    [&] { return transport_->send(request); });
}

ChatCompletion ChatClient::complete(const ChatRequest& original) const {
  ChatRequest request = original;
  if (request.model_ref.empty()) request.model_ref = transport_->model_ref();
  request.validate();
  const std::string key = request.cache_key();

  if (options_.cache) {
    if (auto hit = options_.cache->get(key)) {
      ChatCompletion completion;
      completion.text = hit->value("text", "");
      completion.usage.prompt_tokens = hit->value("prompt_tokens", 0L);
      completion.usage.completion_tokens = hit->value("completion_tokens", 0L);
      completion.cached = true;
      try {
        if (request.schema_hint) completion.parsed = parse_structured(*request.schema_hint, completion.text);
        ++cache_hits_;
        return completion;
      } catch (const SchemaParseError&) {
        spdlog::warn("cached completion {} no longer parses; refetching", key);
      }
    }
  }

  auto store = [&](const RawReply& reply) {
    if (!options_.cache) return;
    options_.cache->put(key, Json{{"text", reply.text},
                                  {"prompt_tokens", reply.usage.prompt_tokens},
                                  {"completion_tokens", reply.usage.completion_tokens}});
  };

  if (!request.schema_hint) {
    RawReply reply = send_with_retries(request);
    store(reply);
    return ChatCompletion{std::move(reply.text), std::nullopt, reply.usage, false};
  }

  ChatRequest attempt = request;
  for (int asked = 0;; ++asked) {
    RawReply reply = send_with_retries(attempt);
    try {
      Json parsed = parse_structured(*request.schema_hint, reply.text);
      store(reply);
      return ChatCompletion{std::move(reply.text), std::move(parsed), reply.usage, false};
    } catch (const SchemaParseError& e) {
      if (asked >= options_.max_reasks) throw;
      ++reasks_;
      attempt.user_prompt = reask_prompt(request.user_prompt, *request.schema_hint, e);
    }
  }
}

std::vector<Outcome<ChatCompletion>> ChatClient::complete_batch(
    const std::vector<ChatRequest>& requests, std::size_t parallelism) const {
  return parallel_map(requests.size(), parallelism,
                      [&](std::size_t i) { return complete(requests[i]); });
}

ClientStats ChatClient::stats() const {
  return ClientStats{transport_calls_.load(), cache_hits_.load(), retries_.load(), reasks_.load()};
}

// ---- embeddings ---------------------------------------------------------------

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) {
    throw InvalidInput("embedding dimensions differ: " + std::to_string(a.values.size()) + " vs " +
                       std::to_string(b.values.size()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

HashEmbeddingTransport::HashEmbeddingTransport(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw ConfigError("embedding dimension must be positive");
}

std::vector<double> HashEmbeddingTransport::embed(std::string_view input) {
  ++calls_;
  std::vector<double> values(dimension_, 0.0);
  for (const auto& token : text::word_tokens(text::to_lower(input))) {
    std::uint64_t hash = 1469598103934665603ULL;
    for (unsigned char c : token) {
      hash ^= c;
      hash *= 1099511628211ULL;
    }
    values[hash % dimension_] += 1.0;
  }
  double norm = 0.0;
  for (double v : values) norm += v * v;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& v : values) v /= norm;
  }
  return values;
}

std::string HashEmbeddingTransport::model_ref() const {
  return "mock:hash-bow-" + std::to_string(dimension_);
}

EmbeddingClient::EmbeddingClient(std::shared_ptr<EmbeddingTransport> transport,
                                 ClientOptions options)
    : transport_(std::move(transport)), options_(std::move(options)) {
  if (!transport_) throw ConfigError("embedding client needs a transport");
}

EmbeddingVector EmbeddingClient::embed(std::string_view input) const {
  if (input.empty()) throw InvalidInput("cannot embed empty text");
  const std::string model = transport_->model_ref();
  const std::string key = sha256_hex(dump_line(Json{{"embed", std::string(input)}, {"model", model}}));
  if (options_.cache) {
    if (auto hit = options_.cache->get(key); hit && hit->contains("values")) {
      ++cache_hits_;
      return EmbeddingVector{hit->at("values").get<std::vector<double>>(), model};
    }
  }
  auto values = retry_loop(options_.retry, options_.sleeper, transport_calls_, retries_,
                           [&] { return transport_->embed(input); });
  if (values.empty()) throw RequestError("embedding backend returned an empty vector");
  for (double v : values) {
    if (!std::isfinite(v)) throw RequestError("embedding backend returned a non-finite value");
  }
  if (options_.cache) options_.cache->put(key, Json{{"values", values}});
  return EmbeddingVector{std::move(values), model};
}

ClientStats EmbeddingClient::stats() const {
  return ClientStats{transport_calls_.load(), cache_hits_.load(), retries_.load(), 0};
}

}  // namespace normalign
