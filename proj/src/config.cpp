#include "normalign/config.hpp"

#include "normalign/errors.hpp"
#include "normalign/text.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#ifndef NORMALIGN_DEFAULT_RESOURCES
#define NORMALIGN_DEFAULT_RESOURCES "data"
#endif

namespace normalign {

namespace {

namespace pt = boost::property_tree;

std::string strip_inline_comment(const std::string& value) {
  std::string out = value;
  for (const char* marker : {" ;", " #", "\t;", "\t#"}) {
    if (const auto pos = out.find(marker); pos != std::string::npos) out.erase(pos);
  }
  return text::trim(out);
}

std::map<std::string, std::string> section_values(const pt::ptree& section) {
  std::map<std::string, std::string> out;
  for (const auto& [key, child] : section) out[key] = strip_inline_comment(child.data());
  return out;
}

template <class T>
T to_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    T parsed{};
    if constexpr (std::is_same_v<T, double>) {
      parsed = std::stod(value, &used);
    } else {
      const long long raw = std::stoll(value, &used);
      if (raw < 0) throw std::invalid_argument("negative");
      parsed = static_cast<T>(raw);
    }
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("setting '" + key + "' is not a valid number: '" + value + "'");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

}  // namespace

double PipelineConfig::temperature(const std::string& stage) const {
  const auto it = temperatures.find(stage);
  return it == temperatures.end() ? 0.0 : it->second;
}

std::string PipelineConfig::stage_backend(const std::string& stage) const {
  if (const auto it = stages.find(stage); it != stages.end()) return it->second;
  if (stage == "postprocess") return stage_backend("extract");
  throw ConfigError("no backend configured for stage '" + stage + "' (set it under [stages])");
}

std::filesystem::path default_resources_dir() {
  if (const char* env = std::getenv("NORMALIGN_RESOURCES")) return env;
  return NORMALIGN_DEFAULT_RESOURCES;
}

PipelineConfig parse_config(const std::string& content, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(content);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  PipelineConfig config;
  config.resources = default_resources_dir();
  for (const auto& [name, section] : tree) {
    const auto values = section_values(section);
    if (name == "paths") {
      for (const auto& [key, value] : values) {
        if (key == "resources") {
          config.resources = resolve(base_dir, value);
        } else if (key == "cache") {
          if (!value.empty()) config.cache_dir = resolve(base_dir, value);
        } else {
          throw ConfigError("unknown key paths." + key);
        }
      }
    } else if (name == "settings") {
      for (const auto& [key, value] : values) {
        if (key == "language") {
          config.language = value;
        } else if (key == "parallelism") {
          config.parallelism = to_number<std::size_t>(key, value);
          if (config.parallelism == 0) throw ConfigError("parallelism must be >= 1");
        } else if (key == "max_attempts") {
          config.retry.max_attempts = static_cast<int>(to_number<std::size_t>(key, value));
        } else if (key == "base_delay_ms") {
          config.retry.base_delay = std::chrono::milliseconds(to_number<std::size_t>(key, value));
        } else if (key == "max_delay_ms") {
          config.retry.max_delay = std::chrono::milliseconds(to_number<std::size_t>(key, value));
        } else if (key == "max_reasks") {
          config.max_reasks = static_cast<int>(to_number<std::size_t>(key, value));
        } else {
          throw ConfigError("unknown key settings." + key);
        }
      }
    } else if (name == "temperature") {
      for (const auto& [key, value] : values) {
        const double t = to_number<double>(key, value);
        if (t < 0) throw ConfigError("temperature." + key + " must be >= 0");
        config.temperatures[key] = t;
      }
    } else if (name == "stages") {
      config.stages = values;
    } else if (name == "agents") {
      config.agents = values;
    } else if (name.rfind("backend.", 0) == 0) {
      BackendSpec spec;
      spec.name = name.substr(8);
      for (const auto& [key, value] : values) {
        if (key == "kind") {
          spec.kind = value;
        } else if (key == "base_url") {
          spec.base_url = value;
        } else if (key == "model") {
          spec.model = value;
        } else if (key == "api_key_env") {
          spec.api_key_env = value;
        } else if (key == "script") {
          spec.script = resolve(base_dir, value);
        } else if (key == "dimension") {
          spec.dimension = to_number<std::size_t>(key, value);
        } else if (key == "timeout_s") {
          spec.timeout_s = static_cast<int>(to_number<std::size_t>(key, value));
        } else {
          throw ConfigError("unknown key " + name + "." + key);
        }
      }
      if (spec.kind != "chat" && spec.kind != "embedding" && spec.kind != "mock" &&
          spec.kind != "mock-embedding") {
        throw ConfigError("backend " + spec.name + " has unknown kind '" + spec.kind + "'");
      }
      if ((spec.kind == "chat" || spec.kind == "embedding") &&
          (spec.base_url.empty() || spec.model.empty())) {
        throw ConfigError("backend " + spec.name + " needs base_url and model");
      }
      if (spec.kind == "mock" && spec.script.empty()) {
        throw ConfigError("mock backend " + spec.name + " needs a script");
      }
      config.backends.emplace(spec.name, std::move(spec));
    } else {
      throw ConfigError("unknown config section [" + name + "]");
    }
  }
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), std::filesystem::absolute(path).parent_path());
}

BackendRegistry::BackendRegistry(PipelineConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)) {
  if (config_.cache_dir) cache_ = std::make_shared<ResponseCache>(*config_.cache_dir);
}

const BackendSpec& BackendRegistry::spec(const std::string& name) const {
  const auto it = config_.backends.find(name);
  if (it == config_.backends.end()) throw ConfigError("no backend named '" + name + "'");
  return it->second;
}

ClientOptions BackendRegistry::client_options() const {
  ClientOptions options;
  options.retry = config_.retry;
  options.max_reasks = config_.max_reasks;
  options.cache = cache_;
  options.sleeper = sleeper_;
  return options;
}

std::shared_ptr<ChatTransport> BackendRegistry::chat_transport(const std::string& name) {
  std::lock_guard lock(mutex_);
  if (auto it = chat_transports_.find(name); it != chat_transports_.end()) return it->second;
  const auto& s = spec(name);
  std::shared_ptr<ChatTransport> transport;
  if (s.kind == "mock") {
    transport = ScriptedChatTransport::load(s.script, "mock:" + s.script.filename().string());
  } else if (s.kind == "chat") {
    HttpEndpoint endpoint{s.base_url, s.model, {}, std::chrono::seconds(s.timeout_s)};
    if (!s.api_key_env.empty()) {
      const char* key = std::getenv(s.api_key_env.c_str());
      if (key == nullptr) {
        throw ConfigError("backend " + name + " needs environment variable " + s.api_key_env);
      }
      endpoint.api_key = key;
    }
    transport = std::make_shared<OpenAiChatTransport>(std::move(endpoint));
  } else {
    throw ConfigError("backend " + name + " is not a chat backend (kind " + s.kind + ")");
  }
  chat_transports_.emplace(name, transport);
  return transport;
}

std::shared_ptr<ChatClient> BackendRegistry::chat(const std::string& name) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = chat_clients_.find(name); it != chat_clients_.end()) return it->second;
  }
  auto client = std::make_shared<ChatClient>(chat_transport(name), client_options());
  std::lock_guard lock(mutex_);
  return chat_clients_.emplace(name, std::move(client)).first->second;
}

std::shared_ptr<EmbeddingClient> BackendRegistry::embedding(const std::string& name) {
  std::lock_guard lock(mutex_);
  if (auto it = embedding_clients_.find(name); it != embedding_clients_.end()) return it->second;
  const auto& s = spec(name);
  std::shared_ptr<EmbeddingTransport> transport;
  if (s.kind == "mock-embedding") {
    transport = std::make_shared<HashEmbeddingTransport>(s.dimension);
  } else if (s.kind == "embedding") {
    HttpEndpoint endpoint{s.base_url, s.model, {}, std::chrono::seconds(s.timeout_s)};
    if (!s.api_key_env.empty()) {
      const char* key = std::getenv(s.api_key_env.c_str());
      if (key == nullptr) {
        throw ConfigError("backend " + name + " needs environment variable " + s.api_key_env);
      }
      endpoint.api_key = key;
    }
    transport = std::make_shared<OpenAiEmbeddingTransport>(std::move(endpoint));
  } else {
    throw ConfigError("backend " + name + " is not an embedding backend (kind " + s.kind + ")");
  }
  auto client = std::make_shared<EmbeddingClient>(std::move(transport), client_options());
  return embedding_clients_.emplace(name, std::move(client)).first->second;
}

std::string BackendRegistry::describe(const std::string& name) {
  if (name == kEqualityJudge) return std::string(kEqualityJudge) + " (builtin)";
  const auto& s = spec(name);
  if (s.kind == "mock" || s.kind == "chat") return name + " (" + chat(name)->model_ref() + ")";
  return name + " (" + embedding(name)->model_ref() + ")";
}

ClientStats BackendRegistry::total_stats() const {
  std::lock_guard lock(mutex_);
  ClientStats total;
  auto add = [&](const ClientStats& s) {
    total.transport_calls += s.transport_calls;
    total.cache_hits += s.cache_hits;
    total.retries += s.retries;
    total.reasks += s.reasks;
  };
  for (const auto& [name, client] : chat_clients_) add(client->stats());
  for (const auto& [name, client] : embedding_clients_) add(client->stats());
  return total;
}

}  // namespace normalign
