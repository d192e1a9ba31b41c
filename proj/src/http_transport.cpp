#include "normalign/errors.hpp"
#include "normalign/model_client.hpp"

#include <httplib.h>

namespace normalign {

namespace {

struct SplitUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

SplitUrl split_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base_url needs a scheme: " + base_url);
  const auto path_start = base_url.find('/', scheme_end + 3);
  SplitUrl out;
  out.scheme_host_port = base_url.substr(0, path_start);
  if (path_start != std::string::npos) out.path_prefix = base_url.substr(path_start);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

std::string provider_of(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto host_end = base_url.find_first_of(":/", host_start);
  return base_url.substr(host_start, host_end - host_start);
}

}  // namespace

Json post_json(const HttpEndpoint& endpoint, const std::string& path, const Json& body) {
  const auto url = split_url(endpoint.base_url);
  httplib::Client client(url.scheme_host_port);
  client.set_connection_timeout(endpoint.timeout);
  client.set_read_timeout(endpoint.timeout);
  client.set_write_timeout(endpoint.timeout);
  httplib::Headers headers;
  if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);

  const auto result = client.Post(url.path_prefix + path, headers, dump_line(body), "application/json");
  if (!result) {
    throw TransientError(0, "request to " + endpoint.base_url + path +
                                " failed: " + httplib::to_string(result.error()));
  }
  const int status = result->status;
  if (status == 401 || status == 403) {
    throw AuthError("HTTP " + std::to_string(status) + " from " + endpoint.base_url);
  }
  if (status == 408 || status == 409 || status == 429 || status >= 500) {
    throw TransientError(status, "HTTP " + std::to_string(status) + " from " + endpoint.base_url);
  }
  if (status < 200 || status >= 300) {
    throw RequestError("HTTP " + std::to_string(status) + " from " + endpoint.base_url + ": " +
                       result->body.substr(0, 300));
  }
  try {
    return Json::parse(result->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw TransientError(status, std::string("unparseable response body: ") + e.what());
  }
}

OpenAiChatTransport::OpenAiChatTransport(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  split_url(endpoint_.base_url);
}

std::string OpenAiChatTransport::model_ref() const {
  return provider_of(endpoint_.base_url) + ":" + endpoint_.model;
}

Json OpenAiChatTransport::request_body(const ChatRequest& request) const {
  Json messages = Json::array();
  if (!request.system_prompt.empty()) {
    messages.push_back(Json{{"role", "system"}, {"content", request.system_prompt}});
  }
  messages.push_back(Json{{"role", "user"}, {"content", request.user_prompt}});
  Json body{{"model", endpoint_.model},
            {"messages", std::move(messages)},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
  if (request.schema_hint) body["response_format"] = Json{{"type", "json_object"}};
  return body;
}

RawReply OpenAiChatTransport::send(const ChatRequest& request) {
  const Json response = post_json(endpoint_, "/chat/completions", request_body(request));
  const auto choices = response.find("choices");
  if (choices == response.end() || !choices->is_array() || choices->empty()) {
    throw RequestError("completion response has no choices");
  }
  const Json& message = choices->at(0).value("message", Json::object());
  if (!message.contains("content") || !message.at("content").is_string()) {
    throw RequestError("completion response has no text content");
  }
  RawReply reply;
  reply.text = message.at("content").get<std::string>();
  if (const auto usage = response.find("usage"); usage != response.end() && usage->is_object()) {
    reply.usage.prompt_tokens = usage->value("prompt_tokens", 0L);
    reply.usage.completion_tokens = usage->value("completion_tokens", 0L);
  }
  return reply;
}

OpenAiEmbeddingTransport::OpenAiEmbeddingTransport(HttpEndpoint endpoint)
    : endpoint_(std::move(endpoint)) {
  split_url(endpoint_.base_url);
}

std::string OpenAiEmbeddingTransport::model_ref() const {
  return provider_of(endpoint_.base_url) + ":" + endpoint_.model;
}

std::vector<double> OpenAiEmbeddingTransport::embed(std::string_view text) {
  const Json response = post_json(endpoint_, "/embeddings",
                                  Json{{"model", endpoint_.model}, {"input", std::string(text)}});
  const auto data = response.find("data");
  if (data == response.end() || !data->is_array() || data->empty() ||
      !data->at(0).contains("embedding")) {
    throw RequestError("embedding response has no data[0].embedding");
  }
  return data->at(0).at("embedding").get<std::vector<double>>();
}

}  // namespace normalign
