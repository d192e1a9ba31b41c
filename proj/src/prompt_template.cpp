#include "normalign/prompt_template.hpp"

#include "normalign/errors.hpp"
#include "normalign/hashing.hpp"
#include "normalign/serialization.hpp"

#include <cctype>
#include <optional>

namespace normalign {

namespace {

struct Placeholder {
  std::size_t begin;
  std::size_t end;
  std::string name;
};

std::optional<Placeholder> next_placeholder(const std::string& text, std::size_t from) {
  for (auto open = text.find('{', from); open != std::string::npos; open = text.find('{', open + 1)) {
    std::size_t i = open + 1;
    while (i < text.size() &&
           (std::islower(static_cast<unsigned char>(text[i])) || text[i] == '_' ||
            (i > open + 1 && std::isdigit(static_cast<unsigned char>(text[i]))))) {
      ++i;
    }
    if (i > open + 1 && i < text.size() && text[i] == '}') {
      return Placeholder{open, i + 1, text.substr(open + 1, i - open - 1)};
    }
  }
  return std::nullopt;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string name, std::string text)
    : name_(std::move(name)), text_(std::move(text)), hash_(sha256_hex(text_)) {}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  return PromptTemplate(path.stem().string(), read_text(path));
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  std::string out;
  std::size_t pos = 0;
  while (auto placeholder = next_placeholder(text_, pos)) {
    const auto it = values.find(placeholder->name);
    if (it == values.end()) {
      throw TemplateError("template '" + name_ + "' has no value for {" + placeholder->name + "}");
    }
    out.append(text_, pos, placeholder->begin - pos);
    out += it->second;
    pos = placeholder->end;
  }
  out.append(text_, pos);
  return out;
}

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (auto placeholder = next_placeholder(text_, pos)) {
    out.push_back(placeholder->name);
    pos = placeholder->end;
  }
  return out;
}

PromptLibrary::PromptLibrary(std::filesystem::path directory) : directory_(std::move(directory)) {
  if (!std::filesystem::is_directory(directory_)) {
    throw ConfigError("prompt directory not found: " + directory_.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(directory_)) {
    if (entry.path().extension() == ".prompt") {
      auto tmpl = PromptTemplate::load(entry.path());
      templates_.emplace(tmpl.name(), std::move(tmpl));
    }
  }
}

const PromptTemplate& PromptLibrary::get(const std::string& name) const {
  const auto it = templates_.find(name);
  if (it == templates_.end()) {
    throw ConfigError("no template " + name + ".prompt in " + directory_.string());
  }
  return it->second;
}

std::map<std::string, std::string> PromptLibrary::hashes() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, tmpl] : templates_) out.emplace(name, tmpl.hash());
  return out;
}

}  // namespace normalign
