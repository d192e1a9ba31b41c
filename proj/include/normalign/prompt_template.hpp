#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace normalign {

/// A plain-text prompt with `{name}` placeholders. Braces that do not enclose
/// a bare identifier (JSON examples, for instance) are left alone.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  PromptTemplate(std::string name, std::string text);

  static PromptTemplate load(const std::filesystem::path& path);

  /// Substitutes every placeholder; throws TemplateError when one has no value.
  std::string render(const std::map<std::string, std::string>& values) const;

  std::vector<std::string> placeholders() const;

  const std::string& name() const { return name_; }
  const std::string& text() const { return text_; }
  /// SHA-256 of the template text; recorded in reports and cache keys.
  const std::string& hash() const { return hash_; }

 private:
  std::string name_;
  std::string text_;
  std::string hash_;
};

/// The bundled templates, loaded from `<resources>/prompts/<name>.prompt`.
class PromptLibrary {
 public:
  explicit PromptLibrary(std::filesystem::path directory);

  const PromptTemplate& get(const std::string& name) const;
  std::map<std::string, std::string> hashes() const;

 private:
  std::filesystem::path directory_;
  std::map<std::string, PromptTemplate> templates_;
};

}  // namespace normalign
