#pragma once

#include "normalign/model_client.hpp"
#include "normalign/serialization.hpp"

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace normalign::testing {

inline std::filesystem::path source_dir() { return NORMALIGN_SOURCE_DIR; }
inline std::filesystem::path resources_dir() { return source_dir() / "data"; }
inline std::filesystem::path toy_dir() { return source_dir() / "toy"; }
inline std::filesystem::path golden_dir() { return source_dir() / "tests" / "golden"; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "normalign") {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// A scripted transport from inline JSON entries.
inline std::shared_ptr<ScriptedChatTransport> script(const std::vector<Json>& entries) {
  std::vector<ScriptedChatTransport::Entry> parsed;
  for (const auto& e : entries) parsed.push_back(ScriptedChatTransport::parse_entry(e));
  return std::make_shared<ScriptedChatTransport>(std::move(parsed));
}

inline ClientOptions fast_options(int max_attempts = 3) {
  ClientOptions options;
  options.retry.max_attempts = max_attempts;
  options.sleeper = [](std::chrono::milliseconds) {};
  return options;
}

inline std::shared_ptr<ChatClient> client(std::shared_ptr<ChatTransport> transport,
                                          ClientOptions options = fast_options()) {
  return std::make_shared<ChatClient>(std::move(transport), std::move(options));
}

}  // namespace normalign::testing
