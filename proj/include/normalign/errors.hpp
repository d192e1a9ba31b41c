#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace normalign {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- model-client ---------------------------------------------------------

/// 401/403 from a provider. Never retried.
class AuthError : public Error {
 public:
  using Error::Error;
};

/// 429, 5xx, timeouts and dropped connections. Retried with backoff.
class TransientError : public Error {
 public:
  TransientError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

/// A non-retryable request failure that is neither auth nor transient.
class RequestError : public Error {
 public:
  using Error::Error;
};

class ExhaustedRetries : public Error {
 public:
  ExhaustedRetries(int attempts, const std::string& last_error)
      : Error("gave up after " + std::to_string(attempts) + " attempts: " + last_error),
        attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

class SchemaParseError : public Error {
 public:
  SchemaParseError(const std::string& what, std::vector<std::string> fields = {})
      : Error(what), fields_(std::move(fields)) {}
  /// Names of missing or mistyped fields, empty when the text was not JSON at all.
  const std::vector<std::string>& fields() const noexcept { return fields_; }

 private:
  std::vector<std::string> fields_;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---- metrics --------------------------------------------------------------

class PartialMatrix : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class MissingTopicRow : public Error {
 public:
  using Error::Error;
};

// ---- corpus pipeline ------------------------------------------------------

class SectionTooLong : public Error {
 public:
  SectionTooLong(std::size_t sentences, std::size_t ceiling)
      : Error("section has " + std::to_string(sentences) + " sentences, ceiling is " +
              std::to_string(ceiling)),
        sentences_(sentences),
        ceiling_(ceiling) {}
  std::size_t sentences() const noexcept { return sentences_; }
  std::size_t ceiling() const noexcept { return ceiling_; }

 private:
  std::size_t sentences_;
  std::size_t ceiling_;
};

// ---- annotation service ---------------------------------------------------

class UnknownTask : public Error {
 public:
  using Error::Error;
};

class SchemaViolation : public Error {
 public:
  using Error::Error;
};

// ---- stage plumbing -------------------------------------------------------

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A stage was run before the stage that produces its input.
class MissingStageInput : public Error {
 public:
  MissingStageInput(const std::string& stage, const std::string& path)
      : Error("missing input " + path + " (run `" + stage + "` first)"), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace normalign
