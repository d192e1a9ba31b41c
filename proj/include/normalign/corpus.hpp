#pragma once

#include "normalign/types.hpp"

#include <string>
#include <vector>

namespace normalign {

struct Corpus {
  std::vector<Transcript> episodes;
  std::vector<Dilemma> dilemmas;
  std::vector<AgentResponse> responses;
};

enum class ViolationKind { DuplicateId, DanglingReference, EmptyField };

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string subject;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

/// Structural checks over a loaded corpus. Violations are data: an empty
/// result means the corpus is valid. Dilemma -> episode references are only
/// checked when episodes are supplied.
std::vector<Violation> validate_corpus(const Corpus& corpus);

}  // namespace normalign
