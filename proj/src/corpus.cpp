#include "normalign/corpus.hpp"

#include <set>

namespace normalign {

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::DuplicateId:
      return "duplicate_id";
    case ViolationKind::DanglingReference:
      return "dangling_reference";
    case ViolationKind::EmptyField:
      return "empty_field";
  }
  return "duplicate_id";
}

std::vector<Violation> validate_corpus(const Corpus& corpus) {
  std::vector<Violation> out;

  std::set<std::string> episode_ids;
  for (const auto& episode : corpus.episodes) {
    if (!episode_ids.insert(episode.episode_id).second) {
      out.push_back({ViolationKind::DuplicateId, "episode " + episode.episode_id,
                     "episode id appears more than once"});
    }
  }

  std::set<std::string> dilemma_ids;
  for (const auto& dilemma : corpus.dilemmas) {
    const std::string subject = "dilemma " + dilemma.id;
    if (dilemma.id.empty()) out.push_back({ViolationKind::EmptyField, subject, "empty id"});
    if (!dilemma_ids.insert(dilemma.id).second) {
      out.push_back({ViolationKind::DuplicateId, subject, "dilemma id appears more than once"});
    }
    if (dilemma.body.empty()) out.push_back({ViolationKind::EmptyField, subject, "empty body"});
    if (dilemma.question.empty()) {
      out.push_back({ViolationKind::EmptyField, subject, "empty question"});
    }
    if (!corpus.episodes.empty() && !episode_ids.contains(dilemma.episode_id)) {
      out.push_back({ViolationKind::DanglingReference, subject,
                     "unknown episode_id '" + dilemma.episode_id + "'"});
    }
  }

  std::set<std::string> response_ids;
  for (const auto& response : corpus.responses) {
    const std::string subject = "response " + response.id();
    if (!dilemma_ids.contains(response.dilemma_id)) {
      out.push_back({ViolationKind::DanglingReference, subject,
                     "unknown dilemma_id '" + response.dilemma_id + "'"});
    }
    if (!response_ids.insert(response.id()).second) {
      out.push_back({ViolationKind::DuplicateId, subject,
                     "agent answered the same dilemma more than once"});
    }
  }
  return out;
}

}  // namespace normalign
