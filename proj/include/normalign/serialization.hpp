#pragma once

// JSONL record schemas and flat-file persistence. All writes go through a
// temp file plus rename so a failed stage never leaves a torn artifact.

#include "normalign/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace normalign {

using Json = nlohmann::ordered_json;

/// A judgment together with the dilemma it belongs to; one matches.jsonl line.
struct MatchRecord {
  std::string dilemma_id;
  MatchJudgment judgment;

  bool operator==(const MatchRecord&) const = default;
};

Json encode(const Turn& turn);
Json encode(const Transcript& transcript);
Json encode(const Dilemma& dilemma);
Json encode(const AgentResponse& response);
Json encode(const Solution& solution);
Json encode(const MatchRecord& record);
Json encode(const AlignmentScores& scores);
Json encode(const AnnotationRecord& record);

/// Undefined values become null; defined ones a number rounded to 6 places.
Json encode_metric(const MaybeRational& value);
/// Undefined values become null; defined ones "num/den".
Json encode_exact(const MaybeRational& value);

template <class T>
T decode(const Json& json);

template <>
Turn decode<Turn>(const Json& json);
template <>
Transcript decode<Transcript>(const Json& json);
template <>
Dilemma decode<Dilemma>(const Json& json);
template <>
AgentResponse decode<AgentResponse>(const Json& json);
template <>
Solution decode<Solution>(const Json& json);
template <>
MatchRecord decode<MatchRecord>(const Json& json);
template <>
AlignmentScores decode<AlignmentScores>(const Json& json);
template <>
AnnotationRecord decode<AnnotationRecord>(const Json& json);

/// Compact single-line dump; invalid UTF-8 is replaced rather than thrown on.
std::string dump_line(const Json& json);
std::string dump_pretty(const Json& json);

/// Current UTC time, e.g. 2026-01-31T12:00:00Z.
std::string utc_now_iso();

std::string read_text(const std::filesystem::path& path);
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

std::vector<Json> read_jsonl_values(const std::filesystem::path& path);
void write_jsonl_values(const std::filesystem::path& path, const std::vector<Json>& values);

template <class T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  std::vector<T> out;
  for (const auto& value : read_jsonl_values(path)) out.push_back(decode<T>(value));
  return out;
}

template <class T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& items) {
  std::vector<Json> values;
  values.reserve(items.size());
  for (const auto& item : items) values.push_back(encode(item));
  write_jsonl_values(path, values);
}

/// topics.csv: header "dilemma_id,<topic>,..." then one proportion row per dilemma.
TopicMatrix parse_topics_csv(std::string_view text);
TopicMatrix read_topics_csv(const std::filesystem::path& path);

std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);
std::string csv_line(const std::vector<std::string>& fields);

}  // namespace normalign
