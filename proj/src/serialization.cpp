#include "normalign/serialization.hpp"

#include "normalign/errors.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>
#include <system_error>

namespace normalign {

namespace {

template <class T>
T field(const Json& json, const char* name) {
  if (!json.contains(name)) {
    throw InvalidInput(std::string("record is missing field '") + name + "': " + dump_line(json));
  }
  try {
    return json.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("field '") + name + "' has the wrong type: " + e.what());
  }
}

template <class T>
T field_or(const Json& json, const char* name, T fallback) {
  if (!json.contains(name) || json.at(name).is_null()) return fallback;
  return field<T>(json, name);
}

}  // namespace

Json encode(const Turn& turn) { return Json{{"speaker", turn.speaker}, {"text", turn.text}}; }

Json encode(const Transcript& transcript) {
  Json turns = Json::array();
  for (const auto& turn : transcript.turns) turns.push_back(encode(turn));
  return Json{{"episode_id", transcript.episode_id},
              {"turns", std::move(turns)},
              {"summaries", transcript.summaries},
              {"aired_on", transcript.aired_on}};
}

Json encode(const Dilemma& dilemma) {
  return Json{{"id", dilemma.id},
              {"episode_id", dilemma.episode_id},
              {"summary", dilemma.summary},
              {"body", dilemma.body},
              {"question", dilemma.question}};
}

Json encode(const AgentResponse& response) {
  return Json{{"agent_id", response.agent_id},
              {"dilemma_id", response.dilemma_id},
              {"text", response.text},
              {"created_at", response.created_at}};
}

Json encode(const Solution& solution) {
  return Json{{"id", solution.id},
              {"dilemma_id", solution.dilemma_id},
              {"agent_id", solution.agent_id},
              {"text", solution.text},
              {"stance", std::string(to_string(solution.stance))},
              {"negation_flipped", solution.negation_flipped},
              {"source_response_id", solution.source_response_id}};
}

Json encode(const MatchRecord& record) {
  const auto& j = record.judgment;
  return Json{{"dilemma_id", record.dilemma_id},
              {"cand_solution_id", j.cand_solution_id},
              {"ref_solution_id", j.ref_solution_id},
              {"cmr",
               Json{{"order", j.verdicts.order_ok},
                    {"semantics", j.verdicts.semantics_ok},
                    {"conditions", j.verdicts.conditions_ok},
                    {"entities", j.verdicts.entities_ok}}},
              {"rationale", j.verdicts.rationale},
              {"matched", j.matched},
              {"stance_agree", j.stance_agree}};
}

Json encode_metric(const MaybeRational& value) {
  if (!value) return nullptr;
  return rounded_double(*value, 6);
}

Json encode_exact(const MaybeRational& value) {
  if (!value) return nullptr;
  return to_exact_string(*value);
}

Json encode(const AlignmentScores& scores) {
  return Json{{"n_agree", scores.n_agree()},
              {"n_conflict", scores.n_conflict()},
              {"n_cand", scores.n_cand()},
              {"n_ref", scores.n_ref()},
              {"saa", encode_metric(scores.saa())},
              {"eaa", encode_metric(scores.eaa())},
              {"avg", encode_metric(scores.avg())},
              {"saa_exact", encode_exact(scores.saa())},
              {"eaa_exact", encode_exact(scores.eaa())},
              {"avg_exact", encode_exact(scores.avg())},
              {"saa_exceeds_one", scores.saa_exceeds_one()}};
}

Json encode(const AnnotationRecord& record) {
  return Json{{"task_id", record.task_id},
              {"annotator_id", record.annotator_id},
              {"target_kind", std::string(to_string(record.target_kind))},
              {"target_ref", record.target_ref},
              {"label", record.label},
              {"issues", record.issues},
              {"created_at", record.created_at}};
}

template <>
Turn decode<Turn>(const Json& json) {
  return Turn{field<std::string>(json, "speaker"), field<std::string>(json, "text")};
}

template <>
Transcript decode<Transcript>(const Json& json) {
  Transcript transcript;
  transcript.episode_id = field<std::string>(json, "episode_id");
  if (json.contains("turns")) {
    for (const auto& turn : json.at("turns")) transcript.turns.push_back(decode<Turn>(turn));
  }
  transcript.summaries = field_or<std::vector<std::string>>(json, "summaries", {});
  transcript.aired_on = field_or<std::string>(json, "aired_on", "");
  return transcript;
}

template <>
Dilemma decode<Dilemma>(const Json& json) {
  return Dilemma{field<std::string>(json, "id"), field<std::string>(json, "episode_id"),
                 field_or<std::string>(json, "summary", ""), field<std::string>(json, "body"),
                 field<std::string>(json, "question")};
}

template <>
AgentResponse decode<AgentResponse>(const Json& json) {
  return AgentResponse{field<std::string>(json, "agent_id"), field<std::string>(json, "dilemma_id"),
                       field_or<std::string>(json, "text", ""),
                       field_or<std::string>(json, "created_at", "")};
}

template <>
Solution decode<Solution>(const Json& json) {
  Solution s;
  s.id = field<std::string>(json, "id");
  s.dilemma_id = field<std::string>(json, "dilemma_id");
  s.agent_id = field<std::string>(json, "agent_id");
  s.text = field<std::string>(json, "text");
  s.stance = stance_from_string(field<std::string>(json, "stance"));
  s.negation_flipped = field_or<bool>(json, "negation_flipped", false);
  s.source_response_id = field_or<std::string>(json, "source_response_id", "");
  return s;
}

template <>
MatchRecord decode<MatchRecord>(const Json& json) {
  MatchRecord record;
  record.dilemma_id = field<std::string>(json, "dilemma_id");
  auto& j = record.judgment;
  j.cand_solution_id = field<std::string>(json, "cand_solution_id");
  j.ref_solution_id = field<std::string>(json, "ref_solution_id");
  const Json cmr = field<Json>(json, "cmr");
  j.verdicts.order_ok = field<bool>(cmr, "order");
  j.verdicts.semantics_ok = field<bool>(cmr, "semantics");
  j.verdicts.conditions_ok = field<bool>(cmr, "conditions");
  j.verdicts.entities_ok = field<bool>(cmr, "entities");
  j.verdicts.rationale = field_or<std::string>(json, "rationale", "");
  j.matched = field<bool>(json, "matched");
  j.stance_agree = field<bool>(json, "stance_agree");
  if (j.matched != j.verdicts.all_ok()) {
    throw InvalidInput("match record for " + j.cand_solution_id + " x " + j.ref_solution_id +
                       " has matched inconsistent with its CMR verdicts");
  }
  return record;
}

template <>
AlignmentScores decode<AlignmentScores>(const Json& json) {
  return AlignmentScores::from_counts(
      field<std::size_t>(json, "n_agree"), field<std::size_t>(json, "n_conflict"),
      field<std::size_t>(json, "n_cand"), field<std::size_t>(json, "n_ref"));
}

template <>
AnnotationRecord decode<AnnotationRecord>(const Json& json) {
  AnnotationRecord r;
  r.task_id = field<std::string>(json, "task_id");
  r.annotator_id = field<std::string>(json, "annotator_id");
  r.target_kind = target_kind_from_string(field<std::string>(json, "target_kind"));
  r.target_ref = field_or<std::string>(json, "target_ref", "");
  r.label = field<std::string>(json, "label");
  r.issues = field_or<std::vector<std::string>>(json, "issues", {});
  r.created_at = field_or<std::string>(json, "created_at", "");
  return r;
}

std::string dump_line(const Json& json) {
  return json.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string dump_pretty(const Json& json) {
  return json.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string utc_now_iso() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::vector<Json> read_jsonl_values(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl_values(const std::filesystem::path& path, const std::vector<Json>& values) {
  std::string content;
  for (const auto& value : values) {
    content += dump_line(value);
    content += '\n';
  }
  write_text_atomic(path, content);
}

// RFC 4180: quoted fields may hold commas and doubled quotes.
std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c != '"') {
        out.back() += c;
      } else if (i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else {
        quoted = false;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  if (quoted) throw InvalidInput("unterminated quote in CSV line: " + std::string(line));
  return out;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out += ',';
    out += csv_escape(fields[i]);
  }
  out += '\n';
  return out;
}

TopicMatrix parse_topics_csv(std::string_view text) {
  TopicMatrix topics;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (header) {
      if (cells.empty() || cells.front() != "dilemma_id") {
        throw InvalidInput("topics.csv header must start with dilemma_id");
      }
      topics.topic_names.assign(cells.begin() + 1, cells.end());
      header = false;
      continue;
    }
    if (cells.size() != topics.topic_names.size() + 1) {
      throw InvalidInput("topics.csv line " + std::to_string(line_no) + " has " +
                         std::to_string(cells.size()) + " cells, expected " +
                         std::to_string(topics.topic_names.size() + 1));
    }
    std::vector<Rational> row;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      Rational weight = parse_decimal(cells[i]);
      if (weight < 0) {
        throw InvalidInput("negative topic weight on topics.csv line " + std::to_string(line_no));
      }
      row.push_back(std::move(weight));
    }
    if (!topics.proportions.emplace(cells.front(), std::move(row)).second) {
      throw InvalidInput("duplicate dilemma " + cells.front() + " in topics.csv");
    }
  }
  if (header) throw InvalidInput("topics.csv is empty");
  return topics;
}

TopicMatrix read_topics_csv(const std::filesystem::path& path) {
  return parse_topics_csv(read_text(path));
}

}  // namespace normalign
