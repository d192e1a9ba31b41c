#include "normalign/extraction.hpp"

#include "normalign/errors.hpp"
#include "normalign/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>
#include <tuple>

namespace normalign {

namespace {

constexpr std::string_view kWildcard = "{w}";

std::string piece_key(std::string_view piece) {
  std::string key = text::to_lower(piece);
  while (!key.empty() && (key.back() == ',' || key.back() == ':' || key.back() == ';')) {
    key.pop_back();
  }
  return key;
}

std::string dilemma_text(const Dilemma& dilemma) {
  if (dilemma.question.empty()) return dilemma.body;
  if (dilemma.body.empty()) return dilemma.question;
  return dilemma.body + "\n\n" + dilemma.question;
}

std::vector<std::string> string_items(const Json& array, std::string_view field) {
  std::vector<std::string> out;
  for (const auto& item : array) {
    if (!item.is_string()) {
      spdlog::warn("ignoring non-string entry in '{}'", field);
      continue;
    }
    auto value = text::collapse_whitespace(text::trim(item.get<std::string>()));
    if (!value.empty()) out.push_back(std::move(value));
  }
  return out;
}

bool valid_index(const Json& value, std::size_t size) {
  return value.is_number_integer() && value.get<long long>() >= 0 &&
         static_cast<std::size_t>(value.get<long long>()) < size;
}

// Negation normalization followed by exact dedup.
std::vector<Solution> normalize_all(const std::vector<Solution>& solutions,
                                    const NegationLexicon& lexicon) {
  std::vector<Solution> out;
  out.reserve(solutions.size());
  for (const auto& s : solutions) {
    auto copy = s;
    const auto n = normalize_negation(s.text, s.stance, lexicon);
    copy.text = n.text;
    copy.stance = n.stance;
    copy.negation_flipped = s.negation_flipped != n.flipped;
    out.push_back(std::move(copy));
  }
  return dedup_exact(out);
}

}  // namespace

NegationLexicon NegationLexicon::from_lines(const std::vector<std::string>& lines) {
  NegationLexicon lexicon;
  for (const auto& raw : lines) {
    auto line = text::trim(raw);
    if (line.empty()) continue;
    Pattern pattern;
    if (line.front() == '!') {
      pattern.exclusion = true;
      line = text::trim(line.substr(1));
    }
    for (const auto& piece : text::whitespace_pieces(line)) {
      pattern.words.push_back(piece.text == kWildcard ? piece.text : piece_key(piece.text));
    }
    if (pattern.words.empty()) continue;
    if (std::all_of(pattern.words.begin(), pattern.words.end(),
                    [](const auto& w) { return w == kWildcard; })) {
      throw ConfigError("negation pattern '" + line + "' has no literal word");
    }
    lexicon.patterns_.push_back(std::move(pattern));
  }
  // Longest pattern first so "do not" wins over "not"; stable for equal lengths.
  std::stable_sort(lexicon.patterns_.begin(), lexicon.patterns_.end(),
                   [](const Pattern& a, const Pattern& b) { return a.words.size() > b.words.size(); });
  return lexicon;
}

NegationLexicon NegationLexicon::load(const std::filesystem::path& path) {
  return from_lines(text::read_lines(path));
}

NegationLexicon NegationLexicon::load_all(const std::vector<std::filesystem::path>& paths) {
  std::vector<std::string> lines;
  for (const auto& path : paths) {
    auto more = text::read_lines(path);
    lines.insert(lines.end(), more.begin(), more.end());
  }
  return from_lines(lines);
}

std::optional<NegationLexicon::Strip> NegationLexicon::strip(std::string_view input) const {
  const auto pieces = text::whitespace_pieces(input);
  auto prefix_matches = [&](const Pattern& p) {
    if (pieces.size() < p.words.size()) return false;
    for (std::size_t i = 0; i < p.words.size(); ++i) {
      if (p.words[i] != kWildcard && p.words[i] != piece_key(pieces[i].text)) return false;
    }
    return true;
  };

  for (const auto& p : patterns_) {
    if (p.exclusion && prefix_matches(p)) return std::nullopt;
  }
  for (const auto& p : patterns_) {
    if (p.exclusion || pieces.size() <= p.words.size() || !prefix_matches(p)) continue;
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < p.words.size(); ++i) {
      if (p.words[i] == kWildcard) kept.push_back(pieces[i].text);
    }
    kept.push_back(std::string(input.substr(pieces[p.words.size()].begin)));
    return Strip{text::join(kept, " ")};
  }
  return std::nullopt;
}

NormalizedText normalize_negation(std::string_view input, Stance stance,
                                  const NegationLexicon& lexicon) {
  NormalizedText out{std::string(input), stance, false};
  const bool upper = text::starts_upper(input);
  // Every strip removes at least one word, so this terminates.
  while (auto stripped = lexicon.strip(out.text)) {
    out.text = std::move(stripped->remainder);
    out.stance = flip(out.stance);
    out.flipped = !out.flipped;
  }
  if (out.text != input && upper) out.text = text::capitalize_first(out.text);
  return out;
}

std::string solution_id(const AgentResponse& response, Stance stance, std::size_t index) {
  return response.id() + "/" + (stance == Stance::Advised ? "a" : "n") + std::to_string(index);
}

std::vector<Solution> dedup_exact(const std::vector<Solution>& solutions) {
  std::set<std::tuple<std::string, std::string, std::string, Stance>> seen;
  std::vector<Solution> out;
  for (const auto& s : solutions) {
    if (seen.emplace(s.dilemma_id, s.agent_id, s.text, s.stance).second) out.push_back(s);
  }
  return out;
}

SolutionExtractor::SolutionExtractor(std::shared_ptr<const ChatClient> extract_client,
                                     std::shared_ptr<const ChatClient> postprocess_client,
                                     PromptTemplate extraction_prompt,
                                     PromptTemplate postprocess_prompt, NegationLexicon lexicon,
                                     ExtractorOptions options)
    : extract_client_(std::move(extract_client)),
      postprocess_client_(std::move(postprocess_client)),
      extraction_prompt_(std::move(extraction_prompt)),
      postprocess_prompt_(std::move(postprocess_prompt)),
      lexicon_(std::move(lexicon)),
      options_(options) {
  if (!extract_client_) throw std::invalid_argument("extraction needs a chat client");
  if (!postprocess_client_) postprocess_client_ = extract_client_;
}

const SchemaHint& SolutionExtractor::extraction_schema() {
  static const SchemaHint schema{
      "solutions",
      {{"advised", FieldType::Array, true}, {"not_advised", FieldType::Array, true}}};
  return schema;
}

const SchemaHint& SolutionExtractor::postprocess_schema() {
  static const SchemaHint schema{"cleanup",
                                 {{"drop", FieldType::Array, false},
                                  {"merge", FieldType::Array, false},
                                  {"restance", FieldType::Array, false}}};
  return schema;
}

ExtractedSolutions SolutionExtractor::extract(const Dilemma& dilemma,
                                              const AgentResponse& response) const {
  if (response.dilemma_id != dilemma.id) {
    throw InvalidInput("response " + response.id() + " does not answer dilemma " + dilemma.id);
  }
  ExtractedSolutions out;
  if (text::trim(response.text).empty()) return out;

  ChatRequest request;
  request.user_prompt =
      extraction_prompt_.render({{"dilemma", dilemma_text(dilemma)}, {"response", response.text}});
  request.schema_hint = extraction_schema();
  request.temperature = options_.extract_temperature;
  const auto completion = extract_client_->complete(request);
  const Json& parsed = *completion.parsed;

  auto build = [&](const Json& items, Stance stance, std::string_view field) {
    std::vector<Solution> built;
    std::size_t index = 0;
    for (auto& raw : string_items(items, field)) {
      const auto n = normalize_negation(raw, stance, lexicon_);
      Solution s;
      s.id = solution_id(response, stance, index++);
      s.dilemma_id = dilemma.id;
      s.agent_id = response.agent_id;
      s.text = n.text;
      s.stance = n.stance;
      s.negation_flipped = n.flipped;
      s.source_response_id = response.id();
      built.push_back(std::move(s));
    }
    return built;
  };
  // Split by stance after normalization, so a flipped item lands on its new side.
  auto all = build(parsed.at("advised"), Stance::Advised, "advised");
  auto negative = build(parsed.at("not_advised"), Stance::NotAdvised, "not_advised");
  all.insert(all.end(), negative.begin(), negative.end());
  for (auto& s : all) {
    (s.stance == Stance::Advised ? out.advised : out.not_advised).push_back(std::move(s));
  }
  return out;
}

std::vector<Solution> SolutionExtractor::postprocess(const std::vector<Solution>& solutions,
                                                     const Dilemma& dilemma) const {
  for (const auto& s : solutions) {
    if (s.dilemma_id != dilemma.id) {
      throw InvalidInput("solution " + s.id + " belongs to dilemma " + s.dilemma_id + ", not " +
                         dilemma.id);
    }
  }
  auto items = normalize_all(solutions, lexicon_);
  if (items.empty()) return items;

  std::string listing;
  for (std::size_t i = 0; i < items.size(); ++i) {
    listing += std::to_string(i) + ". [" + std::string(to_string(items[i].stance)) + "] " +
               items[i].text + "\n";
  }
  ChatRequest request;
  request.user_prompt =
      postprocess_prompt_.render({{"dilemma", dilemma_text(dilemma)}, {"solutions", listing}});
  request.schema_hint = postprocess_schema();
  request.temperature = options_.postprocess_temperature;
  const Json verdict = *postprocess_client_->complete(request).parsed;

  std::vector<bool> keep(items.size(), true);
  const auto n = items.size();
  if (const auto it = verdict.find("drop"); it != verdict.end()) {
    for (const auto& idx : *it) {
      if (valid_index(idx, n)) {
        keep[idx.get<std::size_t>()] = false;
      } else {
        spdlog::warn("postprocess {}: ignoring drop index {}", dilemma.id, idx.dump());
      }
    }
  }
  if (const auto it = verdict.find("merge"); it != verdict.end()) {
    for (const auto& m : *it) {
      if (!m.is_object() || !valid_index(m.value("index", Json()), n) ||
          !valid_index(m.value("into", Json()), n)) {
        spdlog::warn("postprocess {}: ignoring malformed merge {}", dilemma.id, m.dump());
        continue;
      }
      const auto a = m.at("index").get<std::size_t>();
      const auto b = m.at("into").get<std::size_t>();
      // The earlier occurrence survives whichever way round the judge put it.
      if (a != b) keep[std::max(a, b)] = false;
    }
  }
  if (const auto it = verdict.find("restance"); it != verdict.end()) {
    for (const auto& r : *it) {
      if (!r.is_object() || !valid_index(r.value("index", Json()), n) ||
          !r.value("stance", Json()).is_string()) {
        spdlog::warn("postprocess {}: ignoring malformed restance {}", dilemma.id, r.dump());
        continue;
      }
      try {
        items[r.at("index").get<std::size_t>()].stance =
            stance_from_string(r.at("stance").get<std::string>());
      } catch (const std::exception& e) {
        spdlog::warn("postprocess {}: {}", dilemma.id, e.what());
      }
    }
  }

  std::vector<Solution> survivors;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) survivors.push_back(std::move(items[i]));
  }
  return normalize_all(survivors, lexicon_);
}

ExtractedSolutions extract_solutions(const Dilemma& dilemma, const AgentResponse& response,
                                     const SolutionExtractor& extractor) {
  return extractor.extract(dilemma, response);
}

std::vector<Solution> postprocess(const std::vector<Solution>& solutions, const Dilemma& dilemma,
                                  const SolutionExtractor& extractor) {
  return extractor.postprocess(solutions, dilemma);
}

}  // namespace normalign
