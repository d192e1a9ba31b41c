#pragma once

// Solution extraction: (dilemma, response) -> advised / not-advised
// Solutions in positive action form, followed by a judge-driven cleanup pass.

#include "normalign/model_client.hpp"
#include "normalign/prompt_template.hpp"
#include "normalign/types.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace normalign {

/// Leading negation constructions, one per line:
///
///   do not          a literal word sequence (case-insensitive)
///   {w} ikke        {w} matches any single word and is kept in the output
///   !hvis ikke      an exclusion: text starting like this is never rewritten
///
/// A pattern only matches when at least one word follows it.
class NegationLexicon {
 public:
  NegationLexicon() = default;

  static NegationLexicon from_lines(const std::vector<std::string>& lines);
  static NegationLexicon load(const std::filesystem::path& path);
  /// Union of several lexicon files.
  static NegationLexicon load_all(const std::vector<std::filesystem::path>& paths);

  struct Strip {
    /// Text with the negation construction removed.
    std::string remainder;
  };

  /// Strips the first matching construction, if any.
  std::optional<Strip> strip(std::string_view text) const;
  bool matches(std::string_view text) const { return strip(text).has_value(); }

  std::size_t size() const { return patterns_.size(); }

 private:
  struct Pattern {
    std::vector<std::string> words;  // lower-cased; "{w}" is the wildcard
    bool exclusion = false;
  };

  std::vector<Pattern> patterns_;
};

struct NormalizedText {
  std::string text;
  Stance stance;
  bool flipped;

  bool operator==(const NormalizedText&) const = default;
};

/// Rewrites a leading negation into positive form and flips the stance:
/// ("Do not buy this apple", Advised) -> ("Buy this apple", NotAdvised, true).
/// Stacked negations are stripped one by one, flipping each time, so the
/// result never starts with a lexicon construction and a second application
/// is a no-op.
NormalizedText normalize_negation(std::string_view text, Stance stance,
                                  const NegationLexicon& lexicon);

struct ExtractedSolutions {
  std::vector<Solution> advised;
  std::vector<Solution> not_advised;
};

struct ExtractorOptions {
  double extract_temperature = 0.0;
  double postprocess_temperature = 0.0;
};

/// Drives the extraction and postprocess prompts. The two stages may use
/// different backends; pass the same client twice to share one.
class SolutionExtractor {
 public:
  SolutionExtractor(std::shared_ptr<const ChatClient> extract_client,
                    std::shared_ptr<const ChatClient> postprocess_client,
                    PromptTemplate extraction_prompt, PromptTemplate postprocess_prompt,
                    NegationLexicon lexicon, ExtractorOptions options = {});

  static const SchemaHint& extraction_schema();
  static const SchemaHint& postprocess_schema();

  /// Empty response text yields two empty lists without a model call.
  ExtractedSolutions extract(const Dilemma& dilemma, const AgentResponse& response) const;

  /// Negation normalization, exact (text, stance) dedup, then one judge call
  /// that may drop items, merge near-duplicates into their first occurrence
  /// and correct stances. Survivors keep their input order and ids.
  std::vector<Solution> postprocess(const std::vector<Solution>& solutions,
                                    const Dilemma& dilemma) const;

  const NegationLexicon& lexicon() const { return lexicon_; }
  const PromptTemplate& extraction_prompt() const { return extraction_prompt_; }
  const PromptTemplate& postprocess_prompt() const { return postprocess_prompt_; }

 private:
  std::shared_ptr<const ChatClient> extract_client_;
  std::shared_ptr<const ChatClient> postprocess_client_;
  PromptTemplate extraction_prompt_;
  PromptTemplate postprocess_prompt_;
  NegationLexicon lexicon_;
  ExtractorOptions options_;
};

/// Free-function form of SolutionExtractor::extract.
ExtractedSolutions extract_solutions(const Dilemma& dilemma, const AgentResponse& response,
                                     const SolutionExtractor& extractor);

/// Free-function form of SolutionExtractor::postprocess.
std::vector<Solution> postprocess(const std::vector<Solution>& solutions, const Dilemma& dilemma,
                                  const SolutionExtractor& extractor);

/// "<agent>/<dilemma>/<a|n><index>"
std::string solution_id(const AgentResponse& response, Stance stance, std::size_t index);

/// Exact (dilemma, agent, text, stance) dedup keeping first occurrences.
std::vector<Solution> dedup_exact(const std::vector<Solution>& solutions);

}  // namespace normalign
