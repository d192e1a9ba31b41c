#pragma once

// Transcript -> dilemma sections -> full-form dilemmas.
//
// Each episode is split into sentences and overlapping chunks. Every
// one-sentence summary is located at the chunk that introduces it (embedding
// similarity, then a chat verifier), the transcript is cut at those chunks,
// and each section is rewritten by a chat model into a first-person dilemma.

#include "normalign/model_client.hpp"
#include "normalign/prompt_template.hpp"
#include "normalign/types.hpp"

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace normalign {

/// Splits on '.', '!' or '?' (plus closing quotes) followed by whitespace and
/// an upper-case letter, quote or dash. A period ending a listed abbreviation
/// (lower-cased, with its period, e.g. "ca.") never splits.
std::vector<std::string> segment_sentences(std::string_view text,
                                           const std::set<std::string>& abbreviations = {});

/// All sentences of an episode, turn by turn. Sentences never span turns.
std::vector<std::string> transcript_sentences(const Transcript& transcript,
                                              const std::set<std::string>& abbreviations = {});

/// Half-open range of sentence indices.
struct SentenceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const SentenceSpan&) const = default;
};

struct Chunk {
  std::size_t index = 0;
  SentenceSpan span;
  std::string text;

  bool operator==(const Chunk&) const = default;
};

/// Windows [i*stride, i*stride + size) clipped to the input, while the start
/// is inside it. Throws std::invalid_argument for size or stride 0.
std::vector<Chunk> chunk(const std::vector<std::string>& sentences, std::size_t size = 3,
                         std::size_t stride = 1);

/// First sentence at or after ceil(0.75 * N) containing an award keyword, as
/// the span from there to the end. Keywords match case-insensitively on word
/// boundaries.
std::optional<SentenceSpan> detect_award_section(const std::vector<std::string>& sentences,
                                                 const std::vector<std::string>& keywords);

enum class MappingPath { Top1Verified, FallbackEarliest, Unresolved };

std::string_view to_string(MappingPath path);

struct Similarity {
  std::size_t chunk_index = 0;
  double score = 0;
};

struct LocatedSummary {
  std::string summary;
  std::optional<std::size_t> chunk_index;
  MappingPath path = MappingPath::Unresolved;
  /// Best-scoring eligible chunks, highest first.
  std::vector<Similarity> top_similarities;
  std::size_t verifier_calls = 0;
};

/// Locates summaries in chunk lists: cosine top-1 over chunks outside the
/// award span, verified by a chat model; on rejection, the earliest eligible
/// chunk the verifier accepts.
class SectionMapper {
 public:
  SectionMapper(std::shared_ptr<const EmbeddingClient> embedder,
                std::shared_ptr<const ChatClient> verifier, PromptTemplate verification_prompt,
                double temperature = 0.0, std::size_t audit_top_k = 3);

  static const SchemaHint& verification_schema();

  LocatedSummary map(const std::string& summary, const std::vector<Chunk>& chunks,
                     const std::optional<SentenceSpan>& excluded) const;
  /// Same, reusing chunk embeddings across the summaries of one episode.
  LocatedSummary map(const std::string& summary, const std::vector<Chunk>& chunks,
                     const std::vector<EmbeddingVector>& chunk_embeddings,
                     const std::optional<SentenceSpan>& excluded) const;

  std::vector<EmbeddingVector> embed_chunks(const std::vector<Chunk>& chunks) const;

  bool verify(const std::string& summary, const Chunk& chunk) const;

  const PromptTemplate& prompt() const { return prompt_; }

 private:
  std::shared_ptr<const EmbeddingClient> embedder_;
  std::shared_ptr<const ChatClient> verifier_;
  PromptTemplate prompt_;
  double temperature_;
  std::size_t audit_top_k_;
};

struct Section {
  std::size_t summary_index = 0;
  std::string summary;
  SentenceSpan span;

  bool operator==(const Section&) const = default;
};

struct LocatedStart {
  std::size_t summary_index = 0;
  std::string summary;
  std::size_t chunk_index = 0;
  /// First sentence of the located chunk.
  std::size_t sentence = 0;
};

struct SectionSplit {
  std::vector<Section> sections;  // ordered by start, pairwise disjoint
  /// Summaries dropped because an earlier one already claimed their chunk.
  std::vector<LocatedStart> order_violations;
};

/// Cuts [0, N) at the located starts. Each section runs to the next start,
/// or to the award span or the end of the transcript.
SectionSplit split_into_sections(std::vector<LocatedStart> located, std::size_t n_sentences,
                                 const std::optional<SentenceSpan>& award);

struct DilemmaText {
  std::string body;
  std::string question;
};

/// Nearest-rank 95th percentile; 0 for an empty list.
std::size_t default_section_ceiling(std::vector<std::size_t> section_sizes);

/// Rewrites a section into a first-person dilemma. Throws SectionTooLong,
/// before any model call, when the section has more than `ceiling` sentences.
DilemmaText extract_full_dilemma(const std::string& section_text, std::size_t section_sentences,
                                 const std::string& summary, std::size_t ceiling,
                                 const ChatClient& client, const PromptTemplate& prompt,
                                 double temperature = 0.0);

const SchemaHint& dilemma_schema();

struct IngestOptions {
  std::size_t chunk_size = 3;
  std::size_t stride = 1;
  /// Sentence ceiling per section; the corpus 95th percentile when unset.
  std::optional<std::size_t> ceiling;
  std::size_t parallelism = 1;
  std::set<std::string> abbreviations;
  std::vector<std::string> award_keywords;
  double dilemma_temperature = 0.0;
  /// Agent id under which section texts are stored as reference responses.
  std::string panel_agent = "panel";
  std::string created_at;
};

struct IngestResult {
  std::vector<Dilemma> dilemmas;
  /// The panel's discussion of each dilemma, as reference responses.
  std::vector<AgentResponse> panel_responses;
  /// One record per summary: mapping decision and what became of it.
  std::vector<Json> audit;
  std::size_t ceiling = 0;
  std::size_t episodes_skipped = 0;
};

/// Runs the whole corpus pipeline. Episodes without summaries are dropped.
/// Output order follows the input, whatever the parallelism.
IngestResult ingest_transcripts(const std::vector<Transcript>& transcripts,
                                const SectionMapper& mapper, const ChatClient& dilemma_client,
                                const PromptTemplate& dilemma_prompt,
                                const IngestOptions& options);

/// "<episode>-d<k>", k counting summaries from 1.
std::string dilemma_id(const std::string& episode_id, std::size_t summary_index);

}  // namespace normalign
