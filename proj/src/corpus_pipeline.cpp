#include "normalign/corpus_pipeline.hpp"

#include "normalign/errors.hpp"
#include "normalign/parallel.hpp"
#include "normalign/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace normalign {

namespace {

bool is_terminal(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }

bool is_closing(char32_t c) {
  return c == U'"' || c == U'\'' || c == U')' || c == U'”' || c == U'’' ||
         c == U'»';
}

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v' ||
         c == U' ';
}

bool opens_sentence(char32_t c) {
  if (c == U'"' || c == U'\'' || c == U'“' || c == U'„' || c == U'«' ||
      c == U'-' || c == U'–' || c == U'—') {
    return true;
  }
  return text::starts_upper(text::encode_utf8(std::u32string(1, c)));
}

std::string join_span(const std::vector<std::string>& sentences, SentenceSpan span) {
  std::vector<std::string> parts(sentences.begin() + static_cast<std::ptrdiff_t>(span.begin),
                                 sentences.begin() + static_cast<std::ptrdiff_t>(span.end));
  return text::join(parts, " ");
}

bool contains_keyword(const std::u32string& haystack, const std::u32string& needle) {
  if (needle.empty()) return false;
  for (auto pos = haystack.find(needle); pos != std::u32string::npos;
       pos = haystack.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !text::is_word_char(haystack[pos - 1]);
    const auto after = pos + needle.size();
    const bool right_ok = after >= haystack.size() || !text::is_word_char(haystack[after]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

bool intersects(const SentenceSpan& span, const std::optional<SentenceSpan>& excluded) {
  return excluded && span.begin < excluded->end && excluded->begin < span.end;
}

double round6(double x) { return std::round(x * 1e6) / 1e6; }

}  // namespace

std::vector<std::string> segment_sentences(std::string_view input,
                                           const std::set<std::string>& abbreviations) {
  const auto cps = text::decode_utf8(input);
  std::vector<std::string> out;
  auto emit = [&](std::size_t begin, std::size_t end) {
    auto sentence = text::trim(text::encode_utf8(std::u32string_view(cps).substr(begin, end - begin)));
    if (!sentence.empty()) out.push_back(std::move(sentence));
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (!is_terminal(cps[i])) continue;
    std::size_t j = i + 1;
    while (j < cps.size() && (is_terminal(cps[j]) || is_closing(cps[j]))) ++j;
    std::size_t k = j;
    while (k < cps.size() && is_space(cps[k])) ++k;
    if (k == j || k == cps.size() || !opens_sentence(cps[k])) continue;
    if (cps[i] == U'.' && j == i + 1) {
      std::size_t w = i;
      while (w > start && !is_space(cps[w - 1])) --w;
      const auto word = text::to_lower(text::encode_utf8(std::u32string_view(cps).substr(w, i + 1 - w)));
      if (abbreviations.contains(word)) continue;
    }
    emit(start, j);
    start = k;
    i = k - 1;
  }
  emit(start, cps.size());
  return out;
}

std::vector<std::string> transcript_sentences(const Transcript& transcript,
                                              const std::set<std::string>& abbreviations) {
  std::vector<std::string> out;
  for (const auto& turn : transcript.turns) {
    auto more = segment_sentences(turn.text, abbreviations);
    out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  return out;
}

std::vector<Chunk> chunk(const std::vector<std::string>& sentences, std::size_t size,
                         std::size_t stride) {
  if (size == 0 || stride == 0) throw std::invalid_argument("chunk size and stride must be >= 1");
  std::vector<Chunk> out;
  for (std::size_t begin = 0; begin < sentences.size(); begin += stride) {
    Chunk c;
    c.index = out.size();
    c.span = {begin, std::min(begin + size, sentences.size())};
    c.text = join_span(sentences, c.span);
    out.push_back(std::move(c));
  }
  return out;
}

std::optional<SentenceSpan> detect_award_section(const std::vector<std::string>& sentences,
                                                 const std::vector<std::string>& keywords) {
  const std::size_t n = sentences.size();
  const std::size_t first = (3 * n + 3) / 4;  // ceil(0.75 n)
  std::vector<std::u32string> needles;
  for (const auto& k : keywords) needles.push_back(text::decode_utf8(text::to_lower(text::trim(k))));
  for (std::size_t i = first; i < n; ++i) {
    const auto hay = text::decode_utf8(text::to_lower(sentences[i]));
    for (const auto& needle : needles) {
      if (contains_keyword(hay, needle)) return SentenceSpan{i, n};
    }
  }
  return std::nullopt;
}

std::string_view to_string(MappingPath path) {
  switch (path) {
    case MappingPath::Top1Verified:
      return "top1-verified";
    case MappingPath::FallbackEarliest:
      return "fallback-earliest";
    case MappingPath::Unresolved:
      return "unresolved";
  }
  return "unresolved";
}

SectionMapper::SectionMapper(std::shared_ptr<const EmbeddingClient> embedder,
                             std::shared_ptr<const ChatClient> verifier,
                             PromptTemplate verification_prompt, double temperature,
                             std::size_t audit_top_k)
    : embedder_(std::move(embedder)),
      verifier_(std::move(verifier)),
      prompt_(std::move(verification_prompt)),
      temperature_(temperature),
      audit_top_k_(audit_top_k) {
  if (!embedder_ || !verifier_) throw std::invalid_argument("SectionMapper needs both backends");
}

const SchemaHint& SectionMapper::verification_schema() {
  static const SchemaHint schema{
      "verification", {{"rationale", FieldType::String, false}, {"introduces", FieldType::Boolean, true}}};
  return schema;
}

std::vector<EmbeddingVector> SectionMapper::embed_chunks(const std::vector<Chunk>& chunks) const {
  std::vector<EmbeddingVector> out;
  out.reserve(chunks.size());
  for (const auto& c : chunks) out.push_back(embedder_->embed(c.text));
  return out;
}

bool SectionMapper::verify(const std::string& summary, const Chunk& c) const {
  ChatRequest request;
  request.user_prompt = prompt_.render({{"summary", summary}, {"chunk", c.text}});
  request.schema_hint = verification_schema();
  request.temperature = temperature_;
  return verifier_->complete(request).parsed->at("introduces").get<bool>();
}

LocatedSummary SectionMapper::map(const std::string& summary, const std::vector<Chunk>& chunks,
                                  const std::optional<SentenceSpan>& excluded) const {
  return map(summary, chunks, embed_chunks(chunks), excluded);
}

LocatedSummary SectionMapper::map(const std::string& summary, const std::vector<Chunk>& chunks,
                                  const std::vector<EmbeddingVector>& chunk_embeddings,
                                  const std::optional<SentenceSpan>& excluded) const {
  if (chunk_embeddings.size() != chunks.size()) {
    throw std::invalid_argument("one embedding per chunk expected");
  }
  LocatedSummary out;
  out.summary = summary;

  std::vector<Similarity> ranked;
  if (!chunks.empty()) {
    const auto query = embedder_->embed(summary);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      if (intersects(chunks[i].span, excluded)) continue;
      ranked.push_back({i, cosine_similarity(query, chunk_embeddings[i])});
    }
  }
  // Highest similarity first; earlier chunk on ties.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Similarity& a, const Similarity& b) { return a.score > b.score; });
  for (std::size_t i = 0; i < std::min(audit_top_k_, ranked.size()); ++i) {
    out.top_similarities.push_back({ranked[i].chunk_index, round6(ranked[i].score)});
  }
  if (ranked.empty()) return out;

  const auto top = ranked.front().chunk_index;
  ++out.verifier_calls;
  if (verify(summary, chunks[top])) {
    out.chunk_index = top;
    out.path = MappingPath::Top1Verified;
    return out;
  }
  // Scanning in order and stopping at the first acceptance gives the same
  // answer as verifying every chunk and taking the earliest positive.
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (i == top || intersects(chunks[i].span, excluded)) continue;
    ++out.verifier_calls;
    if (verify(summary, chunks[i])) {
      out.chunk_index = i;
      out.path = MappingPath::FallbackEarliest;
      return out;
    }
  }
  return out;
}

SectionSplit split_into_sections(std::vector<LocatedStart> located, std::size_t n_sentences,
                                 const std::optional<SentenceSpan>& award) {
  std::stable_sort(located.begin(), located.end(), [](const LocatedStart& a, const LocatedStart& b) {
    return a.sentence < b.sentence;
  });
  SectionSplit out;
  std::vector<LocatedStart> kept;
  for (auto& l : located) {
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const LocatedStart& k) {
      return k.chunk_index == l.chunk_index || k.sentence == l.sentence;
    });
    if (duplicate) {
      out.order_violations.push_back(std::move(l));
    } else {
      kept.push_back(std::move(l));
    }
  }
  const std::size_t limit = award ? std::min(award->begin, n_sentences) : n_sentences;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const std::size_t begin = kept[i].sentence;
    const std::size_t end = i + 1 < kept.size() ? kept[i + 1].sentence : std::max(limit, begin);
    out.sections.push_back({kept[i].summary_index, kept[i].summary, {begin, end}});
  }
  return out;
}

std::size_t default_section_ceiling(std::vector<std::size_t> section_sizes) {
  if (section_sizes.empty()) return 0;
  std::sort(section_sizes.begin(), section_sizes.end());
  // Nearest rank: ceil(0.95 n), 1-based.
  const std::size_t rank = (95 * section_sizes.size() + 99) / 100;
  return section_sizes[std::max<std::size_t>(rank, 1) - 1];
}

const SchemaHint& dilemma_schema() {
  static const SchemaHint schema{
      "dilemma", {{"body", FieldType::String, true}, {"question", FieldType::String, true}}};
  return schema;
}

DilemmaText extract_full_dilemma(const std::string& section_text, std::size_t section_sentences,
                                 const std::string& summary, std::size_t ceiling,
                                 const ChatClient& client, const PromptTemplate& prompt,
                                 double temperature) {
  if (section_sentences > ceiling) throw SectionTooLong(section_sentences, ceiling);
  if (text::trim(section_text).empty()) throw InvalidInput("empty section for: " + summary);
  ChatRequest request;
  request.user_prompt = prompt.render({{"summary", summary}, {"section", section_text}});
  request.schema_hint = dilemma_schema();
  request.temperature = temperature;
  const auto parsed = *client.complete(request).parsed;
  return {parsed.at("body").get<std::string>(), parsed.at("question").get<std::string>()};
}

std::string dilemma_id(const std::string& episode_id, std::size_t summary_index) {
  return episode_id + "-d" + std::to_string(summary_index + 1);
}

namespace {

struct EpisodeWork {
  const Transcript* transcript = nullptr;
  std::vector<std::string> sentences;
  std::optional<SentenceSpan> award;
  std::vector<Chunk> chunks;
  std::vector<LocatedSummary> located;
  SectionSplit split;
};

EpisodeWork locate_episode(const Transcript& transcript, const SectionMapper& mapper,
                           const IngestOptions& options) {
  EpisodeWork work;
  work.transcript = &transcript;
  work.sentences = transcript_sentences(transcript, options.abbreviations);
  work.award = detect_award_section(work.sentences, options.award_keywords);
  work.chunks = chunk(work.sentences, options.chunk_size, options.stride);
  const auto& chunks = work.chunks;
  const auto embeddings = mapper.embed_chunks(chunks);

  std::vector<LocatedStart> starts;
  for (std::size_t k = 0; k < transcript.summaries.size(); ++k) {
    auto located = mapper.map(transcript.summaries[k], chunks, embeddings, work.award);
    if (located.chunk_index) {
      starts.push_back({k, transcript.summaries[k], *located.chunk_index,
                        chunks[*located.chunk_index].span.begin});
    }
    work.located.push_back(std::move(located));
  }
  work.split = split_into_sections(std::move(starts), work.sentences.size(), work.award);
  return work;
}

struct SectionJob {
  std::size_t episode = 0;
  Section section;
  std::string text;
};

struct SectionOutcome {
  std::optional<DilemmaText> dilemma;
  std::string outcome;
  std::string detail;
};

}  // namespace

IngestResult ingest_transcripts(const std::vector<Transcript>& transcripts,
                                const SectionMapper& mapper, const ChatClient& dilemma_client,
                                const PromptTemplate& dilemma_prompt,
                                const IngestOptions& options) {
  IngestResult result;
  std::vector<const Transcript*> kept;
  for (const auto& t : transcripts) {
    if (t.summaries.empty()) {
      spdlog::info("episode {} has no dilemma summaries; skipped", t.episode_id);
      ++result.episodes_skipped;
    } else {
      kept.push_back(&t);
    }
  }

  const auto located = parallel_map(kept.size(), options.parallelism, [&](std::size_t i) {
    return locate_episode(*kept[i], mapper, options);
  });
  std::vector<EpisodeWork> episodes;
  for (const auto& outcome : located) episodes.push_back(outcome.get());

  std::vector<SectionJob> jobs;
  std::vector<std::size_t> sizes;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    for (const auto& section : episodes[e].split.sections) {
      jobs.push_back({e, section, join_span(episodes[e].sentences, section.span)});
      sizes.push_back(section.span.size());
    }
  }
  result.ceiling = options.ceiling ? *options.ceiling : default_section_ceiling(sizes);

  const auto extracted = parallel_map(jobs.size(), options.parallelism, [&](std::size_t i) {
    const auto& job = jobs[i];
    SectionOutcome out;
    try {
      out.dilemma = extract_full_dilemma(job.text, job.section.span.size(), job.section.summary,
                                         result.ceiling, dilemma_client, dilemma_prompt,
                                         options.dilemma_temperature);
      out.outcome = "dilemma";
    } catch (const SectionTooLong& e) {
      out.outcome = "section_too_long";
      out.detail = e.what();
    } catch (const SchemaParseError& e) {
      out.outcome = "unparseable";
      out.detail = e.what();
    }
    return out;
  });

  // Assemble in input order: episode, then summary index.
  std::size_t job_index = 0;
  for (const auto& work : episodes) {
    const auto& episode_id = work.transcript->episode_id;
    std::map<std::size_t, std::pair<const SectionJob*, const SectionOutcome*>> by_summary;
    for (; job_index < jobs.size() && &episodes[jobs[job_index].episode] == &work; ++job_index) {
      by_summary[jobs[job_index].section.summary_index] = {&jobs[job_index],
                                                           &extracted[job_index].get()};
    }
    std::set<std::size_t> violated;
    for (const auto& v : work.split.order_violations) violated.insert(v.summary_index);

    for (std::size_t k = 0; k < work.located.size(); ++k) {
      const auto& loc = work.located[k];
      Json record{{"episode_id", episode_id},
                  {"summary_index", k},
                  {"summary", loc.summary},
                  {"chunk_index", loc.chunk_index ? Json(*loc.chunk_index) : Json()},
                  {"path", to_string(loc.path)}};
      Json sims = Json::array();
      for (const auto& s : loc.top_similarities) {
        sims.push_back(Json{{"chunk_index", s.chunk_index},
                            {"score", s.score},
                            {"text", work.chunks[s.chunk_index].text}});
      }
      record["top_similarities"] = std::move(sims);
      record["section"] = Json();
      record["dilemma_id"] = Json();

      if (!loc.chunk_index) {
        record["outcome"] = "unresolved";
      } else if (violated.contains(k)) {
        record["outcome"] = "order_violation";
      } else {
        const auto& [job, outcome] = by_summary.at(k);
        record["section"] = Json::array({job->section.span.begin, job->section.span.end});
        record["outcome"] = outcome->outcome;
        if (!outcome->detail.empty()) record["detail"] = outcome->detail;
        if (outcome->dilemma) {
          Dilemma d;
          d.id = dilemma_id(episode_id, k);
          d.episode_id = episode_id;
          d.summary = loc.summary;
          d.body = outcome->dilemma->body;
          d.question = outcome->dilemma->question;
          record["dilemma_id"] = d.id;
          result.panel_responses.push_back(
              AgentResponse{options.panel_agent, d.id, job->text, options.created_at});
          result.dilemmas.push_back(std::move(d));
        }
      }
      result.audit.push_back(std::move(record));
    }
  }
  return result;
}

}  // namespace normalign
