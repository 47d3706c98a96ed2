#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tutorqa/embedding.hpp"
#include "tutorqa/gateway.hpp"

namespace tutorqa {

/// Lowercased tokens free of whitespace and punctuation.
struct TokenSeq {
  std::vector<std::string> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

/// Lowercases ASCII and splits on every maximal run of non-alphanumeric
/// characters. Bytes >= 0x80 count as word characters so UTF-8 words stay
/// whole. No stemming, no stopword removal.
TokenSeq tokenize(std::string_view text);

/// Overlap counts plus the derived ratios. f1 = 2*overlap/(candidate+reference),
/// which equals the harmonic mean of precision and recall.
struct RougeScore {
  std::size_t overlap = 0;
  std::size_t candidate_total = 0;
  std::size_t reference_total = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static RougeScore from_counts(std::size_t overlap, std::size_t candidate_total,
                                std::size_t reference_total) noexcept;
};

/// Clipped n-gram multiset overlap. n >= 1 (throws ValidationError otherwise).
RougeScore rouge_n(const TokenSeq& candidate, const TokenSeq& reference, int n);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// Longest-common-subsequence overlap.
RougeScore rouge_l(const TokenSeq& candidate, const TokenSeq& reference);

enum class SemanticMode { Sentence, TokenGreedy };

std::string_view to_string(SemanticMode mode) noexcept;
SemanticMode parse_semantic_mode(std::string_view text);

/// Sentence mode stores the raw cosine in all three fields.
struct SemanticScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  SemanticMode mode = SemanticMode::Sentence;
  bool degenerate = false;  ///< empty candidate or reference; scores forced to 0
};

SemanticScore semantic_score(std::string_view candidate, std::string_view reference,
                             EmbeddingProvider& provider, SemanticMode mode);

/// Per-question metric bundle with provenance.
struct ScoreRecord {
  std::string provider;
  std::string model;
  std::string version;
  SessionMode mode = SessionMode::WithoutHistory;
  int tutorial = 0;
  std::string frame_id;
  std::string question_id;
  RougeScore rouge1;
  RougeScore rouge2;
  RougeScore rougeL;
  SemanticScore semantic;
  bool parse_failed = false;
};

/// Scores `actual` against `expected`; provenance is left for the caller.
ScoreRecord score_question(std::string_view expected, std::string_view actual,
                           EmbeddingProvider& provider, SemanticMode mode);

}  // namespace tutorqa
