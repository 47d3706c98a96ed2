#include "tutorqa/text_metrics.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "tutorqa/error.hpp"

namespace tutorqa {

TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool word = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      c >= 0x80;
    if (word) {
      current.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      out.tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.tokens.push_back(std::move(current));
  return out;
}

RougeScore RougeScore::from_counts(std::size_t overlap, std::size_t candidate_total,
                                   std::size_t reference_total) noexcept {
  RougeScore s{overlap, candidate_total, reference_total, 0.0, 0.0, 0.0};
  if (candidate_total > 0) s.precision = static_cast<double>(overlap) / static_cast<double>(candidate_total);
  if (reference_total > 0) s.recall = static_cast<double>(overlap) / static_cast<double>(reference_total);
  if (candidate_total > 0 && reference_total > 0 && overlap > 0) {
    s.f1 = 2.0 * static_cast<double>(overlap) / static_cast<double>(candidate_total + reference_total);
  }
  return s;
}

namespace {

using NGramCounts = std::map<std::vector<std::string>, std::size_t>;

NGramCounts ngram_counts(const TokenSeq& seq, std::size_t n, std::size_t& total) {
  NGramCounts counts;
  total = 0;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[std::vector<std::string>(seq.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      seq.tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    ++total;
  }
  return counts;
}

}  // namespace

RougeScore rouge_n(const TokenSeq& candidate, const TokenSeq& reference, int n) {
  if (n < 1) throw ValidationError(fmt::format("rouge_n: n must be >= 1, got {}", n));
  std::size_t cand_total = 0;
  std::size_t ref_total = 0;
  const auto cand = ngram_counts(candidate, static_cast<std::size_t>(n), cand_total);
  const auto ref = ngram_counts(reference, static_cast<std::size_t>(n), ref_total);
  std::size_t overlap = 0;
  for (const auto& [gram, count] : cand) {
    if (auto it = ref.find(gram); it != ref.end()) overlap += std::min(count, it->second);
  }
  return RougeScore::from_counts(overlap, cand_total, ref_total);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> curr(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      curr[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], curr[j - 1]);
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

RougeScore rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
  return RougeScore::from_counts(lcs_length(candidate.tokens, reference.tokens), candidate.size(),
                                 reference.size());
}

std::string_view to_string(SemanticMode mode) noexcept {
  return mode == SemanticMode::Sentence ? "sentence" : "token_greedy";
}

SemanticMode parse_semantic_mode(std::string_view text) {
  if (text == "sentence") return SemanticMode::Sentence;
  if (text == "token_greedy" || text == "token-greedy") return SemanticMode::TokenGreedy;
  throw ValidationError(fmt::format("unknown semantic mode '{}'", text));
}

SemanticScore semantic_score(std::string_view candidate, std::string_view reference,
                             EmbeddingProvider& provider, SemanticMode mode) {
  SemanticScore s;
  s.mode = mode;
  const auto cand_tokens = tokenize(candidate);
  const auto ref_tokens = tokenize(reference);
  if (cand_tokens.empty() || ref_tokens.empty()) {
    s.degenerate = true;
    return s;
  }
  if (mode == SemanticMode::Sentence) {
    const double c = cosine(provider.embed_text(candidate), provider.embed_text(reference));
    s.precision = s.recall = s.f1 = c;
    return s;
  }
  const auto match = greedy_match(provider.embed_tokens(cand_tokens.tokens),
                                  provider.embed_tokens(ref_tokens.tokens));
  s.precision = match.precision;
  s.recall = match.recall;
  s.f1 = match.f1;
  return s;
}

ScoreRecord score_question(std::string_view expected, std::string_view actual,
                           EmbeddingProvider& provider, SemanticMode mode) {
  const auto cand = tokenize(actual);
  const auto ref = tokenize(expected);
  ScoreRecord r;
  r.rouge1 = rouge_n(cand, ref, 1);
  r.rouge2 = rouge_n(cand, ref, 2);
  r.rougeL = rouge_l(cand, ref);
  r.semantic = semantic_score(actual, expected, provider, mode);
  return r;
}

}  // namespace tutorqa
