#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <fmt/format.h>

#include "tutorqa/corpus.hpp"
#include "tutorqa/error.hpp"
#include "tutorqa/gateway.hpp"
#include "tutorqa/text_metrics.hpp"

namespace tutorqa {

enum class Metric : int { Rouge1 = 0, Rouge2 = 1, RougeL = 2, BertScore = 3 };
inline constexpr std::array<Metric, 4> kMetrics = {Metric::Rouge1, Metric::Rouge2, Metric::RougeL,
                                                   Metric::BertScore};

std::string_view to_string(Metric m) noexcept;
Metric parse_metric(std::string_view text);

/// F1 of the ROUGE variants, semantic F1 for BertScore.
double metric_value(const ScoreRecord& s, Metric m) noexcept;
Eigen::Vector4d metric_vector(const ScoreRecord& s) noexcept;

// ---------------------------------------------------------------------------
// Spearman

/// 1-based ranks; tied values share the mean of the ranks they span.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> average_ranks(
    const Eigen::MatrixBase<Derived>& v, bool descending = false) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return descending ? v(b) < v(a) : v(a) < v(b);
  });
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && v(order[static_cast<std::size_t>(j + 1)]) == v(order[static_cast<std::size_t>(i)])) ++j;
    const Scalar r = Scalar(i + j + 2) / Scalar(2);
    for (Eigen::Index t = i; t <= j; ++t) ranks(order[static_cast<std::size_t>(t)]) = r;
    i = j + 1;
  }
  return ranks;
}

/// Pearson correlation of the average-rank vectors.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar spearman(const Eigen::MatrixBase<DerivedX>& x,
                                   const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  if (x.size() != y.size()) {
    throw ValidationError(fmt::format("spearman: length mismatch ({} vs {})", x.size(), y.size()));
  }
  if (x.size() < 2) throw DataError("spearman: need at least 2 observations");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const auto cx = (rx.array() - rx.mean()).matrix().eval();
  const auto cy = (ry.array() - ry.mean()).matrix().eval();
  const Scalar sxx = cx.squaredNorm();
  const Scalar syy = cy.squaredNorm();
  if (sxx == Scalar(0) || syy == Scalar(0)) throw DataError("spearman: constant input");
  const Scalar r = cx.dot(cy) / std::sqrt(sxx * syy);
  return std::clamp(r, Scalar(-1), Scalar(1));
}

double spearman(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Version comparison

struct MetricRow {
  std::string model;
  std::string version;
  SessionMode mode = SessionMode::WithHistory;
  Eigen::Vector4d means = Eigen::Vector4d::Zero();  ///< indexed by Metric
  std::size_t question_count = 0;
};

struct MetricTable {
  std::vector<MetricRow> rows;

  const MetricRow* find(std::string_view model, std::string_view version, SessionMode mode) const;
};

/// Flat mean over every score in each (model, version, mode) group.
MetricTable metric_means(std::span<const ScoreRecord> scores);

struct ImprovementCell {
  std::string model;
  SessionMode mode = SessionMode::WithHistory;
  Metric metric = Metric::Rouge1;
  double value_p = 0.0;
  double value_l = 0.0;
  double delta = 0.0;
  double improvement_pct = 0.0;  ///< (L - P) / P * 100
  std::size_t question_count = 0;
};

struct ModeExtremes {
  SessionMode mode = SessionMode::WithHistory;
  ImprovementCell min;
  ImprovementCell max;
  bool all_improved = true;  ///< L > P in every cell of this mode
};

struct VersionComparison {
  std::string version_p;
  std::string version_l;
  std::vector<ImprovementCell> cells;
  std::vector<ModeExtremes> extremes;  ///< one per mode present

  bool all_improved() const noexcept;
  const ModeExtremes* for_mode(SessionMode mode) const noexcept;
};

/// Pairs every (model, mode) row of version p with the same row of version l.
/// Throws DataError on an unpaired row or a zero baseline.
VersionComparison compare_tables(const MetricTable& table, std::string_view version_p,
                                 std::string_view version_l);

/// Means over the questions both versions share in the corpus and that were
/// scored for the model in both versions. `mode` restricts to one session
/// mode. Throws DataError when a (model, mode) has no common scored question.
VersionComparison compare_versions(std::span<const ScoreRecord> scores, const CorpusManifest& corpus,
                                   std::string_view version_p, std::string_view version_l,
                                   std::optional<SessionMode> mode = std::nullopt);

// ---------------------------------------------------------------------------
// Tutorial summary

struct TutorialRow {
  int tutorial = 0;
  Eigen::Vector4d means = Eigen::Vector4d::Zero();
  Eigen::Vector4d ranks = Eigen::Vector4d::Zero();  ///< 1 = highest mean
  std::size_t count = 0;
};

struct TutorialSummary {
  std::vector<TutorialRow> rows;  ///< ascending tutorial

  const TutorialRow* find(int tutorial) const noexcept;
  /// Tutorials holding rank 1 / the last rank for `m`.
  std::vector<int> best(Metric m) const;
  std::vector<int> worst(Metric m) const;
};

/// Ranks precomputed means (descending, average ranks on ties).
TutorialSummary rank_tutorials(std::vector<TutorialRow> rows);

/// Unweighted mean over every score of each tutorial.
TutorialSummary tutorial_means(std::span<const ScoreRecord> scores);

// ---------------------------------------------------------------------------
// Model agreement

struct AgreementMatrix {
  std::vector<std::string> models;
  Eigen::MatrixXd mean;                     ///< mean over the four metrics
  std::array<Eigen::MatrixXd, 4> per_metric;
  std::size_t question_count = 0;
};

/// Pairwise Spearman over per-question scores joined on
/// (version, mode, question_id). Every model must cover exactly the same
/// keys; otherwise ValidationError lists what is missing.
AgreementMatrix model_agreement(std::span<const ScoreRecord> scores);

}  // namespace tutorqa
