#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <fmt/format.h>

#include "tutorqa/error.hpp"

namespace tutorqa {

/// Three-level answer quality, ordered Low < Mid < High.
enum class QualityClass : int { Low = 0, Mid = 1, High = 2 };

std::string_view to_string(QualityClass c) noexcept;
QualityClass parse_quality_class(std::string_view text);

/// (ROUGE-2 F1, semantic score) of one answer.
struct FeaturePoint {
  double r2 = 0.0;
  double bs = 0.0;
  std::string question_id;
  std::string model;
};

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// K-Means

template <typename Scalar>
struct LloydOptions {
  int max_iterations = 300;
  Scalar tolerance = Scalar(1e-9);  ///< stop when no centroid moves further
  /// Called after every assignment step with (iteration, centroids, labels).
  std::function<void(int, const DenseMatrix<Scalar>&, const Eigen::VectorXi&)> on_assignment;
};

template <typename Scalar>
struct LloydResult {
  DenseMatrix<Scalar> centroids;  ///< k x d
  Eigen::VectorXi labels;         ///< cluster of each point
  std::vector<Scalar> inertia;    ///< within-cluster sum of squares per assignment
  int iterations = 0;
  bool converged = false;
};

/// Nearest centroid, lowest index on ties.
template <typename DerivedP, typename DerivedC>
int nearest_row(const Eigen::MatrixBase<DerivedP>& point, const Eigen::MatrixBase<DerivedC>& centroids,
                typename DerivedC::Scalar* distance2 = nullptr) {
  int best = 0;
  auto best_d = (centroids.row(0) - point).squaredNorm();
  for (Eigen::Index c = 1; c < centroids.rows(); ++c) {
    const auto d = (centroids.row(c) - point).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (distance2) *distance2 = best_d;
  return best;
}

/// k-means++ seeding: first centre uniform, then D^2-weighted sampling.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> kmeanspp_init(const Eigen::MatrixBase<Derived>& points, int k,
                                                    std::mt19937_64& rng) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = points.rows();
  DenseMatrix<Scalar> centroids(k, points.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centroids.row(0) = points.row(first(rng));

  std::vector<double> d2(static_cast<std::size_t>(n));
  for (int c = 1; c < k; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Scalar dist{};
      nearest_row(points.row(i), centroids.topRows(c), &dist);
      d2[static_cast<std::size_t>(i)] = static_cast<double>(dist);
    }
    if (std::all_of(d2.begin(), d2.end(), [](double d) { return d == 0.0; })) {
      throw DataError(fmt::format("degenerate input: fewer than {} distinct points", k));
    }
    std::discrete_distribution<Eigen::Index> pick(d2.begin(), d2.end());
    centroids.row(c) = points.row(pick(rng));
  }
  return centroids;
}

/// Lloyd iterations from k-means++ seeds. Empty clusters keep their centroid,
/// so the recorded inertia never increases.
template <typename Derived>
LloydResult<typename Derived::Scalar> lloyd_kmeans(
    const Eigen::MatrixBase<Derived>& points, int k, std::uint64_t seed,
    const LloydOptions<typename Derived::Scalar>& options = {}) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = points.rows();
  if (k < 1 || n < k) throw DataError(fmt::format("k-means needs at least k={} points, got {}", k, n));

  std::mt19937_64 rng(seed);
  LloydResult<Scalar> out;
  out.centroids = kmeanspp_init(points, k, rng);
  out.labels.resize(n);

  auto assign = [&] {
    Scalar total{0};
    for (Eigen::Index i = 0; i < n; ++i) {
      Scalar d{};
      out.labels[i] = nearest_row(points.row(i), out.centroids, &d);
      total += d;
    }
    out.inertia.push_back(total);
    if (options.on_assignment) {
      options.on_assignment(static_cast<int>(out.inertia.size()) - 1, out.centroids, out.labels);
    }
  };

  for (out.iterations = 0; out.iterations < options.max_iterations; ++out.iterations) {
    assign();
    DenseMatrix<Scalar> sums = DenseMatrix<Scalar>::Zero(k, points.cols());
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(out.labels[i]) += points.row(i);
      ++counts[out.labels[i]];
    }
    Scalar shift{0};
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      const auto updated = (sums.row(c) / Scalar(counts[c])).eval();
      shift = std::max(shift, (updated - out.centroids.row(c)).norm());
      out.centroids.row(c) = updated;
    }
    if (shift < options.tolerance) {
      out.converged = true;
      ++out.iterations;
      break;
    }
  }
  assign();
  return out;
}

/// Fitted clustering with its class labelling and retained training points.
struct ClusterModel {
  int k = 3;
  std::uint64_t seed = 42;
  Eigen::MatrixX2d centroids;                 ///< rows (r2, bs)
  std::vector<QualityClass> centroid_class;   ///< class of each centroid
  Eigen::MatrixX2d training;                  ///< rows (r2, bs)
  std::vector<QualityClass> training_class;   ///< class of each training point

  bool trained() const noexcept { return training.rows() > 0 && centroids.rows() == k; }
};

/// Clusters (r2, bs) into three groups and names them Low/Mid/High by
/// ascending centroid r2 + bs. Throws DataError when there are fewer than k
/// points or fewer than k distinct points.
ClusterModel kmeans_fit(std::span<const FeaturePoint> points, int k = 3, std::uint64_t seed = 42,
                        const LloydOptions<double>& options = {});

/// Majority class of the k nearest training points (Euclidean on (r2, bs),
/// index order on distance ties); vote ties go to the lower class.
QualityClass knn_classify(const FeaturePoint& point, const ClusterModel& model, int k_neighbors = 5);

// ---------------------------------------------------------------------------
// Multi-Otsu

template <typename Scalar>
struct Histogram {
  Eigen::VectorXd counts;
  Scalar lo{0};
  Scalar width{0};

  int bins() const noexcept { return static_cast<int>(counts.size()); }
  /// Upper edge of bin `b`.
  Scalar upper_edge(int b) const noexcept { return lo + Scalar(b + 1) * width; }
};

/// Equal-width bins over [min, max]; the maximum lands in the last bin.
template <typename Scalar>
int histogram_bin(Scalar value, Scalar lo, Scalar width, int bins) {
  const auto b = static_cast<long long>(std::floor((value - lo) / width));
  return static_cast<int>(std::clamp<long long>(b, 0, bins - 1));
}

template <typename Scalar>
Histogram<Scalar> make_histogram(std::span<const Scalar> values, int bins) {
  if (bins < 2) throw DataError("histogram needs at least 2 bins");
  for (Scalar v : values) {
    if (!std::isfinite(static_cast<double>(v))) throw DataError("histogram values must be finite");
  }
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  Histogram<Scalar> h;
  h.lo = *mn;
  h.width = (*mx - *mn) / Scalar(bins);
  if (!(h.width > Scalar(0))) throw DataError("constant input: all values are equal");
  h.counts = Eigen::VectorXd::Zero(bins);
  for (Scalar v : values) h.counts[histogram_bin(v, h.lo, h.width, bins)] += 1.0;
  return h;
}

inline constexpr double kOtsuRelativeTie = 1e-10;

/// Bin-index thresholds maximising between-class variance of `counts` split
/// into `classes` contiguous groups. Uses a lookup table of per-range
/// S^2/P terms (with levels centred on the global mean, so the objective is
/// the between-class variance itself) and scans every threshold tuple in
/// lexicographic order; a later tuple wins only if it is larger by more than
/// a relative 1e-10.
std::vector<int> otsu_bin_thresholds(const Eigen::VectorXd& counts, int classes);

/// Thresholds in ascending order, each the upper edge of its bin.
/// Throws DataError for |values| < classes, non-finite or constant input.
template <typename Scalar>
std::vector<Scalar> multi_otsu(std::span<const Scalar> values, int classes = 3, int bins = 256) {
  if (classes < 2) throw DataError("multi-Otsu needs at least 2 classes");
  if (static_cast<int>(values.size()) < classes) {
    throw DataError(fmt::format("multi-Otsu needs at least {} values, got {}", classes, values.size()));
  }
  if (bins < classes) throw DataError("multi-Otsu needs at least as many bins as classes");
  const auto hist = make_histogram(values, bins);
  std::vector<Scalar> out;
  for (int t : otsu_bin_thresholds(hist.counts, classes)) out.push_back(hist.upper_edge(t));
  return out;
}

// ---------------------------------------------------------------------------
// Threshold classification

struct FeatureThresholds {
  double lt = 0.0;  ///< value <= lt is Low
  double ht = 0.0;  ///< value > ht is High
};

struct ThresholdSet {
  FeatureThresholds r2;
  FeatureThresholds bs;
};

/// BS <= 0.5149 / > 0.7215 and R2 <= 0.1785 / > 0.4496, as published.
ThresholdSet published_thresholds() noexcept;

/// Throws ValidationError unless LT < HT for both features.
void validate(const ThresholdSet& t);

/// How the two per-feature classes combine.
enum class Combiner { Min, Max, BsOnly, R2Only };

std::string_view to_string(Combiner c) noexcept;
Combiner parse_combiner(std::string_view text);

QualityClass classify_feature(double value, const FeatureThresholds& t) noexcept;

/// Default combiner takes the more severe class.
QualityClass classify_by_thresholds(const FeaturePoint& point, const ThresholdSet& thresholds,
                                    Combiner combiner = Combiner::Min);

/// Three-class multi-Otsu per feature.
ThresholdSet fit_otsu_thresholds(std::span<const FeaturePoint> points, int bins = 256);

}  // namespace tutorqa
