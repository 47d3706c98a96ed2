#include "tutorqa/calibration.hpp"

#include <array>
#include <numeric>
#include <set>
#include <utility>

namespace tutorqa {

std::string_view to_string(QualityClass c) noexcept {
  switch (c) {
    case QualityClass::Low: return "low";
    case QualityClass::Mid: return "mid";
    case QualityClass::High: return "high";
  }
  return "low";
}

QualityClass parse_quality_class(std::string_view text) {
  if (text == "low") return QualityClass::Low;
  if (text == "mid") return QualityClass::Mid;
  if (text == "high") return QualityClass::High;
  throw ParseError(fmt::format("unknown quality class '{}'", text));
}

namespace {

Eigen::MatrixX2d to_matrix(std::span<const FeaturePoint> points) {
  Eigen::MatrixX2d m(static_cast<Eigen::Index>(points.size()), 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!std::isfinite(p.r2) || !std::isfinite(p.bs)) {
      throw DataError(fmt::format("non-finite feature for question {}", p.question_id));
    }
    m(static_cast<Eigen::Index>(i), 0) = p.r2;
    m(static_cast<Eigen::Index>(i), 1) = p.bs;
  }
  return m;
}

}  // namespace

ClusterModel kmeans_fit(std::span<const FeaturePoint> points, int k, std::uint64_t seed,
                        const LloydOptions<double>& options) {
  if (k != 3) throw DataError(fmt::format("k-means calibration uses k=3 quality classes, got k={}", k));
  if (static_cast<int>(points.size()) < k) {
    throw DataError(fmt::format("too few points: k-means needs at least {}, got {}", k, points.size()));
  }
  const auto m = to_matrix(points);
  std::set<std::pair<double, double>> distinct;
  for (Eigen::Index i = 0; i < m.rows(); ++i) distinct.emplace(m(i, 0), m(i, 1));
  if (static_cast<int>(distinct.size()) < k) {
    throw DataError(fmt::format("degenerate input: {} distinct points for k={}", distinct.size(), k));
  }

  const auto fit = lloyd_kmeans(m, k, seed, options);

  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return fit.centroids.row(a).sum() < fit.centroids.row(b).sum(); });

  ClusterModel model;
  model.k = k;
  model.seed = seed;
  model.centroids = fit.centroids;
  model.centroid_class.resize(static_cast<std::size_t>(k));
  for (int rank = 0; rank < k; ++rank) {
    model.centroid_class[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])] =
        static_cast<QualityClass>(rank);
  }
  model.training = m;
  model.training_class.reserve(points.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    model.training_class.push_back(model.centroid_class[static_cast<std::size_t>(fit.labels[i])]);
  }
  return model;
}

QualityClass knn_classify(const FeaturePoint& point, const ClusterModel& model, int k_neighbors) {
  if (!model.trained()) throw DataError("K-NN classification needs a trained cluster model");
  if (k_neighbors < 1) throw DataError("K-NN needs k >= 1");

  const Eigen::RowVector2d q(point.r2, point.bs);
  const Eigen::VectorXd d2 = (model.training.rowwise() - q).rowwise().squaredNorm();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(d2.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(k_neighbors), idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      return d2[a] < d2[b] || (d2[a] == d2[b] && a < b);
                    });

  std::array<int, 3> votes{};
  for (std::size_t i = 0; i < k; ++i) {
    ++votes[static_cast<std::size_t>(model.training_class[static_cast<std::size_t>(idx[i])])];
  }
  // max_element returns the first maximum, i.e. the most severe tied class.
  return static_cast<QualityClass>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

std::vector<int> otsu_bin_thresholds(const Eigen::VectorXd& counts, int classes) {
  const int bins = static_cast<int>(counts.size());
  if (classes < 2 || bins < classes) throw DataError("multi-Otsu: need 2 <= classes <= bins");
  const double total = counts.sum();
  if (!(total > 0.0)) throw DataError("multi-Otsu: empty histogram");

  const Eigen::VectorXd p = counts / total;
  const Eigen::VectorXd level = Eigen::VectorXd::LinSpaced(bins, 0.0, bins - 1.0);
  const double mean = p.dot(level);

  // Prefix sums: cp[j] = sum_{i<j} p_i, cs[j] = sum_{i<j} p_i (i - mean).
  Eigen::VectorXd cp = Eigen::VectorXd::Zero(bins + 1);
  Eigen::VectorXd cs = Eigen::VectorXd::Zero(bins + 1);
  for (int i = 0; i < bins; ++i) {
    cp[i + 1] = cp[i] + p[i];
    cs[i + 1] = cs[i] + p[i] * (i - mean);
  }
  // lut(u, v) = S(u..v)^2 / P(u..v), zero for empty ranges.
  Eigen::MatrixXd lut = Eigen::MatrixXd::Zero(bins, bins);
  for (int u = 0; u < bins; ++u) {
    for (int v = u; v < bins; ++v) {
      const double pr = cp[v + 1] - cp[u];
      const double sr = cs[v + 1] - cs[u];
      lut(u, v) = pr > 0.0 ? sr * sr / pr : 0.0;
    }
  }

  const int cuts = classes - 1;
  std::vector<int> current(static_cast<std::size_t>(cuts));
  std::vector<int> best;
  double best_value = -std::numeric_limits<double>::infinity();

  // Thresholds t_0 < ... < t_{cuts-1} in [0, bins-2]; segment j spans
  // (t_{j-1}, t_j], the last one ends at bins-1.
  std::function<void(int, int, double)> search = [&](int depth, int start, double acc) {
    if (depth == cuts) {
      const double value = acc + lut(start, bins - 1);
      if (best.empty() || value > best_value + kOtsuRelativeTie * std::abs(best_value)) {
        best_value = value;
        best = current;
      }
      return;
    }
    const int remaining = cuts - depth - 1;
    for (int t = start; t <= bins - 2 - remaining; ++t) {
      current[static_cast<std::size_t>(depth)] = t;
      search(depth + 1, t + 1, acc + lut(start, t));
    }
  };
  search(0, 0, 0.0);
  return best;
}

ThresholdSet published_thresholds() noexcept {
  return ThresholdSet{{0.1785, 0.4496}, {0.5149, 0.7215}};
}

void validate(const ThresholdSet& t) {
  if (!(t.r2.lt < t.r2.ht)) throw ValidationError(fmt::format("r2 thresholds need LT < HT ({} >= {})", t.r2.lt, t.r2.ht));
  if (!(t.bs.lt < t.bs.ht)) throw ValidationError(fmt::format("bs thresholds need LT < HT ({} >= {})", t.bs.lt, t.bs.ht));
}

std::string_view to_string(Combiner c) noexcept {
  switch (c) {
    case Combiner::Min: return "min";
    case Combiner::Max: return "max";
    case Combiner::BsOnly: return "bs-only";
    case Combiner::R2Only: return "r2-only";
  }
  return "min";
}

Combiner parse_combiner(std::string_view text) {
  if (text == "min") return Combiner::Min;
  if (text == "max") return Combiner::Max;
  if (text == "bs-only") return Combiner::BsOnly;
  if (text == "r2-only") return Combiner::R2Only;
  throw ValidationError(fmt::format("unknown combiner '{}'", text));
}

QualityClass classify_feature(double value, const FeatureThresholds& t) noexcept {
  if (value <= t.lt) return QualityClass::Low;
  if (value > t.ht) return QualityClass::High;
  return QualityClass::Mid;
}

QualityClass classify_by_thresholds(const FeaturePoint& point, const ThresholdSet& thresholds,
                                    Combiner combiner) {
  const auto r2 = classify_feature(point.r2, thresholds.r2);
  const auto bs = classify_feature(point.bs, thresholds.bs);
  switch (combiner) {
    case Combiner::Min: return std::min(r2, bs);
    case Combiner::Max: return std::max(r2, bs);
    case Combiner::BsOnly: return bs;
    case Combiner::R2Only: return r2;
  }
  return std::min(r2, bs);
}

ThresholdSet fit_otsu_thresholds(std::span<const FeaturePoint> points, int bins) {
  if (points.empty()) throw DataError("no score points to calibrate");
  std::vector<double> r2;
  std::vector<double> bs;
  for (const auto& p : points) {
    r2.push_back(p.r2);
    bs.push_back(p.bs);
  }
  const auto tr = multi_otsu<double>(r2, 3, bins);
  const auto tb = multi_otsu<double>(bs, 3, bins);
  ThresholdSet out{{tr[0], tr[1]}, {tb[0], tb[1]}};
  validate(out);
  return out;
}

}  // namespace tutorqa
