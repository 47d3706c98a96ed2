#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "tutorqa/calibration.hpp"

namespace tutorqa {

inline constexpr int kCalibrationFormatVersion = 1;

/// A fitted classifier as stored on disk: either per-feature thresholds
/// (multi-Otsu or published values) or a K-Means model used through K-NN.
struct Calibration {
  std::string method;  ///< "otsu" | "kmeans" | "published"
  std::optional<ThresholdSet> thresholds;
  Combiner combiner = Combiner::Min;
  int bins = 256;
  std::optional<ClusterModel> cluster;
  int k_neighbors = 5;
  std::size_t sample_count = 0;
};

nlohmann::json to_json(const Calibration& c);
Calibration calibration_from_json(const nlohmann::json& doc);

void save_calibration(const Calibration& c, const std::filesystem::path& path);
Calibration load_calibration(const std::filesystem::path& path);

}  // namespace tutorqa
