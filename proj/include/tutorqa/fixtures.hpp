#pragma once

#include <filesystem>

#include "tutorqa/analysis.hpp"

namespace tutorqa {

/// Directory of the shipped reference tables. TUTORQA_DATA_DIR in the
/// environment overrides the build-time location.
std::filesystem::path fixture_dir();

/// Published per-model means, columns model, mode, version, then the metrics.
MetricTable load_metric_table(const std::filesystem::path& path);
/// Published per-tutorial means, columns tutorial, then the metrics.
TutorialSummary load_tutorial_table(const std::filesystem::path& path);

MetricTable version_means_fixture();
TutorialSummary tutorial_means_fixture();

}  // namespace tutorqa
