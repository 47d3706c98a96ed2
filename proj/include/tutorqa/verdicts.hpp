#pragma once

#include <array>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tutorqa/calibration.hpp"
#include "tutorqa/calibration_io.hpp"
#include "tutorqa/corpus.hpp"
#include "tutorqa/text_metrics.hpp"
#include "tutorqa/transcript_store.hpp"

namespace tutorqa {

/// Ordered Fail < NeedsRevision < Pass, one-to-one with Low < Mid < High.
enum class TestOutcome : int { Fail = 0, NeedsRevision = 1, Pass = 2 };

std::string_view to_string(TestOutcome o) noexcept;
TestOutcome parse_test_outcome(std::string_view text);
constexpr TestOutcome to_outcome(QualityClass c) noexcept { return static_cast<TestOutcome>(c); }

struct ThresholdClassifier {
  ThresholdSet thresholds = published_thresholds();
  Combiner combiner = Combiner::Min;
};

struct KnnClassifier {
  ClusterModel model;
  int k_neighbors = 5;
};

using Classifier = std::variant<ThresholdClassifier, KnnClassifier>;

/// Threshold calibrations become ThresholdClassifier, k-means ones KnnClassifier.
Classifier make_classifier(const Calibration& calibration);
std::string describe(const Classifier& classifier);

/// The (ROUGE-2 F1, semantic F1) point of a score.
FeaturePoint feature_point(const ScoreRecord& score);

struct Assertion {
  QualityClass quality = QualityClass::Low;
  TestOutcome outcome = TestOutcome::Fail;
};

Assertion assert_case(const ScoreRecord& score, const Classifier& classifier);

struct QuestionVerdict {
  std::string question_id;
  std::string question;
  std::string expected_answer;
  std::string actual_answer;
  ScoreRecord score;
  QualityClass quality = QualityClass::Low;
  TestOutcome outcome = TestOutcome::Fail;
};

struct FrameVerdict {
  std::string frame_id;
  int tutorial = 0;
  int ordinal = 0;
  std::string image_path;
  std::vector<QuestionVerdict> questions;
  TestOutcome outcome = TestOutcome::Pass;  ///< worst question outcome
};

/// Per-outcome tallies indexed by TestOutcome.
using OutcomeCounts = std::array<std::size_t, 3>;

/// A failing question with everything needed to show it to a developer.
struct FlaggedSample {
  std::string frame_id;
  std::string image_path;
  std::string question_id;
  std::string question;
  std::string expected_answer;
  std::string actual_answer;
  double r2 = 0.0;
  double bs = 0.0;
  bool parse_failed = false;
};

struct SuiteResult {
  std::string provider;
  std::string model;
  std::string version;
  SessionMode mode = SessionMode::WithoutHistory;
  std::vector<FrameVerdict> frames;
  OutcomeCounts question_counts{};
  OutcomeCounts frame_counts{};
  std::vector<FlaggedSample> flagged;

  std::size_t question_total() const noexcept;
};

/// Joins corpus, transcripts and scores of one (provider, version, mode).
/// Throws ValidationError listing every frame without a usable transcript
/// entry or without scores (coverage gap).
SuiteResult run_suite(const CorpusManifest& corpus, std::span<const Transcript> transcripts,
                      std::span<const ScoreRecord> scores, const Classifier& classifier);

enum class GatePolicy { FailOnly, FailOrRevision };

/// True when the suites contain no outcome the policy rejects.
bool gate_passes(std::span<const SuiteResult> suites, GatePolicy policy) noexcept;

}  // namespace tutorqa
