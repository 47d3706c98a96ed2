#include "tutorqa/verdicts.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace tutorqa {

std::string_view to_string(TestOutcome o) noexcept {
  switch (o) {
    case TestOutcome::Fail: return "fail";
    case TestOutcome::NeedsRevision: return "needs-revision";
    case TestOutcome::Pass: return "pass";
  }
  return "fail";
}

TestOutcome parse_test_outcome(std::string_view text) {
  if (text == "fail") return TestOutcome::Fail;
  if (text == "needs-revision") return TestOutcome::NeedsRevision;
  if (text == "pass") return TestOutcome::Pass;
  throw ParseError(fmt::format("unknown test outcome '{}'", text));
}

Classifier make_classifier(const Calibration& c) {
  if (c.thresholds) return ThresholdClassifier{*c.thresholds, c.combiner};
  if (c.cluster) return KnnClassifier{*c.cluster, c.k_neighbors};
  throw ValidationError("calibration has no classifier");
}

std::string describe(const Classifier& classifier) {
  return std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ThresholdClassifier>) {
          return fmt::format("thresholds r2 LT={} HT={}, bs LT={} HT={}, combiner={}",
                             c.thresholds.r2.lt, c.thresholds.r2.ht, c.thresholds.bs.lt,
                             c.thresholds.bs.ht, to_string(c.combiner));
        } else {
          return fmt::format("k-nn k={} over {} k-means training points", c.k_neighbors,
                             c.model.training.rows());
        }
      },
      classifier);
}

FeaturePoint feature_point(const ScoreRecord& s) {
  return {s.rouge2.f1, s.semantic.f1, s.question_id, s.model};
}

Assertion assert_case(const ScoreRecord& score, const Classifier& classifier) {
  const auto point = feature_point(score);
  const auto quality = std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ThresholdClassifier>) {
          return classify_by_thresholds(point, c.thresholds, c.combiner);
        } else {
          return knn_classify(point, c.model, c.k_neighbors);
        }
      },
      classifier);
  return {quality, to_outcome(quality)};
}

std::size_t SuiteResult::question_total() const noexcept {
  return question_counts[0] + question_counts[1] + question_counts[2];
}

SuiteResult run_suite(const CorpusManifest& corpus, std::span<const Transcript> transcripts,
                      std::span<const ScoreRecord> scores, const Classifier& classifier) {
  if (transcripts.empty()) throw ValidationError("run_suite: no transcripts");
  const auto& head = transcripts.front();
  for (const auto& t : transcripts) {
    if (t.provider != head.provider || t.version != head.version || t.mode != head.mode) {
      throw ValidationError("run_suite: transcripts must share provider, version and mode");
    }
  }

  SuiteResult result;
  result.provider = head.provider;
  result.model = head.model;
  result.version = head.version;
  result.mode = head.mode;

  std::map<std::pair<std::string, std::string>, const ScoreRecord*> score_index;
  for (const auto& s : scores) {
    if (s.provider == head.provider && s.version == head.version && s.mode == head.mode) {
      score_index[{s.frame_id, s.question_id}] = &s;
    }
  }

  std::vector<int> tutorials;
  std::map<std::string, const TranscriptEntry*> entries;
  for (const auto& t : transcripts) {
    tutorials.push_back(t.tutorial);
    for (const auto& e : t.entries) entries[e.frame_id] = &e;
  }
  std::sort(tutorials.begin(), tutorials.end());
  tutorials.erase(std::unique(tutorials.begin(), tutorials.end()), tutorials.end());

  std::vector<std::string> gaps;
  for (int tutorial : tutorials) {
    for (const FrameCase* frame : corpus.tutorial_frames(head.version, tutorial)) {
      auto it = entries.find(frame->frame_id);
      if (it == entries.end()) {
        gaps.push_back(fmt::format("{} (no transcript entry)", frame->frame_id));
        continue;
      }
      const TranscriptEntry& entry = *it->second;
      if (entry.status == EntryStatus::Error) {
        gaps.push_back(fmt::format("{} (provider error: {})", frame->frame_id, entry.error));
        continue;
      }

      FrameVerdict fv;
      fv.frame_id = frame->frame_id;
      fv.tutorial = frame->tutorial;
      fv.ordinal = frame->ordinal;
      fv.image_path = frame->image_path;
      bool missing_scores = false;
      for (const auto& qa : frame->qa_pairs) {
        auto sit = score_index.find({frame->frame_id, qa.question_id});
        if (sit == score_index.end()) {
          missing_scores = true;
          break;
        }
        QuestionVerdict qv;
        qv.question_id = qa.question_id;
        qv.question = qa.question;
        qv.expected_answer = qa.expected_answer;
        for (const auto& a : entry.answers) {
          if (a.question_id == qa.question_id) qv.actual_answer = a.actual_answer;
        }
        qv.score = *sit->second;
        const auto verdict = assert_case(qv.score, classifier);
        qv.quality = verdict.quality;
        qv.outcome = verdict.outcome;
        fv.outcome = std::min(fv.outcome, qv.outcome);
        fv.questions.push_back(std::move(qv));
      }
      if (missing_scores) {
        gaps.push_back(fmt::format("{} (no scores)", frame->frame_id));
        continue;
      }
      result.frames.push_back(std::move(fv));
    }
  }
  if (!gaps.empty()) {
    throw ValidationError(fmt::format("coverage gap for {} {} mode {}: {}", head.provider,
                                      head.version, to_string(head.mode), fmt::join(gaps, "; ")));
  }

  for (const auto& fv : result.frames) {
    ++result.frame_counts[static_cast<std::size_t>(fv.outcome)];
    for (const auto& qv : fv.questions) {
      ++result.question_counts[static_cast<std::size_t>(qv.outcome)];
      if (qv.outcome == TestOutcome::Fail) {
        result.flagged.push_back({fv.frame_id, fv.image_path, qv.question_id, qv.question,
                                  qv.expected_answer, qv.actual_answer, qv.score.rouge2.f1,
                                  qv.score.semantic.f1, qv.score.parse_failed});
      }
    }
  }
  return result;
}

bool gate_passes(std::span<const SuiteResult> suites, GatePolicy policy) noexcept {
  for (const auto& s : suites) {
    if (s.question_counts[static_cast<std::size_t>(TestOutcome::Fail)] > 0) return false;
    if (policy == GatePolicy::FailOrRevision &&
        s.question_counts[static_cast<std::size_t>(TestOutcome::NeedsRevision)] > 0) {
      return false;
    }
  }
  return true;
}

}  // namespace tutorqa
