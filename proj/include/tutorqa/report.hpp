#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tutorqa/analysis.hpp"
#include "tutorqa/verdicts.hpp"

namespace tutorqa {

inline constexpr int kReportSchemaVersion = 1;

struct RunMetadata {
  std::string command;
  std::string tool_version = TUTORQA_VERSION;
  std::string generated_at;  ///< the only field allowed to differ between identical runs
  std::string config_hash;
  std::string classifier;
  std::string source;  ///< corpus or fixture the numbers come from
};

struct Report {
  RunMetadata meta;
  std::vector<SuiteResult> suites;
  std::optional<GatePolicy> gate;
  std::optional<VersionComparison> comparison;
  std::optional<TutorialSummary> tutorials;
  std::optional<AgreementMatrix> agreement;
};

nlohmann::json to_json(const SuiteResult& suite);
nlohmann::json to_json(const VersionComparison& c);
nlohmann::json to_json(const TutorialSummary& s);
nlohmann::json to_json(const AgreementMatrix& a);
nlohmann::json to_json(const Report& report);

/// Structural check of a report document against the current schema.
/// Throws ValidationError naming the first offending field.
void validate_report(const nlohmann::json& doc);

/// Human-readable rendering; reads nothing but `doc`.
std::string render_markdown(const nlohmann::json& doc);

/// Writes <stem>.json and <stem>.md into `dir` (each via temp + rename).
nlohmann::json write_report(const Report& report, const std::filesystem::path& dir,
                            std::string_view stem = "report");

}  // namespace tutorqa
