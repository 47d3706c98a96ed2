#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tutorqa/calibration_io.hpp"
#include "tutorqa/corpus.hpp"
#include "tutorqa/embedding.hpp"
#include "tutorqa/provider.hpp"
#include "tutorqa/report.hpp"
#include "tutorqa/text_metrics.hpp"
#include "tutorqa/transcript_store.hpp"
#include "tutorqa/verdicts.hpp"

namespace tutorqa {

/// Providers plus the embedding backend, read from one JSON file:
/// {"providers": [...], "embedding": {...}, "semantic_mode": "sentence"}.
struct ProviderFile {
  std::vector<ProviderConfig> providers;
  EmbeddingConfig embedding;
  SemanticMode semantic_mode = SemanticMode::Sentence;
};

ProviderFile load_provider_file(const std::filesystem::path& path);

/// `mock:*` shorthands, otherwise a provider named in `file`.
ProviderConfig select_provider(std::string_view name, const std::optional<ProviderFile>& file);

struct RunConfig {
  std::filesystem::path corpus;
  std::optional<std::filesystem::path> provider_file;
  std::string provider;
  std::vector<std::string> versions;  ///< empty = every version
  std::vector<int> tutorials;         ///< empty = every tutorial
  std::vector<SessionMode> modes{SessionMode::WithHistory};
  std::optional<std::filesystem::path> classifier;  ///< calibration file; published thresholds otherwise
  bool use_cache = true;
  std::filesystem::path out = "tutorqa-out";
  std::uint64_t seed = 42;
  GatePolicy gate = GatePolicy::FailOnly;
};

/// Throws ValidationError unless referenced files exist and something is selected.
void validate(const RunConfig& config, const CorpusManifest& corpus);

/// sha256 over the settings that influence results (not the output dir).
std::string config_hash(const RunConfig& config);

Classifier load_classifier(const std::optional<std::filesystem::path>& path);

/// One ScoreRecord per question of every answered frame. Frames whose
/// reply could not be parsed score zero and carry parse_failed.
std::vector<ScoreRecord> score_transcript(const CorpusManifest& corpus, const Transcript& transcript,
                                          EmbeddingProvider& embedder, SemanticMode mode);

/// `<dir>/<provider>__<version>__t<tutorial>__<mode>.json`
std::filesystem::path transcript_path(const std::filesystem::path& dir, const Transcript& t);
void save_transcript(const Transcript& t, const std::filesystem::path& dir);
std::vector<Transcript> load_transcripts(const std::filesystem::path& dir);

/// Groups transcripts by (provider, version, mode) and runs each suite.
std::vector<SuiteResult> run_suites(const CorpusManifest& corpus, std::span<const Transcript> transcripts,
                                    std::span<const ScoreRecord> scores, const Classifier& classifier);

struct RunResult {
  std::vector<Transcript> transcripts;
  std::vector<ScoreRecord> scores;
  Report report;
  bool gate_passed = false;
};

/// Gateway, metrics and verdicts end to end. Writes transcripts/, cache/,
/// scores.tsv, report.json and report.md under config.out.
RunResult execute_run(const RunConfig& config, const CorpusManifest& corpus, ChatProvider& provider,
                      EmbeddingProvider& embedder, SemanticMode semantic_mode);

}  // namespace tutorqa
