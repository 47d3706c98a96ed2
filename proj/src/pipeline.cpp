#include "tutorqa/pipeline.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "tutorqa/score_table.hpp"
#include "tutorqa/session.hpp"
#include "tutorqa/util.hpp"

namespace tutorqa {

using nlohmann::json;

ProviderFile load_provider_file(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
  if (!doc.is_object()) throw ParseError(fmt::format("{}: expected an object", path.string()));
  ProviderFile out;
  const auto base = path.parent_path();
  for (const auto& entry : doc.value("providers", json::array())) {
    out.providers.push_back(parse_provider_config(entry, base));
  }
  if (doc.contains("embedding")) out.embedding = parse_embedding_config(doc["embedding"]);
  if (doc.contains("semantic_mode")) out.semantic_mode = parse_semantic_mode(doc["semantic_mode"].get<std::string>());
  return out;
}

ProviderConfig select_provider(std::string_view name, const std::optional<ProviderFile>& file) {
  if (name.starts_with("mock:")) return builtin_provider(name);
  if (!file) throw ValidationError(fmt::format("provider '{}' needs a provider config file (--config)", name));
  if (name.empty() && file->providers.size() == 1) return file->providers.front();
  for (const auto& p : file->providers) {
    if (p.name == name) return p;
  }
  std::vector<std::string> names;
  for (const auto& p : file->providers) names.push_back(p.name);
  throw ValidationError(fmt::format("no provider named '{}' (have: {})", name, fmt::join(names, ", ")));
}

void validate(const RunConfig& config, const CorpusManifest& corpus) {
  if (config.provider_file && !std::filesystem::exists(*config.provider_file)) {
    throw ValidationError(fmt::format("provider config not found: {}", config.provider_file->string()));
  }
  if (config.classifier && !std::filesystem::exists(*config.classifier)) {
    throw ValidationError(fmt::format("classifier file not found: {}", config.classifier->string()));
  }
  if (config.modes.empty()) throw ValidationError("no session mode selected");
  for (const auto& v : config.versions) {
    if (!corpus.has_version(v)) throw ValidationError(fmt::format("unknown version {}", v));
  }
  const auto versions = config.versions.empty() ? [&] {
    std::vector<std::string> all;
    for (const auto& v : corpus.versions) all.push_back(v.id);
    return all;
  }() : config.versions;
  std::size_t selected = 0;
  for (const auto& v : versions) {
    for (int t : corpus.tutorials(v)) {
      if (config.tutorials.empty() || std::count(config.tutorials.begin(), config.tutorials.end(), t)) ++selected;
    }
  }
  if (selected == 0) throw ValidationError("the selection matches no (version, tutorial) in the corpus");
}

std::string config_hash(const RunConfig& config) {
  json modes = json::array();
  for (auto m : config.modes) modes.push_back(to_string(m));
  const json doc{{"corpus", config.corpus.generic_string()},
                 {"provider_file", config.provider_file ? config.provider_file->generic_string() : ""},
                 {"provider", config.provider},
                 {"versions", config.versions},
                 {"tutorials", config.tutorials},
                 {"modes", modes},
                 {"classifier", config.classifier ? config.classifier->generic_string() : "published"},
                 {"seed", config.seed},
                 {"gate", config.gate == GatePolicy::FailOnly ? "fail" : "fail-or-revision"}};
  return sha256_hex(doc.dump());
}

Classifier load_classifier(const std::optional<std::filesystem::path>& path) {
  if (!path) return ThresholdClassifier{};
  return make_classifier(load_calibration(*path));
}

std::vector<ScoreRecord> score_transcript(const CorpusManifest& corpus, const Transcript& transcript,
                                          EmbeddingProvider& embedder, SemanticMode mode) {
  std::vector<ScoreRecord> out;
  for (const auto& entry : transcript.entries) {
    if (entry.status == EntryStatus::Error) continue;
    const FrameCase* frame = corpus.find_frame(entry.frame_id);
    if (!frame) {
      throw DataError(fmt::format("transcript frame {} is not in the corpus", entry.frame_id));
    }
    for (const auto& qa : frame->qa_pairs) {
      std::string actual;
      for (const auto& a : entry.answers) {
        if (a.question_id == qa.question_id) actual = a.actual_answer;
      }
      auto s = score_question(qa.expected_answer, actual, embedder, mode);
      s.provider = transcript.provider;
      s.model = transcript.model;
      s.version = transcript.version;
      s.mode = transcript.mode;
      s.tutorial = frame->tutorial;
      s.frame_id = frame->frame_id;
      s.question_id = qa.question_id;
      s.parse_failed = entry.status == EntryStatus::ParseFailed;
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

std::string file_safe(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool keep = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '-' ||
                      c == '.' || c == '_';
    out.push_back(keep ? c : '_');
  }
  return out;
}

}  // namespace

std::filesystem::path transcript_path(const std::filesystem::path& dir, const Transcript& t) {
  return dir / fmt::format("{}__{}__t{}__{}.json", file_safe(t.provider), file_safe(t.version), t.tutorial,
                           to_string(t.mode));
}

void save_transcript(const Transcript& t, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(transcript_path(dir, t), to_json(t).dump(2) + "\n");
}

std::vector<Transcript> load_transcripts(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError(fmt::format("transcript directory not found: {}", dir.string()));
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Transcript> out;
  for (const auto& f : files) {
    try {
      out.push_back(transcript_from_json(json::parse(read_file(f))));
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("{}: {}", f.string(), e.what()));
    }
  }
  if (out.empty()) throw ValidationError(fmt::format("no transcripts in {}", dir.string()));
  return out;
}

std::vector<SuiteResult> run_suites(const CorpusManifest& corpus, std::span<const Transcript> transcripts,
                                    std::span<const ScoreRecord> scores, const Classifier& classifier) {
  std::map<std::tuple<std::string, std::string, SessionMode>, std::vector<Transcript>> groups;
  for (const auto& t : transcripts) groups[{t.provider, t.version, t.mode}].push_back(t);
  std::vector<SuiteResult> out;
  for (const auto& [key, group] : groups) out.push_back(run_suite(corpus, group, scores, classifier));
  return out;
}

RunResult execute_run(const RunConfig& config, const CorpusManifest& corpus, ChatProvider& provider,
                      EmbeddingProvider& embedder, SemanticMode semantic_mode) {
  validate(config, corpus);
  const auto classifier = load_classifier(config.classifier);

  std::vector<std::string> versions = config.versions;
  if (versions.empty()) {
    for (const auto& v : corpus.versions) versions.push_back(v.id);
  }

  TranscriptStore store(config.out / "cache");
  SessionOptions options;
  options.use_cache = config.use_cache;
  options.parallelism = provider.config().parallelism;

  RunResult result;
  for (const auto& version : versions) {
    for (int tutorial : corpus.tutorials(version)) {
      if (!config.tutorials.empty() &&
          !std::count(config.tutorials.begin(), config.tutorials.end(), tutorial)) {
        continue;
      }
      for (SessionMode mode : config.modes) {
        auto t = run_tutorial(corpus, version, tutorial, mode, provider, store, options);
        save_transcript(t, config.out / "transcripts");
        auto scores = score_transcript(corpus, t, embedder, semantic_mode);
        result.scores.insert(result.scores.end(), scores.begin(), scores.end());
        result.transcripts.push_back(std::move(t));
      }
    }
  }
  save_score_table(result.scores, config.out / "scores.tsv");

  Report& report = result.report;
  report.meta.command = "run";
  report.meta.generated_at = utc_timestamp();
  report.meta.config_hash = config_hash(config);
  report.meta.classifier = describe(classifier);
  report.meta.source = config.corpus.generic_string();
  report.gate = config.gate;
  report.suites = run_suites(corpus, result.transcripts, result.scores, classifier);
  result.gate_passed = gate_passes(report.suites, config.gate);
  write_report(report, config.out);
  return result;
}

}  // namespace tutorqa
