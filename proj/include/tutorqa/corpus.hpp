#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace tutorqa {

struct GameVersion {
  std::string id;
  std::string description;
};

struct QAPair {
  std::string question_id;
  std::string question;
  std::string expected_answer;
};

/// One annotated tutorial screenshot. `image_path` is relative to the
/// manifest's directory.
struct FrameCase {
  std::string frame_id;
  int tutorial = 0;
  std::string version;
  std::string image_path;
  int ordinal = 0;
  std::vector<QAPair> qa_pairs;
};

/// The annotated corpus. Immutable once loaded; safe to share across readers.
struct CorpusManifest {
  std::vector<GameVersion> versions;
  std::vector<FrameCase> frames;
  std::map<std::string, std::string> metadata;
  /// Directory image paths are resolved against; not serialized.
  std::filesystem::path base_dir;

  bool has_version(std::string_view id) const;
  std::filesystem::path resolve_image(const FrameCase& frame) const;

  /// Frames of (version, tutorial) sorted by ordinal.
  std::vector<const FrameCase*> tutorial_frames(std::string_view version, int tutorial) const;
  /// Distinct tutorial ids present for a version, ascending.
  std::vector<int> tutorials(std::string_view version) const;
  const FrameCase* find_frame(std::string_view frame_id) const;
  std::size_t question_count(std::string_view version) const;
};

struct Diagnostic {
  std::string frame_id;
  std::string question_id;
  std::string message;
};

std::string to_string(const Diagnostic& d);

/// Parses manifest JSON without validating it. Throws ParseError on
/// structural problems (missing keys, wrong types).
CorpusManifest parse_manifest(const nlohmann::json& doc, std::filesystem::path base_dir = {});
nlohmann::json to_json(const CorpusManifest& manifest);

/// Loads and validates. Throws ParseError for malformed files and
/// ValidationError naming the first violated invariant.
CorpusManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);

/// One diagnostic per violated invariant; empty iff the manifest is valid.
std::vector<Diagnostic> validate_corpus(const CorpusManifest& manifest);

struct CommonQuestion {
  std::string question_id;
  QAPair in_a;
  QAPair in_b;
};

/// Question ids present in both versions, ordered by version a's
/// (tutorial, ordinal, question_id). Throws ValidationError on unknown ids.
std::vector<CommonQuestion> common_questions(const CorpusManifest& manifest,
                                             std::string_view a, std::string_view b);

}  // namespace tutorqa
