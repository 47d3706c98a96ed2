#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tutorqa/gateway.hpp"

namespace tutorqa {

struct AnswerRecord {
  std::string question_id;
  std::string actual_answer;  ///< empty only when parsing failed

  friend bool operator==(const AnswerRecord&, const AnswerRecord&) = default;
};

enum class EntryStatus { Ok, ParseFailed, Error };

std::string_view to_string(EntryStatus status) noexcept;
EntryStatus parse_entry_status(std::string_view text);

/// One answered frame.
struct TranscriptEntry {
  std::string frame_id;
  int ordinal = 0;
  std::string prompt_hash;
  std::string cache_key;
  std::string raw_answer;
  std::vector<AnswerRecord> answers;
  EntryStatus status = EntryStatus::Ok;
  std::string error;  ///< parse mismatch or provider error message
  std::string timestamp;
  bool cache_hit = false;
};

/// Outcome of one (provider, version, tutorial, mode) session.
struct Transcript {
  std::string provider;
  std::string model;
  std::string version;
  int tutorial = 0;
  SessionMode mode = SessionMode::WithoutHistory;
  std::vector<TranscriptEntry> entries;  ///< ordered by frame ordinal
  bool aborted = false;                  ///< WithHistory session stopped on an error
};

nlohmann::json to_json(const Transcript& t);
Transcript transcript_from_json(const nlohmann::json& doc);

/// Hash of the prompt content: roles, texts and the bytes of every image.
std::string prompt_hash(std::span<const ChatTurn> turns);

struct CacheKeyParts {
  std::string provider;
  std::string model;
  SessionMode mode = SessionMode::WithoutHistory;
  std::string version;
  int tutorial = 0;
  std::string frame_id;
  std::string prompt_hash;
};

/// Pure function of its parts.
std::string cache_key(const CacheKeyParts& parts);

/// A persisted provider answer, one JSON object per line.
struct StoreRecord {
  std::string key;
  CacheKeyParts parts;
  std::string timestamp;
  std::string raw_answer;
  std::vector<AnswerRecord> answers;
  EntryStatus status = EntryStatus::Ok;
  std::string parse_error;
};

nlohmann::json to_json(const StoreRecord& r);
StoreRecord store_record_from_json(const nlohmann::json& doc);

/// Append-only answer cache: one file per (provider, version, mode) under
/// `dir`. Writes are serialized; one writer process per file.
class TranscriptStore {
 public:
  explicit TranscriptStore(std::filesystem::path dir);

  std::optional<StoreRecord> lookup(const CacheKeyParts& parts);
  void append(const StoreRecord& record);

  std::filesystem::path file_for(const std::string& provider, const std::string& version,
                                 SessionMode mode) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::map<std::string, StoreRecord>& load(const std::filesystem::path& file);

  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<std::string, std::map<std::string, StoreRecord>> files_;
};

}  // namespace tutorqa
