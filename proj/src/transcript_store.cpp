#include "tutorqa/transcript_store.hpp"

#include <cctype>
#include <fstream>

#include <fmt/format.h>

#include "tutorqa/error.hpp"
#include "tutorqa/util.hpp"

namespace tutorqa {

using nlohmann::json;

std::string_view to_string(EntryStatus status) noexcept {
  switch (status) {
    case EntryStatus::Ok: return "ok";
    case EntryStatus::ParseFailed: return "parse-failed";
    case EntryStatus::Error: return "error";
  }
  return "error";
}

EntryStatus parse_entry_status(std::string_view text) {
  if (text == "ok") return EntryStatus::Ok;
  if (text == "parse-failed") return EntryStatus::ParseFailed;
  if (text == "error") return EntryStatus::Error;
  throw ParseError(fmt::format("unknown entry status '{}'", text));
}

namespace {

json answers_to_json(const std::vector<AnswerRecord>& answers) {
  json out = json::array();
  for (const auto& a : answers) out.push_back({{"question_id", a.question_id}, {"answer", a.actual_answer}});
  return out;
}

std::vector<AnswerRecord> answers_from_json(const json& arr) {
  std::vector<AnswerRecord> out;
  for (const auto& a : arr) {
    out.push_back({a.at("question_id").get<std::string>(), a.at("answer").get<std::string>()});
  }
  return out;
}

/// Keeps file names portable.
std::string sanitize(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out;
}

}  // namespace

json to_json(const Transcript& t) {
  json entries = json::array();
  for (const auto& e : t.entries) {
    entries.push_back({{"frame_id", e.frame_id},
                       {"ordinal", e.ordinal},
                       {"prompt_hash", e.prompt_hash},
                       {"cache_key", e.cache_key},
                       {"raw_answer", e.raw_answer},
                       {"answers", answers_to_json(e.answers)},
                       {"status", to_string(e.status)},
                       {"error", e.error},
                       {"timestamp", e.timestamp}});
  }
  return {{"provider", t.provider}, {"model", t.model},         {"version", t.version},
          {"tutorial", t.tutorial}, {"mode", to_string(t.mode)}, {"aborted", t.aborted},
          {"entries", entries}};
}

Transcript transcript_from_json(const json& doc) {
  try {
    Transcript t;
    t.provider = doc.at("provider").get<std::string>();
    t.model = doc.at("model").get<std::string>();
    t.version = doc.at("version").get<std::string>();
    t.tutorial = doc.at("tutorial").get<int>();
    t.mode = parse_session_mode(doc.at("mode").get<std::string>());
    t.aborted = doc.value("aborted", false);
    for (const auto& e : doc.at("entries")) {
      TranscriptEntry entry;
      entry.frame_id = e.at("frame_id").get<std::string>();
      entry.ordinal = e.value("ordinal", 0);
      entry.prompt_hash = e.value("prompt_hash", std::string{});
      entry.cache_key = e.value("cache_key", std::string{});
      entry.raw_answer = e.value("raw_answer", std::string{});
      entry.answers = answers_from_json(e.at("answers"));
      entry.status = parse_entry_status(e.at("status").get<std::string>());
      entry.error = e.value("error", std::string{});
      entry.timestamp = e.value("timestamp", std::string{});
      t.entries.push_back(std::move(entry));
    }
    return t;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("transcript: {}", e.what()));
  }
}

std::string prompt_hash(std::span<const ChatTurn> turns) {
  json doc = json::array();
  for (const auto& t : turns) {
    doc.push_back({{"role", to_string(t.role)},
                   {"text", t.text},
                   {"image", t.image ? sha256_file_hex(*t.image) : std::string{}}});
  }
  return sha256_hex(doc.dump());
}

std::string cache_key(const CacheKeyParts& p) {
  const json doc = json::array({p.provider, p.model, to_string(p.mode), p.version, p.tutorial,
                                p.frame_id, p.prompt_hash});
  return sha256_hex(doc.dump());
}

json to_json(const StoreRecord& r) {
  return {{"key", r.key},
          {"provider", r.parts.provider},
          {"model", r.parts.model},
          {"mode", to_string(r.parts.mode)},
          {"version", r.parts.version},
          {"tutorial", r.parts.tutorial},
          {"frame_id", r.parts.frame_id},
          {"prompt_hash", r.parts.prompt_hash},
          {"timestamp", r.timestamp},
          {"raw_answer", r.raw_answer},
          {"answers", answers_to_json(r.answers)},
          {"parse_status", to_string(r.status)},
          {"parse_error", r.parse_error}};
}

StoreRecord store_record_from_json(const json& doc) {
  try {
    StoreRecord r;
    r.key = doc.at("key").get<std::string>();
    r.parts.provider = doc.at("provider").get<std::string>();
    r.parts.model = doc.at("model").get<std::string>();
    r.parts.mode = parse_session_mode(doc.at("mode").get<std::string>());
    r.parts.version = doc.at("version").get<std::string>();
    r.parts.tutorial = doc.at("tutorial").get<int>();
    r.parts.frame_id = doc.at("frame_id").get<std::string>();
    r.parts.prompt_hash = doc.at("prompt_hash").get<std::string>();
    r.timestamp = doc.value("timestamp", std::string{});
    r.raw_answer = doc.at("raw_answer").get<std::string>();
    r.answers = answers_from_json(doc.at("answers"));
    r.status = parse_entry_status(doc.at("parse_status").get<std::string>());
    r.parse_error = doc.value("parse_error", std::string{});
    return r;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("transcript store record: {}", e.what()));
  }
}

TranscriptStore::TranscriptStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path TranscriptStore::file_for(const std::string& provider,
                                                const std::string& version,
                                                SessionMode mode) const {
  return dir_ / fmt::format("{}__{}__{}.jsonl", sanitize(provider), sanitize(version), to_string(mode));
}

std::map<std::string, StoreRecord>& TranscriptStore::load(const std::filesystem::path& file) {
  auto [it, inserted] = files_.try_emplace(file.string());
  if (!inserted) return it->second;
  std::ifstream in(file);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      // A torn final line from a crash is tolerated; anything else is corruption.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw ParseError(fmt::format("{}:{}: {}", file.string(), lineno, e.what()));
    }
    auto rec = store_record_from_json(doc);
    auto key = rec.key;
    it->second.insert_or_assign(std::move(key), std::move(rec));
  }
  return it->second;
}

std::optional<StoreRecord> TranscriptStore::lookup(const CacheKeyParts& parts) {
  std::lock_guard lock(mutex_);
  auto& records = load(file_for(parts.provider, parts.version, parts.mode));
  if (auto it = records.find(cache_key(parts)); it != records.end()) return it->second;
  return std::nullopt;
}

void TranscriptStore::append(const StoreRecord& record) {
  std::lock_guard lock(mutex_);
  const auto file = file_for(record.parts.provider, record.parts.version, record.parts.mode);
  auto& records = load(file);
  std::filesystem::create_directories(dir_);
  std::ofstream out(file, std::ios::app);
  if (!out) throw Error(fmt::format("cannot append to {}", file.string()));
  out << to_json(record).dump() << '\n';
  out.flush();
  records.insert_or_assign(record.key, record);
}

}  // namespace tutorqa
