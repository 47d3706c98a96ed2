#include "tutorqa/session.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "tutorqa/error.hpp"
#include "tutorqa/util.hpp"

namespace tutorqa {

namespace {

class FrameRunner {
 public:
  FrameRunner(std::string_view version, int tutorial, SessionMode mode, ChatProvider& provider,
              TranscriptStore& store, const SessionOptions& options)
      : version_(version), tutorial_(tutorial), mode_(mode), provider_(provider), store_(store),
        options_(options) {}

  TranscriptEntry run(const FrameCase& frame, std::span<const ChatTurn> turns) const {
    TranscriptEntry entry;
    entry.frame_id = frame.frame_id;
    entry.ordinal = frame.ordinal;

    CacheKeyParts parts;
    try {
      parts = {provider_.config().name, provider_.config().model, mode_, std::string(version_),
               tutorial_, frame.frame_id, prompt_hash(turns)};
    } catch (const Error& e) {
      entry.status = EntryStatus::Error;
      entry.error = e.what();
      return entry;
    }
    entry.prompt_hash = parts.prompt_hash;
    entry.cache_key = cache_key(parts);

    if (options_.use_cache) {
      if (auto hit = store_.lookup(parts)) {
        entry.raw_answer = hit->raw_answer;
        entry.answers = hit->answers;
        entry.status = hit->status;
        entry.error = hit->parse_error;
        entry.timestamp = hit->timestamp;
        entry.cache_hit = true;
        return entry;
      }
    }

    try {
      entry.raw_answer = provider_.ask(turns, AskContext{&frame});
    } catch (const Error& e) {
      entry.status = EntryStatus::Error;
      entry.error = e.what();
      return entry;
    }

    const int n = static_cast<int>(frame.qa_pairs.size());
    std::vector<std::string> texts;
    try {
      texts = parse_numbered_answers(entry.raw_answer, n);
    } catch (const ParseMismatchError& e) {
      texts.assign(static_cast<std::size_t>(n), std::string{});
      entry.status = EntryStatus::ParseFailed;
      entry.error = e.what();
    }
    for (int i = 0; i < n; ++i) {
      entry.answers.push_back({frame.qa_pairs[static_cast<std::size_t>(i)].question_id,
                               texts[static_cast<std::size_t>(i)]});
    }
    entry.timestamp = utc_timestamp();

    store_.append({entry.cache_key, parts, entry.timestamp, entry.raw_answer, entry.answers,
                   entry.status, entry.error});
    return entry;
  }

 private:
  std::string_view version_;
  int tutorial_;
  SessionMode mode_;
  ChatProvider& provider_;
  TranscriptStore& store_;
  const SessionOptions& options_;
};

}  // namespace

Transcript run_tutorial(const CorpusManifest& manifest, std::string_view version, int tutorial,
                        SessionMode mode, ChatProvider& provider, TranscriptStore& store,
                        const SessionOptions& options) {
  if (!manifest.has_version(version)) {
    throw ValidationError(fmt::format("unknown version {}", version));
  }
  const auto frames = manifest.tutorial_frames(version, tutorial);
  if (frames.empty()) {
    throw ValidationError(fmt::format("version {} has no frames for tutorial {}", version, tutorial));
  }

  Transcript transcript;
  transcript.provider = provider.config().name;
  transcript.model = provider.config().model;
  transcript.version = std::string(version);
  transcript.tutorial = tutorial;
  transcript.mode = mode;

  const FrameRunner runner(version, tutorial, mode, provider, store, options);

  if (mode == SessionMode::WithHistory) {
    std::vector<ChatTurn> history;
    for (const FrameCase* frame : frames) {
      auto turns = build_prompt(manifest, *frame, mode, history);
      auto entry = runner.run(*frame, turns);
      const bool failed = entry.status == EntryStatus::Error;
      if (!failed) turns.push_back({Role::Assistant, entry.raw_answer, std::nullopt});
      transcript.entries.push_back(std::move(entry));
      if (failed) {
        transcript.aborted = true;
        break;
      }
      history = std::move(turns);
    }
    return transcript;
  }

  std::vector<TranscriptEntry> entries(frames.size());
  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    try {
      for (std::size_t i = next++; i < frames.size(); i = next++) {
        const auto turns = build_prompt(manifest, *frames[i], mode);
        entries[i] = runner.run(*frames[i], turns);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = frames.size();
    }
  };
  const auto workers = std::clamp<std::size_t>(static_cast<std::size_t>(options.parallelism), 1,
                                               frames.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  transcript.entries = std::move(entries);
  return transcript;
}

}  // namespace tutorqa
