#pragma once

#include <string_view>

#include "tutorqa/corpus.hpp"
#include "tutorqa/gateway.hpp"
#include "tutorqa/provider.hpp"
#include "tutorqa/transcript_store.hpp"

namespace tutorqa {

struct SessionOptions {
  bool use_cache = true;  ///< false re-queries and overwrites cached answers
  int parallelism = 1;    ///< concurrent requests in WithoutHistory mode
};

/// Asks the provider about every frame of (version, tutorial) in ordinal
/// order and persists each answer to `store`.
///
/// WithHistory feeds each prompt the whole prior conversation, including the
/// model's own answers, and stops at the first provider error (the session
/// is marked aborted and the partial transcript returned). WithoutHistory
/// frames are independent; a failing frame is recorded and the run goes on.
/// Provider errors are never cached; parse mismatches are, since they are
/// the model's actual output.
Transcript run_tutorial(const CorpusManifest& manifest, std::string_view version, int tutorial,
                        SessionMode mode, ChatProvider& provider, TranscriptStore& store,
                        const SessionOptions& options = {});

}  // namespace tutorqa
