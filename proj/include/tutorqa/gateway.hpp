#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tutorqa/corpus.hpp"

namespace tutorqa {

enum class SessionMode { WithHistory, WithoutHistory };

/// "history" / "no-history"; the CLI and file names use these spellings.
std::string_view to_string(SessionMode mode) noexcept;
SessionMode parse_session_mode(std::string_view text);

enum class Role { System, User, Assistant };

std::string_view to_string(Role role) noexcept;
Role parse_role(std::string_view text);

/// A role-tagged chat message. Only user turns carry an image, at most one.
struct ChatTurn {
  Role role = Role::User;
  std::string text;
  std::optional<std::filesystem::path> image;

  friend bool operator==(const ChatTurn&, const ChatTurn&) = default;
};

inline constexpr std::string_view kSystemPrompt =
    "You are a gamer. You are playing a game tutorial. I will provide you some screenshots "
    "of the tutorial. Answer the questions related to the screenshot. Be concise and direct.";

/// "1. first\n2. second" in manifest order.
std::string format_numbered(std::span<const std::string> items);

/// WithoutHistory: [system, user]. WithHistory: the system turn only when
/// `history` is empty, otherwise `history` followed by the new user turn.
std::vector<ChatTurn> build_prompt(const CorpusManifest& manifest, const FrameCase& frame,
                                   SessionMode mode, std::span<const ChatTurn> history = {});

/// Splits a numbered reply into exactly `n` answers. Accepts "1.", "1)" and
/// bold-wrapped markers ("**1.**") at line starts; continuation lines are kept
/// with their answer. With n == 1 and no marker the whole text is the answer.
/// Throws ParseMismatchError unless the markers are exactly 1..n in order.
std::vector<std::string> parse_numbered_answers(std::string_view raw, int n);

}  // namespace tutorqa
