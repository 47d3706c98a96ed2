#include "tutorqa/gateway.hpp"

#include <regex>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "tutorqa/error.hpp"

namespace tutorqa {

std::string_view to_string(SessionMode mode) noexcept {
  return mode == SessionMode::WithHistory ? "history" : "no-history";
}

SessionMode parse_session_mode(std::string_view text) {
  if (text == "history" || text == "with-history") return SessionMode::WithHistory;
  if (text == "no-history" || text == "without-history") return SessionMode::WithoutHistory;
  throw ValidationError(fmt::format("unknown session mode '{}'", text));
}

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view text) {
  if (text == "system") return Role::System;
  if (text == "user") return Role::User;
  if (text == "assistant") return Role::Assistant;
  throw ParseError(fmt::format("unknown chat role '{}'", text));
}

std::string format_numbered(std::span<const std::string> items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '\n';
    out += fmt::format("{}. {}", i + 1, items[i]);
  }
  return out;
}

std::vector<ChatTurn> build_prompt(const CorpusManifest& manifest, const FrameCase& frame,
                                   SessionMode mode, std::span<const ChatTurn> history) {
  std::vector<std::string> questions;
  questions.reserve(frame.qa_pairs.size());
  for (const auto& q : frame.qa_pairs) questions.push_back(q.question);

  ChatTurn user{Role::User, format_numbered(questions), manifest.resolve_image(frame)};

  std::vector<ChatTurn> turns;
  if (mode == SessionMode::WithHistory && !history.empty()) {
    turns.assign(history.begin(), history.end());
  } else {
    turns.push_back({Role::System, std::string(kSystemPrompt), std::nullopt});
  }
  turns.push_back(std::move(user));
  return turns;
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

std::vector<std::string> parse_numbered_answers(std::string_view raw, int n) {
  if (n < 1) throw ValidationError("parse_numbered_answers: n must be >= 1");

  static const std::regex kMarker(R"(^\s*(?:\*\*)?(\d+)\s*[.)](?:\*\*)?(?:\s+|$)(.*)$)");

  std::vector<int> markers;
  std::vector<std::string> segments;
  std::istringstream lines{std::string(raw)};
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (std::regex_match(line, m, kMarker)) {
      markers.push_back(std::stoi(m[1].str()));
      segments.push_back(m[2].str());
    } else if (!segments.empty()) {
      segments.back() += '\n';
      segments.back() += line;
    }
    // Preamble before the first marker is dropped.
  }

  if (markers.empty() && n == 1) return {trim(raw)};

  bool ok = static_cast<int>(markers.size()) == n;
  for (int i = 0; ok && i < n; ++i) ok = markers[static_cast<std::size_t>(i)] == i + 1;
  if (!ok) {
    throw ParseMismatchError(fmt::format("found markers {{{}}}, expected 1..{}",
                                         fmt::join(markers, ","), n));
  }
  for (auto& s : segments) s = trim(s);
  return segments;
}

}  // namespace tutorqa
