#include "tutorqa/score_table.hpp"

#include <array>
#include <charconv>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "tutorqa/error.hpp"
#include "tutorqa/util.hpp"

namespace tutorqa {

namespace {

constexpr std::array<std::string_view, 22> kColumns = {
    "provider",   "model",      "version",  "mode",        "tutorial",  "frame_id",
    "question_id", "r1_overlap", "r1_cand",  "r1_ref",      "r2_overlap", "r2_cand",
    "r2_ref",     "rl_lcs",     "rl_cand",  "rl_ref",      "sem_p",     "sem_r",
    "sem_f1",     "sem_mode",   "degenerate", "parse_failed"};

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out.push_back(s[i]);
      continue;
    }
    switch (s[++i]) {
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      default: out.push_back(s[i]);
    }
  }
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, std::size_t line) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError(fmt::format("score table line {}: bad number '{}'", line, s));
  }
  return value;
}

}  // namespace

std::string format_score_table(const std::vector<ScoreRecord>& scores) {
  std::string out = fmt::format("{}\n", fmt::join(kColumns, "\t"));
  for (const auto& s : scores) {
    out += fmt::format(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.17g}\t{:.17g}\t{:.17g}\t{}\t{}\t{}\n",
        escape(s.provider), escape(s.model), escape(s.version), to_string(s.mode), s.tutorial,
        escape(s.frame_id), escape(s.question_id), s.rouge1.overlap, s.rouge1.candidate_total,
        s.rouge1.reference_total, s.rouge2.overlap, s.rouge2.candidate_total,
        s.rouge2.reference_total, s.rougeL.overlap, s.rougeL.candidate_total,
        s.rougeL.reference_total, s.semantic.precision, s.semantic.recall, s.semantic.f1,
        to_string(s.semantic.mode), s.semantic.degenerate ? 1 : 0, s.parse_failed ? 1 : 0);
  }
  return out;
}

std::vector<ScoreRecord> parse_score_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("score table is empty");
  const auto header = split_tabs(line);
  if (header.size() != kColumns.size() || !std::equal(header.begin(), header.end(), kColumns.begin())) {
    throw ParseError("score table header does not match the expected columns");
  }
  std::vector<ScoreRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != kColumns.size()) {
      throw ParseError(fmt::format("score table line {}: {} fields, expected {}", lineno, f.size(),
                                   kColumns.size()));
    }
    ScoreRecord s;
    s.provider = unescape(f[0]);
    s.model = unescape(f[1]);
    s.version = unescape(f[2]);
    s.mode = parse_session_mode(f[3]);
    s.tutorial = parse_number<int>(f[4], lineno);
    s.frame_id = unescape(f[5]);
    s.question_id = unescape(f[6]);
    auto counts = [&](std::size_t i) {
      return RougeScore::from_counts(parse_number<std::size_t>(f[i], lineno),
                                     parse_number<std::size_t>(f[i + 1], lineno),
                                     parse_number<std::size_t>(f[i + 2], lineno));
    };
    s.rouge1 = counts(7);
    s.rouge2 = counts(10);
    s.rougeL = counts(13);
    s.semantic.precision = parse_number<double>(f[16], lineno);
    s.semantic.recall = parse_number<double>(f[17], lineno);
    s.semantic.f1 = parse_number<double>(f[18], lineno);
    s.semantic.mode = parse_semantic_mode(f[19]);
    s.semantic.degenerate = f[20] == "1";
    s.parse_failed = f[21] == "1";
    out.push_back(std::move(s));
  }
  return out;
}

void save_score_table(const std::vector<ScoreRecord>& scores, const std::filesystem::path& path) {
  write_file_atomic(path, format_score_table(scores));
}

std::vector<ScoreRecord> load_score_table(const std::filesystem::path& path) {
  return parse_score_table(read_file(path));
}

}  // namespace tutorqa
