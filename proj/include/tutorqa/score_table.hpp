#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tutorqa/text_metrics.hpp"

namespace tutorqa {

/// Tab-separated score table, one row per question x model x version x mode.
/// Tabs, newlines and backslashes inside fields are backslash-escaped.
std::string format_score_table(const std::vector<ScoreRecord>& scores);
std::vector<ScoreRecord> parse_score_table(const std::string& text);

void save_score_table(const std::vector<ScoreRecord>& scores, const std::filesystem::path& path);
std::vector<ScoreRecord> load_score_table(const std::filesystem::path& path);

}  // namespace tutorqa
