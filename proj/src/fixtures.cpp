#include "tutorqa/fixtures.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

#include "tutorqa/util.hpp"

namespace tutorqa {

namespace {

struct Tsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ParseError(fmt::format("missing column '{}'", name));
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string field;
  while (std::getline(in, field, '\t')) out.push_back(field);
  return out;
}

Tsv read_tsv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  Tsv t;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw ParseError(fmt::format("{}: row has {} fields, header has {}", path.string(), fields.size(),
                                   t.header.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) throw ParseError(fmt::format("{}: empty table", path.string()));
  return t;
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError(fmt::format("bad number '{}'", s));
  return v;
}

Eigen::Vector4d read_metrics(const Tsv& t, const std::vector<std::string>& row) {
  Eigen::Vector4d v;
  for (Metric m : kMetrics) v[static_cast<Eigen::Index>(m)] = to_double(row[t.column(to_string(m))]);
  return v;
}

}  // namespace

std::filesystem::path fixture_dir() {
  if (const char* env = std::getenv("TUTORQA_DATA_DIR"); env && *env) {
    return std::filesystem::path(env) / "fixtures";
  }
  return std::filesystem::path(TUTORQA_DATA_DIR) / "fixtures";
}

MetricTable load_metric_table(const std::filesystem::path& path) {
  const auto t = read_tsv(path);
  MetricTable table;
  for (const auto& row : t.rows) {
    MetricRow r;
    r.model = row[t.column("model")];
    r.mode = parse_session_mode(row[t.column("mode")]);
    r.version = row[t.column("version")];
    r.means = read_metrics(t, row);
    table.rows.push_back(std::move(r));
  }
  return table;
}

TutorialSummary load_tutorial_table(const std::filesystem::path& path) {
  const auto t = read_tsv(path);
  std::vector<TutorialRow> rows;
  for (const auto& row : t.rows) {
    TutorialRow r;
    r.tutorial = static_cast<int>(to_double(row[t.column("tutorial")]));
    r.means = read_metrics(t, row);
    rows.push_back(r);
  }
  return rank_tutorials(std::move(rows));
}

MetricTable version_means_fixture() { return load_metric_table(fixture_dir() / "version_means.tsv"); }
TutorialSummary tutorial_means_fixture() { return load_tutorial_table(fixture_dir() / "tutorial_means.tsv"); }

}  // namespace tutorqa
