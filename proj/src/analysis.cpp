#include "tutorqa/analysis.hpp"

#include <map>
#include <set>
#include <tuple>

#include <fmt/ranges.h>

namespace tutorqa {

std::string_view to_string(Metric m) noexcept {
  switch (m) {
    case Metric::Rouge1: return "rouge1";
    case Metric::Rouge2: return "rouge2";
    case Metric::RougeL: return "rougeL";
    case Metric::BertScore: return "bert_score";
  }
  return "rouge1";
}

Metric parse_metric(std::string_view text) {
  for (Metric m : kMetrics) {
    if (to_string(m) == text) return m;
  }
  throw ParseError(fmt::format("unknown metric '{}'", text));
}

double metric_value(const ScoreRecord& s, Metric m) noexcept {
  switch (m) {
    case Metric::Rouge1: return s.rouge1.f1;
    case Metric::Rouge2: return s.rouge2.f1;
    case Metric::RougeL: return s.rougeL.f1;
    case Metric::BertScore: return s.semantic.f1;
  }
  return 0.0;
}

Eigen::Vector4d metric_vector(const ScoreRecord& s) noexcept {
  return {s.rouge1.f1, s.rouge2.f1, s.rougeL.f1, s.semantic.f1};
}

double spearman(std::span<const double> x, std::span<const double> y) {
  using Map = Eigen::Map<const Eigen::VectorXd>;
  return spearman(Map(x.data(), static_cast<Eigen::Index>(x.size())),
                  Map(y.data(), static_cast<Eigen::Index>(y.size())));
}

const MetricRow* MetricTable::find(std::string_view model, std::string_view version,
                                   SessionMode mode) const {
  for (const auto& r : rows) {
    if (r.model == model && r.version == version && r.mode == mode) return &r;
  }
  return nullptr;
}

MetricTable metric_means(std::span<const ScoreRecord> scores) {
  std::map<std::tuple<std::string, std::string, SessionMode>, MetricRow> groups;
  for (const auto& s : scores) {
    auto& row = groups[{s.model, s.version, s.mode}];
    row.model = s.model;
    row.version = s.version;
    row.mode = s.mode;
    row.means += metric_vector(s);
    ++row.question_count;
  }
  MetricTable table;
  for (auto& [key, row] : groups) {
    row.means /= static_cast<double>(row.question_count);
    table.rows.push_back(std::move(row));
  }
  return table;
}

bool VersionComparison::all_improved() const noexcept {
  return std::all_of(extremes.begin(), extremes.end(), [](const auto& e) { return e.all_improved; });
}

const ModeExtremes* VersionComparison::for_mode(SessionMode mode) const noexcept {
  for (const auto& e : extremes) {
    if (e.mode == mode) return &e;
  }
  return nullptr;
}

namespace {

void add_cells(VersionComparison& out, const MetricRow& p, const MetricRow& l) {
  for (Metric m : kMetrics) {
    const auto i = static_cast<Eigen::Index>(m);
    ImprovementCell c;
    c.model = p.model;
    c.mode = p.mode;
    c.metric = m;
    c.value_p = p.means[i];
    c.value_l = l.means[i];
    c.delta = c.value_l - c.value_p;
    if (c.value_p == 0.0) {
      throw DataError(fmt::format("zero baseline for {} {} {}", p.model, to_string(p.mode), to_string(m)));
    }
    c.improvement_pct = c.delta / c.value_p * 100.0;
    c.question_count = std::min(p.question_count, l.question_count);
    out.cells.push_back(std::move(c));
  }
}

void fill_extremes(VersionComparison& out) {
  std::map<SessionMode, ModeExtremes> by_mode;
  for (const auto& c : out.cells) {
    auto [it, fresh] = by_mode.try_emplace(c.mode);
    auto& e = it->second;
    if (fresh) {
      e.mode = c.mode;
      e.min = e.max = c;
    } else {
      if (c.improvement_pct < e.min.improvement_pct) e.min = c;
      if (c.improvement_pct > e.max.improvement_pct) e.max = c;
    }
    if (!(c.value_l > c.value_p)) e.all_improved = false;
  }
  for (auto& [mode, e] : by_mode) out.extremes.push_back(std::move(e));
}

}  // namespace

VersionComparison compare_tables(const MetricTable& table, std::string_view version_p,
                                 std::string_view version_l) {
  VersionComparison out;
  out.version_p = version_p;
  out.version_l = version_l;
  std::vector<std::string> unpaired;
  for (const auto& p : table.rows) {
    if (p.version != version_p) continue;
    const MetricRow* l = table.find(p.model, version_l, p.mode);
    if (!l) {
      unpaired.push_back(fmt::format("{} ({})", p.model, to_string(p.mode)));
      continue;
    }
    add_cells(out, p, *l);
  }
  for (const auto& l : table.rows) {
    if (l.version == version_l && !table.find(l.model, version_p, l.mode)) {
      unpaired.push_back(fmt::format("{} ({})", l.model, to_string(l.mode)));
    }
  }
  if (!unpaired.empty()) {
    throw DataError(fmt::format("rows without a counterpart in the other version: {}", fmt::join(unpaired, ", ")));
  }
  if (out.cells.empty()) {
    throw DataError(fmt::format("no rows for versions {} and {}", version_p, version_l));
  }
  fill_extremes(out);
  return out;
}

VersionComparison compare_versions(std::span<const ScoreRecord> scores, const CorpusManifest& corpus,
                                   std::string_view version_p, std::string_view version_l,
                                   std::optional<SessionMode> mode) {
  std::set<std::string> common;
  for (const auto& q : common_questions(corpus, version_p, version_l)) common.insert(q.question_id);
  if (common.empty()) {
    throw DataError(fmt::format("versions {} and {} share no questions", version_p, version_l));
  }

  // (model, mode) -> question -> score, per version
  using Key = std::pair<std::string, SessionMode>;
  std::map<Key, std::map<std::string, const ScoreRecord*>> in_p;
  std::map<Key, std::map<std::string, const ScoreRecord*>> in_l;
  for (const auto& s : scores) {
    if (mode && s.mode != *mode) continue;
    if (!common.count(s.question_id)) continue;
    if (s.version == version_p) in_p[{s.model, s.mode}][s.question_id] = &s;
    if (s.version == version_l) in_l[{s.model, s.mode}][s.question_id] = &s;
  }

  std::vector<MetricRow> rows_p;
  std::vector<MetricRow> rows_l;
  std::vector<std::string> empty;
  for (const auto& [key, qp] : in_p) {
    auto it = in_l.find(key);
    if (it == in_l.end()) {
      empty.push_back(fmt::format("{} ({})", key.first, to_string(key.second)));
      continue;
    }
    MetricRow p{key.first, std::string(version_p), key.second, Eigen::Vector4d::Zero(), 0};
    MetricRow l{key.first, std::string(version_l), key.second, Eigen::Vector4d::Zero(), 0};
    for (const auto& [qid, sp] : qp) {
      auto jt = it->second.find(qid);
      if (jt == it->second.end()) continue;
      p.means += metric_vector(*sp);
      l.means += metric_vector(*jt->second);
      ++p.question_count;
      ++l.question_count;
    }
    if (p.question_count == 0) {
      empty.push_back(fmt::format("{} ({})", key.first, to_string(key.second)));
      continue;
    }
    p.means /= static_cast<double>(p.question_count);
    l.means /= static_cast<double>(l.question_count);
    rows_p.push_back(std::move(p));
    rows_l.push_back(std::move(l));
  }
  for (const auto& [key, ql] : in_l) {
    if (!in_p.count(key)) empty.push_back(fmt::format("{} ({})", key.first, to_string(key.second)));
  }
  if (!empty.empty()) {
    throw DataError(fmt::format("no common scored questions for: {}", fmt::join(empty, ", ")));
  }
  if (rows_p.empty()) throw DataError("no scores on common questions");

  VersionComparison out;
  out.version_p = version_p;
  out.version_l = version_l;
  for (std::size_t i = 0; i < rows_p.size(); ++i) add_cells(out, rows_p[i], rows_l[i]);
  fill_extremes(out);
  return out;
}

const TutorialRow* TutorialSummary::find(int tutorial) const noexcept {
  for (const auto& r : rows) {
    if (r.tutorial == tutorial) return &r;
  }
  return nullptr;
}

std::vector<int> TutorialSummary::best(Metric m) const {
  std::vector<int> out;
  const auto i = static_cast<Eigen::Index>(m);
  double top = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) top = std::min(top, r.ranks[i]);
  for (const auto& r : rows) {
    if (r.ranks[i] == top) out.push_back(r.tutorial);
  }
  return out;
}

std::vector<int> TutorialSummary::worst(Metric m) const {
  std::vector<int> out;
  const auto i = static_cast<Eigen::Index>(m);
  double bottom = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) bottom = std::max(bottom, r.ranks[i]);
  for (const auto& r : rows) {
    if (r.ranks[i] == bottom) out.push_back(r.tutorial);
  }
  return out;
}

TutorialSummary rank_tutorials(std::vector<TutorialRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.tutorial < b.tutorial; });
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixX4d means(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) means.row(i) = rows[static_cast<std::size_t>(i)].means.transpose();
  for (Eigen::Index c = 0; c < 4; ++c) {
    const Eigen::VectorXd r = average_ranks(means.col(c), true);
    for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)].ranks[c] = r[i];
  }
  return TutorialSummary{std::move(rows)};
}

TutorialSummary tutorial_means(std::span<const ScoreRecord> scores) {
  std::map<int, TutorialRow> groups;
  for (const auto& s : scores) {
    auto& row = groups[s.tutorial];
    row.tutorial = s.tutorial;
    row.means += metric_vector(s);
    ++row.count;
  }
  std::vector<TutorialRow> rows;
  for (auto& [t, row] : groups) {
    row.means /= static_cast<double>(row.count);
    rows.push_back(std::move(row));
  }
  return rank_tutorials(std::move(rows));
}

AgreementMatrix model_agreement(std::span<const ScoreRecord> scores) {
  using Key = std::tuple<std::string, SessionMode, std::string>;
  std::map<std::string, std::map<Key, const ScoreRecord*>> by_model;
  for (const auto& s : scores) {
    auto [it, fresh] = by_model[s.model].try_emplace(Key{s.version, s.mode, s.question_id}, &s);
    if (!fresh) {
      throw ValidationError(fmt::format("duplicate score for model {} question {} ({} {})", s.model,
                                        s.question_id, s.version, to_string(s.mode)));
    }
  }
  if (by_model.size() < 2) {
    throw DataError(fmt::format("agreement needs at least 2 models, got {}", by_model.size()));
  }

  std::set<Key> keys;
  for (const auto& [model, rows] : by_model) {
    for (const auto& [k, s] : rows) keys.insert(k);
  }
  std::vector<std::string> missing;
  for (const auto& [model, rows] : by_model) {
    for (const auto& k : keys) {
      if (!rows.count(k)) {
        missing.push_back(fmt::format("{} lacks {} ({} {})", model, std::get<2>(k), std::get<0>(k),
                                      to_string(std::get<1>(k))));
      }
    }
  }
  if (!missing.empty()) {
    throw ValidationError(fmt::format("misaligned question sets: {}", fmt::join(missing, "; ")));
  }

  AgreementMatrix out;
  const auto m = static_cast<Eigen::Index>(by_model.size());
  const auto n = static_cast<Eigen::Index>(keys.size());
  out.question_count = keys.size();
  // values[metric] is n x m, one column per model in key order.
  std::array<Eigen::MatrixXd, 4> values;
  for (auto& v : values) v.resize(n, m);
  Eigen::Index col = 0;
  for (const auto& [model, rows] : by_model) {
    out.models.push_back(model);
    Eigen::Index row = 0;
    for (const auto& [k, s] : rows) {
      for (Metric metric : kMetrics) values[static_cast<std::size_t>(metric)](row, col) = metric_value(*s, metric);
      ++row;
    }
    ++col;
  }

  out.mean = Eigen::MatrixXd::Zero(m, m);
  for (Metric metric : kMetrics) {
    const auto& v = values[static_cast<std::size_t>(metric)];
    auto& corr = out.per_metric[static_cast<std::size_t>(metric)];
    corr = Eigen::MatrixXd::Identity(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = a + 1; b < m; ++b) {
        try {
          corr(a, b) = corr(b, a) = spearman(v.col(a), v.col(b));
        } catch (const DataError&) {
          throw DataError(fmt::format("spearman undefined for {} vs {} on {}: constant scores",
                                      out.models[static_cast<std::size_t>(a)],
                                      out.models[static_cast<std::size_t>(b)], to_string(metric)));
        }
      }
    }
    out.mean += corr;
  }
  out.mean /= 4.0;
  return out;
}

}  // namespace tutorqa
