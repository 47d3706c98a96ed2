#include "tutorqa/report.hpp"

#include <fmt/format.h>

#include "tutorqa/util.hpp"

namespace tutorqa {

using nlohmann::json;

namespace {

json outcome_counts(const OutcomeCounts& c) {
  return {{"fail", c[0]}, {"needs_revision", c[1]}, {"pass", c[2]}};
}

json rouge_json(const RougeScore& r) {
  return {{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}};
}

json metric_vector_json(const Eigen::Vector4d& v) {
  json out = json::object();
  for (Metric m : kMetrics) out[std::string(to_string(m))] = v[static_cast<Eigen::Index>(m)];
  return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json cell_json(const ImprovementCell& c) {
  return {{"model", c.model},
          {"mode", to_string(c.mode)},
          {"metric", to_string(c.metric)},
          {"value_p", c.value_p},
          {"value_l", c.value_l},
          {"delta", c.delta},
          {"improvement_pct", c.improvement_pct},
          {"question_count", c.question_count}};
}

}  // namespace

json to_json(const SuiteResult& suite) {
  json frames = json::array();
  for (const auto& f : suite.frames) {
    json questions = json::array();
    for (const auto& q : f.questions) {
      questions.push_back({{"question_id", q.question_id},
                           {"question", q.question},
                           {"expected_answer", q.expected_answer},
                           {"actual_answer", q.actual_answer},
                           {"quality", to_string(q.quality)},
                           {"outcome", to_string(q.outcome)},
                           {"parse_failed", q.score.parse_failed},
                           {"rouge1", rouge_json(q.score.rouge1)},
                           {"rouge2", rouge_json(q.score.rouge2)},
                           {"rougeL", rouge_json(q.score.rougeL)},
                           {"semantic",
                            {{"precision", q.score.semantic.precision},
                             {"recall", q.score.semantic.recall},
                             {"f1", q.score.semantic.f1},
                             {"mode", to_string(q.score.semantic.mode)},
                             {"degenerate", q.score.semantic.degenerate}}}});
    }
    frames.push_back({{"frame_id", f.frame_id},
                      {"tutorial", f.tutorial},
                      {"ordinal", f.ordinal},
                      {"image", f.image_path},
                      {"outcome", to_string(f.outcome)},
                      {"questions", std::move(questions)}});
  }
  json flagged = json::array();
  for (const auto& s : suite.flagged) {
    flagged.push_back({{"frame_id", s.frame_id},
                       {"image", s.image_path},
                       {"question_id", s.question_id},
                       {"question", s.question},
                       {"expected_answer", s.expected_answer},
                       {"actual_answer", s.actual_answer},
                       {"r2", s.r2},
                       {"bs", s.bs},
                       {"parse_failed", s.parse_failed}});
  }
  return {{"provider", suite.provider},
          {"model", suite.model},
          {"version", suite.version},
          {"mode", to_string(suite.mode)},
          {"question_counts", outcome_counts(suite.question_counts)},
          {"frame_counts", outcome_counts(suite.frame_counts)},
          {"frames", std::move(frames)},
          {"flagged", std::move(flagged)}};
}

json to_json(const VersionComparison& c) {
  json cells = json::array();
  for (const auto& cell : c.cells) cells.push_back(cell_json(cell));
  json extremes = json::array();
  for (const auto& e : c.extremes) {
    extremes.push_back({{"mode", to_string(e.mode)},
                        {"min", cell_json(e.min)},
                        {"max", cell_json(e.max)},
                        {"all_improved", e.all_improved}});
  }
  return {{"version_p", c.version_p},
          {"version_l", c.version_l},
          {"cells", std::move(cells)},
          {"extremes", std::move(extremes)}};
}

json to_json(const TutorialSummary& s) {
  json rows = json::array();
  for (const auto& r : s.rows) {
    rows.push_back({{"tutorial", r.tutorial},
                    {"count", r.count},
                    {"means", metric_vector_json(r.means)},
                    {"ranks", metric_vector_json(r.ranks)}});
  }
  return {{"rows", std::move(rows)}};
}

json to_json(const AgreementMatrix& a) {
  json per_metric = json::object();
  for (Metric m : kMetrics) {
    per_metric[std::string(to_string(m))] = matrix_json(a.per_metric[static_cast<std::size_t>(m)]);
  }
  return {{"models", a.models},
          {"question_count", a.question_count},
          {"mean", matrix_json(a.mean)},
          {"per_metric", std::move(per_metric)}};
}

json to_json(const Report& report) {
  json doc{{"schema_version", kReportSchemaVersion},
           {"meta",
            {{"command", report.meta.command},
             {"tool_version", report.meta.tool_version},
             {"generated_at", report.meta.generated_at},
             {"config_hash", report.meta.config_hash},
             {"classifier", report.meta.classifier},
             {"source", report.meta.source}}}};
  json suites = json::array();
  for (const auto& s : report.suites) suites.push_back(to_json(s));
  doc["suites"] = std::move(suites);
  if (report.gate) {
    doc["gate"] = {{"policy", *report.gate == GatePolicy::FailOnly ? "fail" : "fail-or-revision"},
                   {"passed", gate_passes(report.suites, *report.gate)}};
  }
  json analysis = json::object();
  if (report.comparison) analysis["comparison"] = to_json(*report.comparison);
  if (report.tutorials) analysis["tutorials"] = to_json(*report.tutorials);
  if (report.agreement) analysis["agreement"] = to_json(*report.agreement);
  doc["analysis"] = std::move(analysis);
  return doc;
}

namespace {

void require(const json& obj, std::string_view path, std::string_view key, json::value_t type) {
  const auto it = obj.find(key);
  const bool number = type == json::value_t::number_float || type == json::value_t::number_integer ||
                      type == json::value_t::number_unsigned;
  if (it == obj.end()) throw ValidationError(fmt::format("report: missing {}.{}", path, key));
  if (number ? !it->is_number() : it->type() != type) {
    throw ValidationError(fmt::format("report: {}.{} has the wrong type", path, key));
  }
}

using V = json::value_t;

}  // namespace

void validate_report(const json& doc) {
  if (!doc.is_object()) throw ValidationError("report: not an object");
  require(doc, "", "schema_version", V::number_unsigned);
  if (doc["schema_version"] != kReportSchemaVersion) {
    throw ValidationError(fmt::format("report: schema_version {} is not {}", doc["schema_version"].dump(),
                                      kReportSchemaVersion));
  }
  require(doc, "", "meta", V::object);
  for (const char* key : {"command", "tool_version", "generated_at", "config_hash", "classifier", "source"}) {
    require(doc["meta"], "meta", key, V::string);
  }
  require(doc, "", "suites", V::array);
  require(doc, "", "analysis", V::object);
  for (const auto& s : doc["suites"]) {
    for (const char* key : {"provider", "model", "version", "mode"}) require(s, "suites[]", key, V::string);
    for (const char* key : {"question_counts", "frame_counts"}) require(s, "suites[]", key, V::object);
    require(s, "suites[]", "frames", V::array);
    require(s, "suites[]", "flagged", V::array);
    for (const auto& f : s["frames"]) {
      for (const char* key : {"frame_id", "image", "outcome"}) require(f, "frames[]", key, V::string);
      require(f, "frames[]", "questions", V::array);
      for (const auto& q : f["questions"]) {
        for (const char* key : {"question_id", "question", "expected_answer", "actual_answer", "quality", "outcome"}) {
          require(q, "questions[]", key, V::string);
        }
        for (const char* key : {"rouge1", "rouge2", "rougeL", "semantic"}) require(q, "questions[]", key, V::object);
      }
    }
    for (const auto& g : s["flagged"]) {
      for (const char* key : {"frame_id", "image", "question", "expected_answer", "actual_answer"}) {
        require(g, "flagged[]", key, V::string);
      }
      for (const char* key : {"r2", "bs"}) require(g, "flagged[]", key, V::number_float);
    }
  }
  if (doc.contains("gate")) {
    require(doc["gate"], "gate", "policy", V::string);
    require(doc["gate"], "gate", "passed", V::boolean);
  }
  const auto& a = doc["analysis"];
  if (a.contains("comparison")) {
    require(a["comparison"], "analysis.comparison", "cells", V::array);
    require(a["comparison"], "analysis.comparison", "extremes", V::array);
  }
  if (a.contains("tutorials")) require(a["tutorials"], "analysis.tutorials", "rows", V::array);
  if (a.contains("agreement")) {
    require(a["agreement"], "analysis.agreement", "models", V::array);
    require(a["agreement"], "analysis.agreement", "mean", V::array);
  }
}

namespace {

std::string num(const json& v) { return fmt::format("{:.4f}", v.get<double>()); }

std::string pct(const json& v) { return fmt::format("{:+.2f}%", v.get<double>()); }

// Keeps table cells on one line.
std::string cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\n') out += "<br>";
    else if (c == '|') out += "\\|";
    else if (c != '\r') out.push_back(c);
  }
  return out;
}

void render_suite(std::string& md, const json& s) {
  const auto& qc = s["question_counts"];
  const auto& fc = s["frame_counts"];
  md += fmt::format("## {} / {} / {}\n\n", s["provider"].get<std::string>(), s["version"].get<std::string>(),
                    s["mode"].get<std::string>());
  md += fmt::format("Model: {}\n\n", s["model"].get<std::string>());
  md += "| | fail | needs-revision | pass |\n|---|---|---|---|\n";
  md += fmt::format("| questions | {} | {} | {} |\n", qc["fail"].get<int>(), qc["needs_revision"].get<int>(),
                    qc["pass"].get<int>());
  md += fmt::format("| frames | {} | {} | {} |\n\n", fc["fail"].get<int>(), fc["needs_revision"].get<int>(),
                    fc["pass"].get<int>());

  md += "| frame | tutorial | question | R1 | R2 | RL | BS | outcome |\n|---|---|---|---|---|---|---|---|\n";
  for (const auto& f : s["frames"]) {
    for (const auto& q : f["questions"]) {
      md += fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} |\n", f["frame_id"].get<std::string>(),
                        f["tutorial"].get<int>(), q["question_id"].get<std::string>(), num(q["rouge1"]["f1"]),
                        num(q["rouge2"]["f1"]), num(q["rougeL"]["f1"]), num(q["semantic"]["f1"]),
                        q["outcome"].get<std::string>());
    }
  }
  md += "\n";

  if (s["flagged"].empty()) return;
  md += "### Flagged samples\n\n";
  for (const auto& g : s["flagged"]) {
    md += fmt::format("#### {} / {}\n\n", g["frame_id"].get<std::string>(), g["question_id"].get<std::string>());
    md += fmt::format("![{}]({})\n\n", g["frame_id"].get<std::string>(), g["image"].get<std::string>());
    md += fmt::format("- **Q:** {}\n", cell(g["question"].get<std::string>()));
    md += fmt::format("- **Expectation:** {}\n", cell(g["expected_answer"].get<std::string>()));
    const auto answer = g["actual_answer"].get<std::string>();
    md += fmt::format("- **Answer:** {}\n", answer.empty() ? "_(no answer)_" : cell(answer));
    md += fmt::format("- BS: {}, R2: {}{}\n\n", num(g["bs"]), num(g["r2"]),
                      g.value("parse_failed", false) ? " (reply could not be parsed)" : "");
  }
}

void render_comparison(std::string& md, const json& c) {
  md += fmt::format("## Version comparison {} -> {}\n\n", c["version_p"].get<std::string>(),
                    c["version_l"].get<std::string>());
  md += "| model | mode | metric | P | L | delta | improvement |\n|---|---|---|---|---|---|---|\n";
  for (const auto& cell : c["cells"]) {
    md += fmt::format("| {} | {} | {} | {} | {} | {} | {} |\n", cell["model"].get<std::string>(),
                      cell["mode"].get<std::string>(), cell["metric"].get<std::string>(), num(cell["value_p"]),
                      num(cell["value_l"]), num(cell["delta"]), pct(cell["improvement_pct"]));
  }
  md += "\n";
  for (const auto& e : c["extremes"]) {
    md += fmt::format("- {}: from {} ({} {}) to {} ({} {}); L above P everywhere: {}\n",
                      e["mode"].get<std::string>(), pct(e["min"]["improvement_pct"]),
                      e["min"]["model"].get<std::string>(), e["min"]["metric"].get<std::string>(),
                      pct(e["max"]["improvement_pct"]), e["max"]["model"].get<std::string>(),
                      e["max"]["metric"].get<std::string>(), e["all_improved"].get<bool>() ? "yes" : "no");
  }
  md += "\n";
}

void render_tutorials(std::string& md, const json& t) {
  md += "## Tutorial summary\n\n| tutorial | R1 | R2 | RL | BS | ranks (R1/R2/RL/BS) |\n|---|---|---|---|---|---|\n";
  for (const auto& r : t["rows"]) {
    const auto& m = r["means"];
    const auto& k = r["ranks"];
    md += fmt::format("| {} | {} | {} | {} | {} | {}/{}/{}/{} |\n", r["tutorial"].get<int>(), num(m["rouge1"]),
                      num(m["rouge2"]), num(m["rougeL"]), num(m["bert_score"]), k["rouge1"].get<double>(),
                      k["rouge2"].get<double>(), k["rougeL"].get<double>(), k["bert_score"].get<double>());
  }
  md += "\n";
}

void render_agreement(std::string& md, const json& a) {
  md += fmt::format("## Model agreement (mean Spearman over 4 metrics, {} questions)\n\n|",
                    a["question_count"].get<int>());
  for (const auto& m : a["models"]) md += fmt::format(" | {}", m.get<std::string>());
  md += " |\n|---";
  for (std::size_t i = 0; i < a["models"].size(); ++i) md += "|---";
  md += "|\n";
  for (std::size_t i = 0; i < a["models"].size(); ++i) {
    md += fmt::format("| {}", a["models"][i].get<std::string>());
    for (const auto& v : a["mean"][i]) md += fmt::format(" | {}", num(v));
    md += " |\n";
  }
  md += "\n";
}

}  // namespace

std::string render_markdown(const json& doc) {
  validate_report(doc);
  const auto& meta = doc["meta"];
  std::string md = fmt::format("# tutorqa report: {}\n\n", meta["command"].get<std::string>());
  md += fmt::format("- tool version: {}\n- generated: {}\n- config hash: `{}`\n- source: {}\n- classifier: {}\n",
                    meta["tool_version"].get<std::string>(), meta["generated_at"].get<std::string>(),
                    meta["config_hash"].get<std::string>(), meta["source"].get<std::string>(),
                    meta["classifier"].get<std::string>());
  if (doc.contains("gate")) {
    md += fmt::format("- gate ({}): **{}**\n", doc["gate"]["policy"].get<std::string>(),
                      doc["gate"]["passed"].get<bool>() ? "PASS" : "FAIL");
  }
  md += "\n";
  for (const auto& s : doc["suites"]) render_suite(md, s);
  const auto& a = doc["analysis"];
  if (a.contains("comparison")) render_comparison(md, a["comparison"]);
  if (a.contains("tutorials")) render_tutorials(md, a["tutorials"]);
  if (a.contains("agreement")) render_agreement(md, a["agreement"]);
  return md;
}

json write_report(const Report& report, const std::filesystem::path& dir, std::string_view stem) {
  std::filesystem::create_directories(dir);
  const json doc = to_json(report);
  write_file_atomic(dir / fmt::format("{}.json", stem), doc.dump(2) + "\n");
  write_file_atomic(dir / fmt::format("{}.md", stem), render_markdown(doc));
  return doc;
}

}  // namespace tutorqa
