#include "tutorqa/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "tutorqa/analysis.hpp"
#include "tutorqa/fixtures.hpp"
#include "tutorqa/pipeline.hpp"
#include "tutorqa/score_table.hpp"
#include "tutorqa/util.hpp"

namespace tutorqa {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Globals {
  std::string corpus;
  std::string config;
  std::string provider;
  std::string mode;
  std::vector<std::string> versions;
  std::vector<int> tutorials;
  std::string classifier;
  bool no_cache = false;
  std::uint64_t seed = 42;
  std::string out = "tutorqa-out";
  std::string gate = "fail";
};

struct Local {
  std::string transcripts;
  std::string scores;
  std::string method = "otsu";
  int bins = 256;
  int k_neighbors = 5;
  std::string combiner = "min";
  std::string output;
  bool fixture = false;
  std::string input;
};

class Command {
 public:
  Command(const Globals& g, const Local& l, std::vector<std::string> args, std::ostream& out)
      : g_(g), l_(l), args_(std::move(args)), out_(out) {}

  int validate();
  int run();
  int score();
  int calibrate();
  int verdict();
  int compare();
  int tutorials();
  int agreement();
  int report();

 private:
  CorpusManifest corpus() const {
    if (g_.corpus.empty()) throw ValidationError("--corpus is required");
    return load_manifest(g_.corpus);
  }

  std::optional<ProviderFile> provider_file() const {
    if (g_.config.empty()) return std::nullopt;
    return load_provider_file(g_.config);
  }

  std::vector<SessionMode> modes(SessionMode fallback) const {
    if (g_.mode.empty()) return {fallback};
    if (g_.mode == "both") return {SessionMode::WithHistory, SessionMode::WithoutHistory};
    return {parse_session_mode(g_.mode)};
  }

  std::optional<SessionMode> mode_filter() const {
    if (g_.mode.empty() || g_.mode == "both") return std::nullopt;
    return parse_session_mode(g_.mode);
  }

  GatePolicy gate() const {
    if (g_.gate == "fail") return GatePolicy::FailOnly;
    if (g_.gate == "fail-or-revision") return GatePolicy::FailOrRevision;
    throw ValidationError(fmt::format("unknown gate policy '{}'", g_.gate));
  }

  fs::path scores_path() const { return l_.scores.empty() ? fs::path(g_.out) / "scores.tsv" : fs::path(l_.scores); }
  fs::path transcripts_dir() const {
    return l_.transcripts.empty() ? fs::path(g_.out) / "transcripts" : fs::path(l_.transcripts);
  }

  std::vector<ScoreRecord> scores() const {
    const auto path = scores_path();
    if (!fs::exists(path)) throw ValidationError(fmt::format("score table not found: {}", path.string()));
    return load_score_table(path);
  }

  RunMetadata meta(std::string command, std::string source) const {
    RunMetadata m;
    m.command = std::move(command);
    m.generated_at = utc_timestamp();
    m.config_hash = sha256_hex(json(args_).dump());
    m.source = std::move(source);
    return m;
  }

  void print_suites(const std::vector<SuiteResult>& suites) const {
    for (const auto& s : suites) {
      fmt::print(out_, "{} {} {}: {} questions, fail {}, needs-revision {}, pass {}\n", s.provider, s.version,
                 to_string(s.mode), s.question_total(), s.question_counts[0], s.question_counts[1],
                 s.question_counts[2]);
    }
  }

  const Globals& g_;
  const Local& l_;
  std::vector<std::string> args_;
  std::ostream& out_;
};

int Command::validate() {
  if (g_.corpus.empty()) throw ValidationError("--corpus is required");
  json doc;
  try {
    doc = json::parse(read_file(g_.corpus));
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", g_.corpus, e.what()));
  }
  const auto manifest = parse_manifest(doc, fs::path(g_.corpus).parent_path());
  const auto diagnostics = validate_corpus(manifest);
  for (const auto& d : diagnostics) fmt::print(out_, "{}\n", to_string(d));
  if (!diagnostics.empty()) {
    fmt::print(out_, "{} problem(s) found\n", diagnostics.size());
    return kExitGateFailed;
  }
  for (const auto& v : manifest.versions) {
    fmt::print(out_, "version {}: {} tutorial(s), {} question(s)\n", v.id, manifest.tutorials(v.id).size(),
               manifest.question_count(v.id));
  }
  fmt::print(out_, "corpus ok: {} frame(s)\n", manifest.frames.size());
  return kExitPass;
}

int Command::run() {
  if (g_.provider.empty()) throw ValidationError("--provider is required");
  const auto manifest = corpus();
  const auto file = provider_file();
  RunConfig config;
  config.corpus = g_.corpus;
  if (!g_.config.empty()) config.provider_file = g_.config;
  config.provider = g_.provider;
  config.versions = g_.versions;
  config.tutorials = g_.tutorials;
  config.modes = modes(SessionMode::WithHistory);
  if (!g_.classifier.empty()) config.classifier = g_.classifier;
  config.use_cache = !g_.no_cache;
  config.out = g_.out;
  config.seed = g_.seed;
  config.gate = gate();

  auto provider = make_provider(select_provider(g_.provider, file));
  auto embedder = make_embedder(file ? file->embedding : EmbeddingConfig{});
  const auto semantic = file ? file->semantic_mode : SemanticMode::Sentence;
  const auto result = execute_run(config, manifest, *provider, *embedder, semantic);
  print_suites(result.report.suites);
  fmt::print(out_, "gate: {}\nreport: {}\n", result.gate_passed ? "PASS" : "FAIL",
             (fs::path(g_.out) / "report.md").string());
  return result.gate_passed ? kExitPass : kExitGateFailed;
}

int Command::score() {
  const auto manifest = corpus();
  const auto file = provider_file();
  auto embedder = make_embedder(file ? file->embedding : EmbeddingConfig{});
  const auto semantic = file ? file->semantic_mode : SemanticMode::Sentence;
  std::vector<ScoreRecord> all;
  for (const auto& t : load_transcripts(transcripts_dir())) {
    auto s = score_transcript(manifest, t, *embedder, semantic);
    all.insert(all.end(), s.begin(), s.end());
  }
  const auto path = l_.output.empty() ? fs::path(g_.out) / "scores.tsv" : fs::path(l_.output);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_score_table(all, path);
  fmt::print(out_, "{} score rows -> {}\n", all.size(), path.string());
  return kExitPass;
}

int Command::calibrate() {
  const auto table = scores();
  if (table.empty()) throw DataError("score table is empty");
  std::vector<FeaturePoint> points;
  for (const auto& s : table) points.push_back(feature_point(s));

  Calibration c;
  c.method = l_.method;
  c.sample_count = points.size();
  c.combiner = parse_combiner(l_.combiner);
  const auto published = published_thresholds();
  if (l_.method == "otsu") {
    c.bins = l_.bins;
    c.thresholds = fit_otsu_thresholds(points, l_.bins);
    fmt::print(out_, "multi-Otsu over {} points, {} bins\n", points.size(), l_.bins);
    fmt::print(out_, "{:<8}{:>10}{:>10}{:>10}{:>10}\n", "feature", "LT", "HT", "pub. LT", "pub. HT");
    fmt::print(out_, "{:<8}{:>10.4f}{:>10.4f}{:>10.4f}{:>10.4f}\n", "R2", c.thresholds->r2.lt, c.thresholds->r2.ht,
               published.r2.lt, published.r2.ht);
    fmt::print(out_, "{:<8}{:>10.4f}{:>10.4f}{:>10.4f}{:>10.4f}\n", "BS", c.thresholds->bs.lt, c.thresholds->bs.ht,
               published.bs.lt, published.bs.ht);
  } else if (l_.method == "kmeans") {
    c.k_neighbors = l_.k_neighbors;
    c.cluster = kmeans_fit(points, 3, g_.seed);
    fmt::print(out_, "k-means over {} points, seed {}\n", points.size(), g_.seed);
    fmt::print(out_, "{:<8}{:>10}{:>10}\n", "class", "R2", "BS");
    for (int cls = 0; cls < 3; ++cls) {
      for (Eigen::Index r = 0; r < c.cluster->centroids.rows(); ++r) {
        if (static_cast<int>(c.cluster->centroid_class[static_cast<std::size_t>(r)]) != cls) continue;
        fmt::print(out_, "{:<8}{:>10.4f}{:>10.4f}\n", to_string(static_cast<QualityClass>(cls)),
                   c.cluster->centroids(r, 0), c.cluster->centroids(r, 1));
      }
    }
    fmt::print(out_, "published: R2 LT {:.4f} HT {:.4f}, BS LT {:.4f} HT {:.4f}\n", published.r2.lt, published.r2.ht,
               published.bs.lt, published.bs.ht);
  } else {
    throw ValidationError(fmt::format("unknown calibration method '{}' (kmeans|otsu)", l_.method));
  }
  const auto path = l_.output.empty() ? fs::path(g_.out) / "calibration.json" : fs::path(l_.output);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_calibration(c, path);
  fmt::print(out_, "calibration -> {}\n", path.string());
  return kExitPass;
}

int Command::verdict() {
  const auto manifest = corpus();
  const auto transcripts = load_transcripts(transcripts_dir());
  const auto table = scores();
  std::optional<fs::path> cls;
  if (!g_.classifier.empty()) cls = g_.classifier;
  const auto classifier = load_classifier(cls);

  Report report;
  report.meta = meta("verdict", g_.corpus);
  report.meta.classifier = describe(classifier);
  report.gate = gate();
  report.suites = run_suites(manifest, transcripts, table, classifier);
  write_report(report, g_.out);
  const bool passed = gate_passes(report.suites, *report.gate);
  print_suites(report.suites);
  fmt::print(out_, "gate: {}\n", passed ? "PASS" : "FAIL");
  return passed ? kExitPass : kExitGateFailed;
}

int Command::compare() {
  VersionComparison c;
  std::string source;
  if (l_.fixture) {
    auto table = version_means_fixture();
    if (const auto m = mode_filter()) {
      std::erase_if(table.rows, [&](const MetricRow& r) { return r.mode != *m; });
    }
    c = compare_tables(table, "P", "L");
    source = "fixture:version_means";
  } else {
    const auto manifest = corpus();
    std::vector<std::string> versions = g_.versions;
    if (versions.empty()) {
      for (const auto& v : manifest.versions) versions.push_back(v.id);
    }
    if (versions.size() != 2) {
      throw ValidationError("compare needs exactly two versions (--version P --version L)");
    }
    c = compare_versions(scores(), manifest, versions[0], versions[1], mode_filter());
    source = scores_path().generic_string();
  }

  std::string tsv = "model\tmode\tmetric\tvalue_p\tvalue_l\tdelta\timprovement_pct\tquestion_count\n";
  for (const auto& cell : c.cells) {
    tsv += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", cell.model, to_string(cell.mode), to_string(cell.metric),
                       cell.value_p, cell.value_l, cell.delta, cell.improvement_pct, cell.question_count);
  }
  fs::create_directories(g_.out);
  write_file_atomic(fs::path(g_.out) / "comparison.tsv", tsv);

  for (const auto& e : c.extremes) {
    fmt::print(out_, "{}: min {:+.2f}% ({} {}), max {:+.2f}% ({} {}), L > P in every cell: {}\n", to_string(e.mode),
               e.min.improvement_pct, e.min.model, to_string(e.min.metric), e.max.improvement_pct, e.max.model,
               to_string(e.max.metric), e.all_improved ? "yes" : "no");
  }
  Report report;
  report.meta = meta("compare", source);
  report.comparison = std::move(c);
  write_report(report, g_.out, "compare-report");
  return kExitPass;
}

int Command::tutorials() {
  TutorialSummary s;
  std::string source;
  if (l_.fixture) {
    s = tutorial_means_fixture();
    source = "fixture:tutorial_means";
  } else {
    s = tutorial_means(scores());
    source = scores_path().generic_string();
  }
  std::string tsv = "tutorial\tcount";
  for (Metric m : kMetrics) tsv += fmt::format("\t{}", to_string(m));
  for (Metric m : kMetrics) tsv += fmt::format("\trank_{}", to_string(m));
  tsv += "\n";
  fmt::print(out_, "{:<9}{:>8}{:>8}{:>8}{:>8}  ranks\n", "tutorial", "R1", "R2", "RL", "BS");
  for (const auto& r : s.rows) {
    tsv += fmt::format("{}\t{}", r.tutorial, r.count);
    for (Eigen::Index i = 0; i < 4; ++i) tsv += fmt::format("\t{}", r.means[i]);
    for (Eigen::Index i = 0; i < 4; ++i) tsv += fmt::format("\t{}", r.ranks[i]);
    tsv += "\n";
    fmt::print(out_, "{:<9}{:>8.4f}{:>8.4f}{:>8.4f}{:>8.4f}  {}/{}/{}/{}\n", r.tutorial, r.means[0], r.means[1],
               r.means[2], r.means[3], r.ranks[0], r.ranks[1], r.ranks[2], r.ranks[3]);
  }
  fs::create_directories(g_.out);
  write_file_atomic(fs::path(g_.out) / "tutorials.tsv", tsv);
  Report report;
  report.meta = meta("tutorials", source);
  report.tutorials = std::move(s);
  write_report(report, g_.out, "tutorials-report");
  return kExitPass;
}

int Command::agreement() {
  const auto a = model_agreement(scores());
  std::string tsv = "model";
  for (const auto& m : a.models) tsv += "\t" + m;
  tsv += "\n";
  for (std::size_t i = 0; i < a.models.size(); ++i) {
    tsv += a.models[i];
    fmt::print(out_, "{:<24}", a.models[i]);
    for (Eigen::Index j = 0; j < a.mean.cols(); ++j) {
      tsv += fmt::format("\t{}", a.mean(static_cast<Eigen::Index>(i), j));
      fmt::print(out_, "{:>8.4f}", a.mean(static_cast<Eigen::Index>(i), j));
    }
    tsv += "\n";
    fmt::print(out_, "\n");
  }
  fs::create_directories(g_.out);
  write_file_atomic(fs::path(g_.out) / "agreement.tsv", tsv);
  Report report;
  report.meta = meta("agreement", scores_path().generic_string());
  report.agreement = a;
  write_report(report, g_.out, "agreement-report");
  return kExitPass;
}

int Command::report() {
  const fs::path in = l_.input.empty() ? fs::path(g_.out) / "report.json" : fs::path(l_.input);
  json doc;
  try {
    doc = json::parse(read_file(in));
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", in.string(), e.what()));
  }
  validate_report(doc);
  auto md = in;
  md.replace_extension(".md");
  write_file_atomic(md, render_markdown(doc));
  fmt::print(out_, "{} is valid (schema {}); rendered {}\n", in.string(), kReportSchemaVersion, md.string());
  return kExitPass;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Globals g;
  Local l;
  CLI::App app{"Checks that a vision-language model understands game tutorial frames."};
  app.name("tutorqa");
  app.set_version_flag("-V,--tool-version", TUTORQA_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--corpus", g.corpus, "corpus manifest (JSON)");
  app.add_option("--config", g.config, "provider and embedding config file (JSON)");
  app.add_option("--provider", g.provider, "provider name from --config, or mock:oracle / mock:empty");
  app.add_option("--mode", g.mode, "session mode")->check(CLI::IsMember({"history", "no-history", "both"}));
  app.add_option("--version", g.versions, "game version (repeatable)")->allow_extra_args(false);
  app.add_option("--tutorial", g.tutorials, "tutorial number (repeatable)")->allow_extra_args(false);
  app.add_option("--classifier", g.classifier, "calibration file; published thresholds when omitted");
  app.add_flag("--no-cache", g.no_cache, "ignore cached answers and query again");
  app.add_option("--seed", g.seed, "random seed for k-means");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--gate", g.gate, "outcomes that fail the gate")->check(CLI::IsMember({"fail", "fail-or-revision"}));

  auto* validate = app.add_subcommand("validate", "check a corpus manifest");
  auto* run = app.add_subcommand("run", "query, score and judge end to end");
  auto* score = app.add_subcommand("score", "score saved transcripts");
  score->add_option("--transcripts", l.transcripts, "transcript directory");
  score->add_option("-o,--output", l.output, "score table path");
  auto* calibrate = app.add_subcommand("calibrate", "fit a classifier to a score table");
  calibrate->add_option("--scores", l.scores, "score table");
  calibrate->add_option("--method", l.method)->check(CLI::IsMember({"kmeans", "otsu"}));
  calibrate->add_option("--bins", l.bins, "histogram bins for otsu");
  calibrate->add_option("--k-neighbors", l.k_neighbors, "K-NN neighbours for kmeans");
  calibrate->add_option("--combiner", l.combiner)->check(CLI::IsMember({"min", "max", "bs-only", "r2-only"}));
  calibrate->add_option("-o,--output", l.output, "calibration file path");
  auto* verdict = app.add_subcommand("verdict", "judge scored transcripts");
  verdict->add_option("--transcripts", l.transcripts, "transcript directory");
  verdict->add_option("--scores", l.scores, "score table");
  auto* compare = app.add_subcommand("compare", "compare two game versions on common questions");
  compare->add_flag("--fixture", l.fixture, "use the shipped reference table");
  compare->add_option("--scores", l.scores, "score table");
  auto* tutorials = app.add_subcommand("tutorials", "mean scores and ranking per tutorial");
  tutorials->add_flag("--fixture", l.fixture, "use the shipped reference table");
  tutorials->add_option("--scores", l.scores, "score table");
  auto* agreement = app.add_subcommand("agreement", "Spearman agreement between models");
  agreement->add_option("--scores", l.scores, "score table");
  auto* report = app.add_subcommand("report", "validate a report and re-render its markdown");
  report->add_option("--in", l.input, "report JSON");

  std::vector<std::string> argv_storage{"tutorqa"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitError;
  }

  Command cmd(g, l, args, out);
  try {
    if (validate->parsed()) return cmd.validate();
    if (run->parsed()) return cmd.run();
    if (score->parsed()) return cmd.score();
    if (calibrate->parsed()) return cmd.calibrate();
    if (verdict->parsed()) return cmd.verdict();
    if (compare->parsed()) return cmd.compare();
    if (tutorials->parsed()) return cmd.tutorials();
    if (agreement->parsed()) return cmd.agreement();
    if (report->parsed()) return cmd.report();
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitError;
  }
  return kExitError;
}

}  // namespace tutorqa
