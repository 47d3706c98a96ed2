// Acceptance checks. One PASS/FAIL line per criterion; exit 1 if any fails.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "metric_cases.hpp"
#include "oracles.hpp"
#include "test_support.hpp"
#include "tutorqa/error.hpp"
#include "tutorqa/analysis.hpp"
#include "tutorqa/calibration.hpp"
#include "tutorqa/cli.hpp"
#include "tutorqa/fixtures.hpp"
#include "tutorqa/gateway.hpp"
#include "tutorqa/provider.hpp"
#include "tutorqa/session.hpp"
#include "tutorqa/text_metrics.hpp"

using namespace tutorqa;
namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename... Args>
void expect(bool ok, fmt::format_string<Args...> f, Args&&... args) {
  if (!ok) throw Failure(fmt::format(f, std::forward<Args>(args)...));
}

// --- 1 -----------------------------------------------------------------------

// The nearest double to num/den. IEEE division of exactly representable
// integers is correctly rounded, so equality here is equality of rationals
// up to the one representable value.
double rational(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_rouge(const RougeScore& s, std::size_t o, std::size_t c, std::size_t r, const char* what,
                 const std::string& cand) {
  expect(s.overlap == o && s.candidate_total == c && s.reference_total == r,
         "{} counts {}/{}/{} != {}/{}/{} for '{}'", what, s.overlap, s.candidate_total, s.reference_total, o, c,
         r, cand);
  expect(s.precision == rational(o, c), "{} precision for '{}'", what, cand);
  expect(s.recall == rational(o, r), "{} recall for '{}'", what, cand);
  const double f1 = (o == 0 || c == 0 || r == 0) ? 0.0 : rational(2 * o, c + r);
  expect(s.f1 == f1, "{} F1 for '{}'", what, cand);
}

std::vector<std::vector<std::string>> all_sequences(int max_len) {
  std::vector<std::vector<std::string>> out{{}};
  std::size_t begin = 0;
  for (int len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (const char* s : {"a", "b", "c"}) {
        auto next = out[i];
        next.emplace_back(s);
        out.push_back(std::move(next));
      }
    }
    begin = end;
  }
  return out;
}

std::string metric_oracles() {
  for (const auto& c : kMetricCases) {
    const auto cand = tokenize(c.candidate);
    const auto ref = tokenize(c.reference);
    const auto w1 = oracle::rouge_n(cand.tokens, ref.tokens, 1);
    const auto w2 = oracle::rouge_n(cand.tokens, ref.tokens, 2);
    expect(w1.overlap == c.r1_overlap && w2.overlap == c.r2_overlap, "oracle disagrees with hand count for '{}'",
           c.candidate);
    check_rouge(rouge_n(cand, ref, 1), c.r1_overlap, c.r1_cand, c.r1_ref, "ROUGE-1", c.candidate);
    check_rouge(rouge_n(cand, ref, 2), c.r2_overlap, c.r2_cand, c.r2_ref, "ROUGE-2", c.candidate);
    check_rouge(rouge_l(cand, ref), c.lcs, cand.size(), ref.size(), "ROUGE-L", c.candidate);
  }

  // every sequence up to length 8 against every sequence up to length 4, both
  // argument orders, plus random pairs where both sides are long
  const auto seqs = all_sequences(8);
  std::size_t short_count = 0;
  while (short_count < seqs.size() && seqs[short_count].size() <= 4) ++short_count;
  std::size_t pairs = 0;
  for (const auto& a : seqs) {
    for (std::size_t j = 0; j < short_count; ++j) {
      const auto& b = seqs[j];
      const auto want = oracle::lcs_bruteforce(a, b);
      expect(lcs_length(a, b) == want && lcs_length(b, a) == want, "LCS mismatch at pair {}", pairs);
      ++pairs;
    }
  }
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pick(short_count, seqs.size() - 1);
  for (int i = 0; i < 20000; ++i) {
    const auto& a = seqs[pick(rng)];
    const auto& b = seqs[pick(rng)];
    expect(lcs_length(a, b) == oracle::lcs_bruteforce(a, b), "LCS mismatch on random long pair");
    ++pairs;
  }
  return fmt::format("{} sentence pairs, {} sequences, {} LCS pairs", std::size(kMetricCases), seqs.size(), pairs);
}

// --- 2 -----------------------------------------------------------------------

const char* kAnswer1 =
    "The Treasure is an item located on the left side of the screen, indicated by the label 'Treasure'.";
const char* kExpect1 = "The cheese to protect is the Treasure.";
const char* kAnswer2 =
    "Distractions may be indicated by visual or audio cues in the game environment, but the specific indicator is "
    "not shown in the screenshot.";
const char* kExpect2 = "The indicator near the cat in the Cats panel indicates what distracts the cat.";

std::string spot_check() {
  const auto a = rouge_n(tokenize(kAnswer1), tokenize(kExpect1), 2);
  const auto b = rouge_n(tokenize(kAnswer2), tokenize(kExpect2), 2);
  const auto diag = [](const char* name, const RougeScore& s, double target) {
    return fmt::format("tokenization delta on {}: R2 F1 {:.4f} vs {:.4f} ({} shared of {} answer / {} expected bigrams)",
                       name, s.f1, target, s.overlap, s.candidate_total, s.reference_total);
  };
  expect(std::abs(a.f1 - 0.087) <= 0.01, "{}", diag("example 1", a, 0.087));
  expect(std::abs(b.f1 - 0.0571) <= 0.01, "{}", diag("example 2", b, 0.0571));
  return fmt::format("R2 {:.4f} and {:.4f}", a.f1, b.f1);
}

// --- 3, 4 --------------------------------------------------------------------

std::string version_means_regression() {
  const auto c = compare_tables(version_means_fixture(), "P", "L");
  const auto* h = c.for_mode(SessionMode::WithHistory);
  expect(h != nullptr, "no with-history rows");
  expect(h->min.model == "InternVL2-8B" && h->min.metric == Metric::BertScore, "min is {} {}", h->min.model,
         to_string(h->min.metric));
  expect(h->max.model == "GPT-4o" && h->max.metric == Metric::Rouge2, "max is {} {}", h->max.model,
         to_string(h->max.metric));
  expect(std::abs(h->min.improvement_pct - 1.61) <= 0.05, "min {:+.3f}%", h->min.improvement_pct);
  expect(std::abs(h->max.improvement_pct - 46.75) <= 0.05, "max {:+.3f}%", h->max.improvement_pct);
  for (const auto& cell : c.cells) {
    expect(cell.value_l > cell.value_p, "L <= P for {} {} {}", cell.model, to_string(cell.mode),
           to_string(cell.metric));
  }
  const auto* w = c.for_mode(SessionMode::WithoutHistory);
  expect(w != nullptr, "no without-history rows");
  return fmt::format("with history {:+.2f}% .. {:+.2f}%, without {:+.2f}% .. {:+.2f}%, {} cells L > P",
                     h->min.improvement_pct, h->max.improvement_pct, w->min.improvement_pct, w->max.improvement_pct,
                     c.cells.size());
}

std::string tutorial_means_regression() {
  const auto s = tutorial_means_fixture();
  for (Metric m : kMetrics) {
    expect(s.best(m) == std::vector<int>{1}, "{}: tutorial 1 not first", to_string(m));
    expect(s.worst(m) == std::vector<int>{3}, "{}: tutorial 3 not last", to_string(m));
  }
  return "tutorial 1 first, tutorial 3 last on all four metrics";
}

// --- 5 -----------------------------------------------------------------------

std::string otsu_oracle() {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 100; ++round) {
    const int n = std::uniform_int_distribution<int>(3, 500)(rng);
    const int bins = std::uniform_int_distribution<int>(3, 64)(rng);
    std::vector<double> values;
    const int modes = 1 + round % 4;
    std::uniform_real_distribution<double> centre(0.0, 1.0);
    std::vector<double> centres;
    for (int m = 0; m < modes; ++m) centres.push_back(centre(rng));
    std::normal_distribution<double> noise(0.0, 0.03 + 0.1 * (round % 3));
    for (int i = 0; i < n; ++i) {
      double v = centres[static_cast<std::size_t>(i % modes)] + noise(rng);
      if (round % 5 == 0) v = std::round(v * 10) / 10;  // coarse values leave empty bins
      values.push_back(v);
    }
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    if (*mn == *mx) values.back() += 1.0;

    const auto got = multi_otsu<double>(values, 3, bins);

    const double lo = *std::min_element(values.begin(), values.end());
    const double hi = *std::max_element(values.begin(), values.end());
    const double width = (hi - lo) / bins;
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    for (double v : values) {
      auto b = static_cast<long long>(std::floor((v - lo) / width));
      b = std::clamp<long long>(b, 0, bins - 1);
      counts[static_cast<std::size_t>(b)] += 1.0;
    }
    const auto cuts = oracle::otsu_exhaustive(counts, 3);
    expect(got.size() == 2, "round {}: {} thresholds", round, got.size());
    for (std::size_t k = 0; k < 2; ++k) {
      const double want = lo + (cuts[k] + 1) * width;
      expect(got[k] == want, "round {} (n={}, bins={}): threshold {} is {} not {}", round, n, bins, k, got[k], want);
    }
  }
  const auto t = published_thresholds();
  const FeaturePoint fig1{0.087, 0.3871, "example-1", ""};
  const FeaturePoint fig2{0.0571, 0.4898, "example-2", ""};
  expect(classify_by_thresholds(fig1, t) == QualityClass::Low, "example 1 is not Low");
  expect(classify_by_thresholds(fig2, t) == QualityClass::Low, "example 2 is not Low");
  return "100 random sets match; both published samples Low/Fail";
}

// --- 6 -----------------------------------------------------------------------

std::string kmeans_properties() {
  const double centres[3][2] = {{0.08, 0.35}, {0.32, 0.62}, {0.7, 0.9}};
  std::mt19937_64 data_rng(6);
  std::normal_distribution<double> tight(0.0, 0.02);
  std::vector<FeaturePoint> pts;
  std::vector<int> truth;
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < 30; ++i) {
      pts.push_back({centres[b][0] + tight(data_rng), centres[b][1] + tight(data_rng), "q", "m"});
      truth.push_back(b);
    }
  }
  const auto a = kmeans_fit(pts, 3, 7);
  const auto b = kmeans_fit(pts, 3, 7);
  expect(a.centroids == b.centroids && a.training_class == b.training_class, "same seed, different fit");

  Eigen::MatrixX2d x(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) x.row(static_cast<Eigen::Index>(i)) << pts[i].r2, pts[i].bs;
  std::normal_distribution<double> wide(0.0, 0.15);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto m = kmeans_fit(pts, 3, seed);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      expect(static_cast<int>(m.training_class[i]) == truth[i], "seed {}: point {} misassigned", seed, i);
    }
    // inertia on the blobs and on a noisy cloud
    Eigen::MatrixX2d noisy = x;
    for (Eigen::Index i = 0; i < noisy.rows(); ++i) noisy.row(i) += Eigen::RowVector2d(wide(data_rng), wide(data_rng));
    for (const Eigen::MatrixX2d* set : {&x, &noisy}) {
      const auto fit = lloyd_kmeans(*set, 3, seed);
      for (std::size_t i = 1; i < fit.inertia.size(); ++i) {
        expect(fit.inertia[i] <= fit.inertia[i - 1], "seed {}: inertia rose at step {}", seed, i);
      }
    }
  }
  return "deterministic; 50 seeds recover the blobs; inertia never rises";
}

// --- 7 -----------------------------------------------------------------------

std::string spearman_oracle() {
  std::mt19937_64 rng(7);
  int done = 0;
  double worst = 0.0;
  while (done < 100) {
    const auto n = static_cast<std::size_t>(std::uniform_int_distribution<int>(2, 60)(rng));
    std::uniform_int_distribution<int> d(0, 5);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = d(rng);
    for (auto& v : y) v = d(rng);
    const auto constant = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
    };
    if (constant(x) || constant(y)) continue;
    const double got = spearman(x, y);
    const double want = oracle::spearman(x, y);
    worst = std::max(worst, std::abs(got - want));
    expect(std::abs(got - want) <= 1e-12, "vector {}: {} vs {}", done, got, want);

    auto tx = x;
    for (auto& v : tx) v = std::exp(v / 2.0) - 7.0;
    auto ty = y;
    for (auto& v : ty) v = v * v * v + 3.0 * v;
    expect(std::abs(spearman(tx, ty) - got) <= 1e-12, "vector {}: not invariant under increasing maps", done);
    ++done;
  }
  return fmt::format("100 tied integer vectors, max deviation {:.1e}", worst);
}

// --- 8 -----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string strip_timestamps(std::string s) {
  static const std::regex json_ts(R"re("generated_at": "[^"]*")re");
  static const std::regex md_ts(R"(- generated: [^\n]*)");
  s = std::regex_replace(s, json_ts, "\"generated_at\": \"\"");
  return std::regex_replace(s, md_ts, "- generated:");
}

std::string golden_run() {
  TempDir dir;
  const auto corpus = (test_data() / "corpus" / "manifest.json").string();
  std::ostringstream out, err;
  const auto run = [&](const std::string& provider, const fs::path& o) {
    return run_cli({"--corpus", corpus, "--provider", provider, "--mode", "both", "--out", o.string(), "run"}, out,
                   err);
  };
  const auto outcomes = [](const fs::path& report) {
    std::set<std::string> seen;
    const auto doc = nlohmann::json::parse(slurp(report));
    for (const auto& s : doc.at("suites")) {
      for (const auto& f : s.at("frames")) {
        for (const auto& q : f.at("questions")) seen.insert(q.at("outcome").get<std::string>());
      }
    }
    return seen;
  };

  const int ok = run("mock:oracle", dir / "oracle");
  expect(ok == kExitPass, "oracle run exit {}: {}", ok, err.str());
  expect(outcomes(dir / "oracle" / "report.json") == std::set<std::string>{"pass"}, "oracle run is not all-Pass");

  const int bad = run("mock:empty", dir / "empty");
  expect(bad != kExitPass, "empty run exit 0");
  expect(outcomes(dir / "empty" / "report.json") == std::set<std::string>{"fail"}, "empty run is not all-Fail");

  const auto json1 = strip_timestamps(slurp(dir / "oracle" / "report.json"));
  const auto md1 = strip_timestamps(slurp(dir / "oracle" / "report.md"));
  expect(run("mock:oracle", dir / "oracle") == kExitPass, "second oracle run failed");
  expect(strip_timestamps(slurp(dir / "oracle" / "report.json")) == json1, "report.json differs between runs");
  expect(strip_timestamps(slurp(dir / "oracle" / "report.md")) == md1, "report.md differs between runs");
  return "oracle all-Pass exit 0, empty all-Fail exit " + std::to_string(bad) + ", reruns identical";
}

// --- 9 -----------------------------------------------------------------------

CorpusManifest gateway_corpus(int k) {
  CorpusManifest m;
  m.base_dir = test_data() / "corpus";
  m.versions.push_back({"L", "acceptance"});
  for (int i = 1; i <= k; ++i) {
    FrameCase f;
    f.frame_id = "f" + std::to_string(i);
    f.tutorial = 1;
    f.version = "L";
    f.image_path = i % 2 ? "frames/t1_f1.png" : "frames/t1_f2.png";
    f.ordinal = i;
    for (int q = 1; q <= 1 + i % 3; ++q) {
      const auto id = f.frame_id + "-q" + std::to_string(q);
      f.qa_pairs.push_back({id, "what about " + id + "?", "the answer to " + id});
    }
    m.frames.push_back(f);
  }
  return m;
}

std::string gateway_properties() {
  const auto mock_config = [] {
    ProviderConfig c = builtin_provider("mock:oracle");
    return c;
  };
  for (int k = 1; k <= 6; ++k) {
    const auto m = gateway_corpus(k);
    MockProvider p(mock_config());
    TempDir dir;
    TranscriptStore store(dir.path());
    const auto t = run_tutorial(m, "L", 1, SessionMode::WithHistory, p, store);
    std::vector<std::size_t> want;
    for (int i = 1; i <= k; ++i) want.push_back(static_cast<std::size_t>(2 * i));
    expect(p.turn_counts() == want, "k={}: turn counts {}", k, fmt::join(p.turn_counts(), ","));
    expect(!t.aborted, "k={}: session aborted", k);
  }

  const auto base = gateway_corpus(6);
  MockProvider ref_provider(mock_config());
  TempDir ref_dir;
  TranscriptStore ref_store(ref_dir.path());
  const auto ref = run_tutorial(base, "L", 1, SessionMode::WithoutHistory, ref_provider, ref_store);
  std::mt19937_64 rng(9);
  for (int round = 0; round < 10; ++round) {
    auto shuffled = base;
    std::shuffle(shuffled.frames.begin(), shuffled.frames.end(), rng);
    MockProvider p(mock_config());
    TempDir dir;
    TranscriptStore store(dir.path());
    SessionOptions opt;
    opt.parallelism = 1 + round % 4;
    const auto got = run_tutorial(shuffled, "L", 1, SessionMode::WithoutHistory, p, store, opt);
    for (std::size_t c : p.turn_counts()) expect(c == 2, "independent request with {} turns", c);
    expect(got.entries.size() == ref.entries.size(), "entry count changed under permutation");
    for (std::size_t i = 0; i < ref.entries.size(); ++i) {
      expect(got.entries[i].frame_id == ref.entries[i].frame_id &&
                 got.entries[i].prompt_hash == ref.entries[i].prompt_hash &&
                 got.entries[i].answers == ref.entries[i].answers,
             "permutation {} changed frame {}", round, ref.entries[i].frame_id);
    }
  }

  for (int n = 1; n <= 8; ++n) {
    std::vector<std::string> answers;
    for (int i = 0; i < n; ++i) answers.push_back(fmt::format("answer {} with (x) and 2. inside", i + 1));
    expect(parse_numbered_answers(format_numbered(answers), n) == answers, "round trip failed for {} answers", n);
  }
  for (const auto& [text, n] : std::vector<std::pair<std::string, int>>{
           {"1. a\n3. c", 3}, {"1. a\n2. b", 3}, {"1. a\n2. b\n3. c", 2}, {"2. b\n1. a", 2}, {"nothing", 2}}) {
    bool rejected = false;
    try {
      parse_numbered_answers(text, n);
    } catch (const ParseMismatchError&) {
      rejected = true;
    }
    expect(rejected, "parser accepted '{}' for {} questions", text, n);
  }
  return "turn schedule 2..2k for k<=6, 10 permutations identical, parser round trips and rejects";
}

struct Criterion {
  int number;
  const char* name;
  std::function<std::string()> check;
  double limit_s;  // 0 = no limit
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "metric oracles", metric_oracles, 5.0},
      {2, "published sample spot check", spot_check, 0.0},
      {3, "version comparison fixture", version_means_regression, 1.0},
      {4, "tutorial ranking fixture", tutorial_means_regression, 1.0},
      {5, "multi-Otsu oracle and published thresholds", otsu_oracle, 0.0},
      {6, "k-means properties", kmeans_properties, 0.0},
      {7, "Spearman oracle", spearman_oracle, 0.0},
      {8, "end-to-end golden run", golden_run, 10.0},
      {9, "gateway protocol", gateway_properties, 0.0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
      detail = c.check();
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (ok && c.limit_s > 0 && secs >= c.limit_s) {
      ok = false;
      detail = fmt::format("took {:.2f} s, limit {:.0f} s", secs, c.limit_s);
    }
    if (!ok) ++failed;
    fmt::print("{} {}: {} ({}; {:.2f} s)\n", ok ? "PASS" : "FAIL", c.number, c.name, detail, secs);
  }
  std::fflush(stdout);
  return failed ? 1 : 0;
}
