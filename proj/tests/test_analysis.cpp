#include <doctest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "test_support.hpp"
#include "tutorqa/error.hpp"
#include "tutorqa/analysis.hpp"
#include "tutorqa/fixtures.hpp"

using namespace tutorqa;

namespace {

ScoreRecord make_score(std::string model, std::string version, SessionMode mode, int tutorial, std::string qid,
                       double r1, double r2, double rl, double bs) {
  ScoreRecord s;
  s.provider = s.model = std::move(model);
  s.version = std::move(version);
  s.mode = mode;
  s.tutorial = tutorial;
  s.frame_id = "f-" + qid;
  s.question_id = std::move(qid);
  s.rouge1.f1 = r1;
  s.rouge2.f1 = r2;
  s.rougeL.f1 = rl;
  s.semantic.f1 = bs;
  return s;
}

std::vector<double> random_ints(std::mt19937_64& rng, std::size_t n, int hi) {
  std::uniform_int_distribution<int> d(0, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

bool constant(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

TEST_CASE("average ranks") {
  const Eigen::Vector4d x(1, 2, 2, 4);
  CHECK(average_ranks(x) == Eigen::Vector4d(1, 2.5, 2.5, 4));
  CHECK(average_ranks(x, true) == Eigen::Vector4d(4, 2.5, 2.5, 1));
}

TEST_CASE("spearman basics") {
  const std::vector<double> a{1, 2, 3}, b{10, 20, 30}, c{3, 2, 1};
  CHECK(spearman(a, b) == doctest::Approx(1.0));
  CHECK(spearman(a, c) == doctest::Approx(-1.0));
  const std::vector<double> x{1, 2, 2, 4}, y{1, 3, 2, 4};
  CHECK(spearman(x, y) == doctest::Approx(oracle::spearman(x, y)).epsilon(1e-12));
  CHECK_THROWS_AS(spearman(a, std::vector<double>{1, 2}), ValidationError);
  CHECK_THROWS_AS(spearman(a, std::vector<double>{5, 5, 5}), DataError);
  CHECK_THROWS_AS(spearman(std::vector<double>{1}, std::vector<double>{1}), DataError);
}

TEST_CASE("spearman matches the rank-then-Pearson oracle") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 500; ++i) {
    const auto n = 2 + rng() % 40;
    auto x = random_ints(rng, n, 6);
    auto y = random_ints(rng, n, 6);
    if (constant(x) || constant(y)) continue;
    REQUIRE(std::abs(spearman(x, y) - oracle::spearman(x, y)) <= 1e-12);
  }
}

TEST_CASE("spearman is invariant under increasing transforms") {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> d;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(30), y(30);
    for (auto& v : x) v = d(rng);
    for (auto& v : y) v = std::round(d(rng) * 2);
    if (constant(y)) continue;
    const double base = spearman(x, y);
    auto tx = x;
    for (auto& v : tx) v = std::exp(v) * 3 + 1;
    auto ty = y;
    for (auto& v : ty) v = v * v * v + v;
    CHECK(std::abs(spearman(tx, ty) - base) <= 1e-12);
  }
}

TEST_CASE("fixture table comparison extremes") {
  const auto c = compare_tables(version_means_fixture(), "P", "L");
  CHECK(c.cells.size() == 13 * 4);
  const auto* h = c.for_mode(SessionMode::WithHistory);
  REQUIRE(h);
  CHECK(h->min.model == "InternVL2-8B");
  CHECK(h->min.metric == Metric::BertScore);
  CHECK(std::abs(h->min.improvement_pct - 1.61) <= 0.05);
  CHECK(h->max.model == "GPT-4o");
  CHECK(h->max.metric == Metric::Rouge2);
  CHECK(std::abs(h->max.improvement_pct - 46.75) <= 0.05);
  const auto* w = c.for_mode(SessionMode::WithoutHistory);
  REQUIRE(w);
  CHECK(std::abs(w->min.improvement_pct - 2.10) <= 0.05);
  CHECK(std::abs(w->max.improvement_pct - 45.21) <= 0.05);
  CHECK(c.all_improved());
}

TEST_CASE("identical versions improve by exactly zero and scaling changes nothing") {
  auto table = version_means_fixture();
  MetricTable same;
  for (const auto& r : table.rows) {
    if (r.version != "P") continue;
    same.rows.push_back(r);
    auto l = r;
    l.version = "L";
    same.rows.push_back(l);
  }
  const auto zero = compare_tables(same, "P", "L");
  for (const auto& c : zero.cells) CHECK(c.improvement_pct == 0.0);
  CHECK_FALSE(zero.all_improved());

  auto scaled = table;
  for (auto& r : scaled.rows) r.means *= 2.5;
  const auto a = compare_tables(table, "P", "L");
  const auto b = compare_tables(scaled, "P", "L");
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(b.cells[i].improvement_pct == doctest::Approx(a.cells[i].improvement_pct).epsilon(1e-12));
  }
}

TEST_CASE("unpaired fixture rows are rejected") {
  auto table = version_means_fixture();
  table.rows.pop_back();
  CHECK_THROWS_AS(compare_tables(table, "P", "L"), DataError);
}

TEST_CASE("version comparison uses common questions only") {
  const auto corpus = load_manifest(std::filesystem::path(TUTORQA_DATA_DIR) / "sample" / "manifest.json");
  std::set<std::string> common;
  for (const auto& q : common_questions(corpus, "P", "L")) common.insert(q.question_id);

  std::vector<ScoreRecord> scores;
  for (const auto& f : corpus.frames) {
    for (const auto& q : f.qa_pairs) {
      const bool is_common = common.count(q.question_id) > 0;
      const double v = f.version == "P" ? 0.2 : (is_common ? 0.3 : 0.9);
      scores.push_back(make_score("m", f.version, SessionMode::WithHistory, f.tutorial, q.question_id, v, v, v, v));
    }
  }
  const auto c = compare_versions(scores, corpus, "P", "L");
  REQUIRE(c.cells.size() == 4);
  for (const auto& cell : c.cells) {
    CHECK(cell.value_l == doctest::Approx(0.3));
    CHECK(cell.improvement_pct == doctest::Approx(50.0));
    CHECK(cell.question_count == common.size());
  }
  CHECK_THROWS_AS(compare_versions(scores, corpus, "P", "L", SessionMode::WithoutHistory), DataError);

  std::vector<ScoreRecord> only_l;
  for (const auto& s : scores) {
    if (s.version == "L") only_l.push_back(s);
  }
  CHECK_THROWS_AS(compare_versions(only_l, corpus, "P", "L"), DataError);
}

TEST_CASE("fixture tutorial ranking") {
  const auto s = tutorial_means_fixture();
  for (Metric m : kMetrics) {
    CHECK(s.best(m) == std::vector<int>{1});
    CHECK(s.worst(m) == std::vector<int>{3});
  }
}

TEST_CASE("tutorial means: single tutorial, ties and row order") {
  std::vector<ScoreRecord> one{make_score("a", "L", SessionMode::WithHistory, 2, "q1", 0.1, 0.2, 0.3, 0.4)};
  const auto s1 = tutorial_means(one);
  REQUIRE(s1.rows.size() == 1);
  CHECK(s1.rows[0].ranks == Eigen::Vector4d::Ones());

  std::vector<ScoreRecord> tied{make_score("a", "L", SessionMode::WithHistory, 1, "q1", 0.5, 0.5, 0.5, 0.5),
                                make_score("a", "L", SessionMode::WithHistory, 2, "q2", 0.5, 0.5, 0.5, 0.5)};
  for (const auto& r : tutorial_means(tied).rows) CHECK(r.ranks == Eigen::Vector4d::Constant(1.5));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u;
  std::vector<ScoreRecord> many;
  for (int i = 0; i < 60; ++i) {
    many.push_back(make_score(i % 2 ? "a" : "b", "L", SessionMode::WithHistory, 1 + i % 4, "q" + std::to_string(i),
                              u(rng), u(rng), u(rng), u(rng)));
  }
  const auto a = tutorial_means(many);
  std::shuffle(many.begin(), many.end(), rng);
  const auto b = tutorial_means(many);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].means.isApprox(b.rows[i].means, 1e-12));
    CHECK(a.rows[i].ranks == b.rows[i].ranks);
  }
}

TEST_CASE("model agreement") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u;
  std::vector<ScoreRecord> scores;
  std::vector<std::array<double, 4>> base;
  for (int q = 0; q < 25; ++q) base.push_back({u(rng), u(rng), u(rng), u(rng)});
  for (int q = 0; q < 25; ++q) {
    const auto& v = base[static_cast<std::size_t>(q)];
    const auto id = "q" + std::to_string(q);
    scores.push_back(make_score("alpha", "L", SessionMode::WithHistory, 1, id, v[0], v[1], v[2], v[3]));
    // strictly increasing transform of alpha
    scores.push_back(make_score("beta", "L", SessionMode::WithHistory, 1, id, v[0] * 0.5 + 0.1, std::sqrt(v[1]),
                                v[2] * v[2], std::exp(v[3])));
    scores.push_back(make_score("gamma", "L", SessionMode::WithHistory, 1, id, u(rng), u(rng), u(rng), u(rng)));
  }
  const auto a = model_agreement(scores);
  REQUIRE(a.models == std::vector<std::string>{"alpha", "beta", "gamma"});
  CHECK(a.mean(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((a.mean - a.mean.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  for (int i = 0; i < 3; ++i) CHECK(a.mean(i, i) == 1.0);

  // alpha vs gamma from the oracle
  double expected = 0.0;
  for (Metric m : kMetrics) {
    std::vector<double> x, y;
    for (const auto& s : scores) {
      if (s.model == "alpha") x.push_back(metric_value(s, m));
      if (s.model == "gamma") y.push_back(metric_value(s, m));
    }
    expected += oracle::spearman(x, y) / 4.0;
  }
  CHECK(std::abs(a.mean(0, 2) - expected) <= 1e-12);
  CHECK(a.mean.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("model agreement needs aligned question sets") {
  std::vector<ScoreRecord> s{make_score("a", "L", SessionMode::WithHistory, 1, "q1", .1, .2, .3, .4),
                             make_score("a", "L", SessionMode::WithHistory, 1, "q2", .2, .3, .4, .5),
                             make_score("b", "L", SessionMode::WithHistory, 1, "q1", .1, .2, .3, .4)};
  try {
    model_agreement(s);
    FAIL("expected misalignment");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("b lacks q2") != std::string::npos);
  }
  s.pop_back();
  CHECK_THROWS_AS(model_agreement(s), DataError);
}
