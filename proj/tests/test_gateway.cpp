#include <doctest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <random>
#include <thread>

#include "test_support.hpp"
#include "tutorqa/error.hpp"
#include "tutorqa/gateway.hpp"
#include "tutorqa/provider.hpp"
#include "tutorqa/session.hpp"
#include "tutorqa/transcript_store.hpp"

using namespace tutorqa;

namespace {

// One tutorial of `k` frames reusing the fixture images.
CorpusManifest synthetic_corpus(int k, int questions_per_frame = 2) {
  CorpusManifest m;
  m.base_dir = test_data() / "corpus";
  m.versions.push_back({"L", "synthetic"});
  for (int i = 1; i <= k; ++i) {
    FrameCase f;
    f.frame_id = "f" + std::to_string(i);
    f.tutorial = 1;
    f.version = "L";
    f.image_path = i % 2 ? "frames/t1_f1.png" : "frames/t1_f2.png";
    f.ordinal = i;
    for (int q = 1; q <= questions_per_frame; ++q) {
      const auto id = f.frame_id + "-q" + std::to_string(q);
      f.qa_pairs.push_back({id, "question " + id + "?", "answer for " + id});
    }
    m.frames.push_back(f);
  }
  return m;
}

ProviderConfig mock(MockMode mode, std::string name = "mock") {
  ProviderConfig c;
  c.name = name;
  c.model = name;
  c.kind = ProviderKind::Mock;
  c.mock.mode = mode;
  return c;
}

struct Server {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  Server() = default;
  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~Server() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"; }
};

ProviderConfig http_config(const std::string& url) {
  ProviderConfig c;
  c.name = "http";
  c.kind = ProviderKind::ChatCompletions;
  c.endpoint = url;
  c.model = "test-model";
  c.auth_env = "TUTORQA_TEST_KEY";
  c.image_width = 32;
  c.image_height = 18;
  c.request_timeout = std::chrono::milliseconds(5000);
  c.retry.max_retries = 2;
  c.retry.initial_backoff = std::chrono::milliseconds(1);
  return c;
}

const char* kOk = R"({"choices":[{"message":{"role":"assistant","content":"1. yes\n2. no"}}]})";

}  // namespace

TEST_CASE("prompt layout per mode") {
  const auto m = synthetic_corpus(2);
  const auto& f = m.frames[0];
  const auto turns = build_prompt(m, f, SessionMode::WithoutHistory);
  REQUIRE(turns.size() == 2);
  CHECK(turns[0].role == Role::System);
  CHECK(turns[0].text == kSystemPrompt);
  CHECK(turns[1].role == Role::User);
  CHECK(turns[1].text == "1. question f1-q1?\n2. question f1-q2?");
  REQUIRE(turns[1].image);
  CHECK(*turns[1].image == m.resolve_image(f));

  std::vector<ChatTurn> history = turns;
  history.push_back({Role::Assistant, "1. a\n2. b", std::nullopt});
  const auto next = build_prompt(m, m.frames[1], SessionMode::WithHistory, history);
  CHECK(next.size() == 4);
  CHECK(next.back().role == Role::User);
}

TEST_CASE("history sessions grow by two turns per frame") {
  for (int k : {1, 3, 6}) {
    const auto m = synthetic_corpus(k);
    MockProvider p(mock(MockMode::Oracle));
    TempDir dir;
    TranscriptStore store(dir.path());
    const auto t = run_tutorial(m, "L", 1, SessionMode::WithHistory, p, store);
    std::vector<std::size_t> expected;
    for (int i = 1; i <= k; ++i) expected.push_back(static_cast<std::size_t>(2 * i));
    CHECK(p.turn_counts() == expected);
    CHECK_FALSE(t.aborted);
    for (const auto& e : t.entries) CHECK(e.status == EntryStatus::Ok);
  }
}

TEST_CASE("independent sessions do not depend on frame order or threading") {
  const auto base = synthetic_corpus(7);
  MockProvider p1(mock(MockMode::Oracle));
  TempDir d1;
  TranscriptStore s1(d1.path());
  const auto ref = run_tutorial(base, "L", 1, SessionMode::WithoutHistory, p1, s1);
  for (std::size_t c : p1.turn_counts()) CHECK(c == 2);

  std::mt19937_64 rng(1);
  for (int round = 0; round < 5; ++round) {
    auto shuffled = base;
    std::shuffle(shuffled.frames.begin(), shuffled.frames.end(), rng);
    MockProvider p2(mock(MockMode::Oracle));
    TempDir d2;
    TranscriptStore s2(d2.path());
    SessionOptions opt;
    opt.parallelism = 1 + round;
    const auto got = run_tutorial(shuffled, "L", 1, SessionMode::WithoutHistory, p2, s2, opt);
    REQUIRE(got.entries.size() == ref.entries.size());
    for (std::size_t i = 0; i < ref.entries.size(); ++i) {
      CHECK(got.entries[i].frame_id == ref.entries[i].frame_id);
      CHECK(got.entries[i].prompt_hash == ref.entries[i].prompt_hash);
      CHECK(got.entries[i].cache_key == ref.entries[i].cache_key);
      CHECK(got.entries[i].answers == ref.entries[i].answers);
    }
  }
}

TEST_CASE("numbered answers round trip through the formatter") {
  std::mt19937_64 rng(9);
  const std::vector<std::string> words{"press", "the", "red", "button", "cats", "panel", "12", "(a)", "x.y"};
  for (int round = 0; round < 300; ++round) {
    const int n = 1 + static_cast<int>(rng() % 7);
    std::vector<std::string> answers;
    for (int i = 0; i < n; ++i) {
      std::string a;
      const int len = 1 + static_cast<int>(rng() % 6);
      for (int w = 0; w < len; ++w) a += (w ? " " : "") + words[rng() % words.size()];
      answers.push_back(a);
    }
    REQUIRE(parse_numbered_answers(format_numbered(answers), n) == answers);
  }
}

TEST_CASE("numbered answer parser variants") {
  using V = std::vector<std::string>;
  CHECK(parse_numbered_answers("1) a\r\n2) b\r\n", 2) == V{"a", "b"});
  CHECK(parse_numbered_answers("**1.** a\n**2.** b", 2) == V{"a", "b"});
  CHECK(parse_numbered_answers("Sure! Here you go:\n1. a\n2. b", 2) == V{"a", "b"});
  CHECK(parse_numbered_answers("1. first line\nsecond line\n2. b", 2) == V{"first line\nsecond line", "b"});
  CHECK(parse_numbered_answers("  just one answer  ", 1) == V{"just one answer"});
  CHECK(parse_numbered_answers("", 1) == V{""});
}

TEST_CASE("numbered answer parser rejects gaps and count mismatches") {
  CHECK_THROWS_AS(parse_numbered_answers("1. a\n3. c", 3), ParseMismatchError);
  CHECK_THROWS_AS(parse_numbered_answers("1. a\n2. b", 3), ParseMismatchError);
  CHECK_THROWS_AS(parse_numbered_answers("1. a\n2. b\n3. c", 2), ParseMismatchError);
  CHECK_THROWS_AS(parse_numbered_answers("2. b\n1. a", 2), ParseMismatchError);
  CHECK_THROWS_AS(parse_numbered_answers("1. a\n1. a", 2), ParseMismatchError);
  CHECK_THROWS_AS(parse_numbered_answers("no markers here", 2), ParseMismatchError);
  CHECK_THROWS_AS(parse_numbered_answers("", 2), ParseMismatchError);
}

TEST_CASE("cached answers are reused and --no-cache re-asks") {
  const auto m = synthetic_corpus(3);
  TempDir dir;
  {
    MockProvider p(mock(MockMode::Oracle));
    TranscriptStore store(dir.path());
    run_tutorial(m, "L", 1, SessionMode::WithHistory, p, store);
    CHECK(p.calls() == 3);
  }
  {
    MockProvider p(mock(MockMode::Oracle));
    TranscriptStore store(dir.path());
    const auto t = run_tutorial(m, "L", 1, SessionMode::WithHistory, p, store);
    CHECK(p.calls() == 0);
    for (const auto& e : t.entries) CHECK(e.cache_hit);
  }
  {
    MockProvider p(mock(MockMode::Oracle));
    TranscriptStore store(dir.path());
    SessionOptions opt;
    opt.use_cache = false;
    run_tutorial(m, "L", 1, SessionMode::WithHistory, p, store, opt);
    CHECK(p.calls() == 3);
  }
}

TEST_CASE("provider errors abort history sessions and are not cached") {
  const auto m = synthetic_corpus(3);
  auto cfg = mock(MockMode::Table);
  cfg.mock.table = {{"f1", "1. a\n2. b"}, {"f3", "1. a\n2. b"}};
  TempDir dir;
  {
    MockProvider p(cfg);
    TranscriptStore store(dir.path());
    const auto t = run_tutorial(m, "L", 1, SessionMode::WithHistory, p, store);
    CHECK(t.aborted);
    REQUIRE(t.entries.size() == 2);
    CHECK(t.entries[1].status == EntryStatus::Error);
  }
  {
    MockProvider p(cfg);
    TranscriptStore store(dir.path());
    const auto t = run_tutorial(m, "L", 1, SessionMode::WithoutHistory, p, store);
    CHECK_FALSE(t.aborted);
    REQUIRE(t.entries.size() == 3);
    CHECK(t.entries[1].status == EntryStatus::Error);
    CHECK(t.entries[2].status == EntryStatus::Ok);
  }
  {
    // f1 was cached by the history run; f2 must be asked again.
    MockProvider p(cfg);
    TranscriptStore store(dir.path());
    run_tutorial(m, "L", 1, SessionMode::WithHistory, p, store);
    CHECK(p.calls() == 1);
  }
}

TEST_CASE("unparseable replies are recorded and cached") {
  const auto m = synthetic_corpus(2);
  auto cfg = mock(MockMode::Table);
  cfg.mock.table = {{"f1", "only one line"}, {"f2", "1. a\n2. b"}};
  TempDir dir;
  MockProvider p(cfg);
  TranscriptStore store(dir.path());
  const auto t = run_tutorial(m, "L", 1, SessionMode::WithoutHistory, p, store);
  CHECK(t.entries[0].status == EntryStatus::ParseFailed);
  CHECK(t.entries[0].answers.size() == 2);
  CHECK(t.entries[0].answers[0].actual_answer.empty());
  CHECK(t.entries[1].status == EntryStatus::Ok);
  MockProvider again(cfg);
  TranscriptStore store2(dir.path());
  run_tutorial(m, "L", 1, SessionMode::WithoutHistory, again, store2);
  CHECK(again.calls() == 0);
}

TEST_CASE("cache keys and the store file") {
  CacheKeyParts a{"p", "m", SessionMode::WithHistory, "L", 1, "f1", "h"};
  auto b = a;
  CHECK(cache_key(a) == cache_key(b));
  b.mode = SessionMode::WithoutHistory;
  CHECK(cache_key(a) != cache_key(b));

  TempDir dir;
  {
    TranscriptStore store(dir.path());
    store.append({cache_key(a), a, "t", "1. x", {{"q", "x"}}, EntryStatus::Ok, ""});
  }
  // a torn final line is ignored
  std::ofstream(TranscriptStore(dir.path()).file_for("p", "L", SessionMode::WithHistory), std::ios::app)
      << "{\"key\": \"trunc";
  TranscriptStore store(dir.path());
  const auto hit = store.lookup(a);
  REQUIRE(hit);
  CHECK(hit->raw_answer == "1. x");
  CHECK_FALSE(store.lookup(b));
}

TEST_CASE("transcript json round trip") {
  const auto m = synthetic_corpus(2);
  MockProvider p(mock(MockMode::Oracle));
  TempDir dir;
  TranscriptStore store(dir.path());
  const auto t = run_tutorial(m, "L", 1, SessionMode::WithHistory, p, store);
  const auto back = transcript_from_json(to_json(t));
  CHECK(to_json(back) == to_json(t));
}

TEST_CASE("HTTP provider happy path and request body") {
  Server s;
  std::atomic<int> hits{0};
  std::string auth;
  std::string body;
  s.server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    auth = req.get_header_value("Authorization");
    body = req.body;
    res.set_content(kOk, "application/json");
  });
  s.start();
  setenv("TUTORQA_TEST_KEY", "secret-key", 1);

  const auto m = synthetic_corpus(1);
  HttpChatProvider p(http_config(s.url()));
  const auto turns = build_prompt(m, m.frames[0], SessionMode::WithoutHistory);
  CHECK(p.ask(turns, AskContext{&m.frames[0]}) == "1. yes\n2. no");
  CHECK(hits == 1);
  CHECK(auth == "Bearer secret-key");
  const auto doc = nlohmann::json::parse(body);
  CHECK(doc["model"] == "test-model");
  CHECK(doc["temperature"] == 0.0);
  CHECK(doc["messages"].size() == 2);
  CHECK(doc["messages"][1]["content"][1]["image_url"]["url"].get<std::string>().rfind("data:image/png;base64,", 0) == 0);
  CHECK(p.build_request_body(turns) == body);
  HttpChatProvider other(http_config(s.url()));
  CHECK(other.build_request_body(turns) == body);
}

TEST_CASE("HTTP provider retries 429 and 5xx, not 4xx") {
  Server s;
  std::atomic<int> hits{0};
  std::atomic<int> fail_first{0};
  std::atomic<int> status{429};
  s.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (hits++ < fail_first) {
      res.status = status;
      res.set_content("{}", "application/json");
      return;
    }
    res.set_content(kOk, "application/json");
  });
  s.start();
  setenv("TUTORQA_TEST_KEY", "k", 1);
  HttpChatProvider p(http_config(s.url()));
  const std::vector<ChatTurn> turns{{Role::User, "hi", std::nullopt}};

  fail_first = 2;
  CHECK(p.ask(turns, {}) == "1. yes\n2. no");
  CHECK(hits == 3);

  hits = 0;
  fail_first = 100;
  status = 503;
  CHECK_THROWS_AS(p.ask(turns, {}), TransportError);
  CHECK(hits == 3);  // first attempt + 2 retries

  hits = 0;
  status = 401;
  CHECK_THROWS_AS(p.ask(turns, {}), AuthError);
  CHECK(hits == 1);

  hits = 0;
  status = 400;
  try {
    p.ask(turns, {});
    FAIL("expected a TransportError");
  } catch (const TransportError& e) {
    CHECK_FALSE(e.retryable());
  }
  CHECK(hits == 1);
}

TEST_CASE("HTTP provider malformed responses and missing credentials") {
  Server s;
  s.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"choices\": []}", "application/json");
  });
  s.start();
  setenv("TUTORQA_TEST_KEY", "k", 1);
  HttpChatProvider p(http_config(s.url()));
  const std::vector<ChatTurn> turns{{Role::User, "hi", std::nullopt}};
  CHECK_THROWS_AS(p.ask(turns, {}), MalformedResponseError);
  CHECK_THROWS_AS(parse_chat_response("not json"), MalformedResponseError);

  unsetenv("TUTORQA_TEST_KEY");
  CHECK_THROWS_AS(p.ask(turns, {}), AuthError);
}

TEST_CASE("HTTP provider connection failure is a retryable transport error") {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
    probe.stop();  // closes the listening socket, so connects are refused
  }
  auto cfg = http_config("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions");
  cfg.auth_env.clear();
  cfg.request_timeout = std::chrono::milliseconds(500);
  HttpChatProvider p(cfg);
  const std::vector<ChatTurn> turns{{Role::User, "hi", std::nullopt}};
  try {
    p.ask(turns, {});
    FAIL("expected a TransportError");
  } catch (const TransportError& e) {
    CHECK(e.retryable());
  }
}

TEST_CASE("provider config parsing") {
  const auto c = parse_provider_config(nlohmann::json::parse(R"({
    "name": "gpt", "type": "chat-completions", "endpoint": "https://example.invalid/v1/chat/completions",
    "model": "gpt-4o", "auth_env": "OPENAI_API_KEY", "max_retries": 5, "retry_backoff_ms": 10,
    "request_timeout_s": 3, "parallelism": 4})"));
  CHECK(c.name == "gpt");
  CHECK(c.model == "gpt-4o");
  CHECK(c.retry.max_retries == 5);
  CHECK(c.parallelism == 4);
  CHECK(c.request_timeout == std::chrono::milliseconds(3000));
  CHECK_THROWS(parse_provider_config(nlohmann::json::parse(R"({"name": "x", "type": "chat-completions"})")));
  CHECK(builtin_provider("mock:oracle").name == "mock-oracle");
  CHECK_THROWS_AS(builtin_provider("mock:nope"), ValidationError);
}
