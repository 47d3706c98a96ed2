#include "tutorqa/http_transport.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <regex>
#include <thread>

#include <fmt/format.h>

#include "tutorqa/error.hpp"

namespace tutorqa {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) throw TransportError(fmt::format("bad URL '{}'", url), false);
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

}  // namespace

HttpResponse http_post_json(const std::string& url, const HttpHeaders& headers,
                            const std::string& body, std::chrono::milliseconds timeout) {
  const auto parts = split_url(url);
  httplib::Client client(parts.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);

  auto res = client.Post(parts.path, hdrs, body, "application/json");
  if (!res) {
    throw TransportError(fmt::format("POST {} failed: {}", url, httplib::to_string(res.error())),
                         true);
  }
  return {res->status, res->body};
}

void raise_for_status(const HttpResponse& response) {
  const int s = response.status;
  if (s >= 200 && s < 300) return;
  if (s == 401 || s == 403) throw AuthError(fmt::format("provider rejected credentials (HTTP {})", s));
  const bool retryable = s == 429 || s >= 500;
  throw TransportError(fmt::format("provider returned HTTP {}", s), retryable);
}

std::string with_retries(const RetryPolicy& policy, const std::function<std::string()>& attempt) {
  auto backoff = policy.initial_backoff;
  for (int tries = 0;; ++tries) {
    try {
      return attempt();
    } catch (const TransportError& e) {
      if (!e.retryable() || tries >= policy.max_retries) {
        throw TransportError(fmt::format("{} (after {} attempt(s))", e.what(), tries + 1),
                             e.retryable());
      }
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

}  // namespace tutorqa
