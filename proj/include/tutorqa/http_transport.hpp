#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace tutorqa {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// POSTs a JSON body. Connection failures and timeouts throw a retryable
/// TransportError; any HTTP status is returned to the caller.
HttpResponse http_post_json(const std::string& url, const HttpHeaders& headers,
                            const std::string& body, std::chrono::milliseconds timeout);

/// Maps a status to the error taxonomy: 401/403 AuthError, 429 and 5xx
/// retryable TransportError, other non-2xx non-retryable TransportError.
void raise_for_status(const HttpResponse& response);

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
};

/// Runs `attempt`, retrying retryable TransportErrors with doubling backoff.
std::string with_retries(const RetryPolicy& policy, const std::function<std::string()>& attempt);

}  // namespace tutorqa
