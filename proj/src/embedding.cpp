#include "tutorqa/embedding.hpp"

#include <cstdlib>
#include <random>

#include <fmt/format.h>

#include "tutorqa/error.hpp"
#include "tutorqa/text_metrics.hpp"
#include "tutorqa/util.hpp"

namespace tutorqa {

using nlohmann::json;

Eigen::VectorXd StubEmbedder::token_vector(std::string_view token) const {
  std::mt19937_64 rng(fnv1a64(token));
  Eigen::VectorXd v(dimension_);
  // Raw engine output maps to [-1, 1) identically on every standard library.
  for (Eigen::Index i = 0; i < dimension_; ++i) {
    v[i] = static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;
  }
  return v.normalized();
}

Eigen::MatrixXd StubEmbedder::embed_tokens(std::span<const std::string> tokens) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(tokens.size()), dimension_);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = token_vector(tokens[i]).transpose();
  }
  return out;
}

Eigen::VectorXd StubEmbedder::embed_text(std::string_view text) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dimension_);
  for (const auto& tok : tokenize(text).tokens) sum += token_vector(tok);
  const double n = sum.norm();
  return n > 0.0 ? Eigen::VectorXd(sum / n) : sum;
}

EmbeddingConfig parse_embedding_config(const json& doc) {
  EmbeddingConfig c;
  try {
    c.type = doc.value("type", std::string("stub"));
    c.endpoint = doc.value("endpoint", std::string{});
    c.model = doc.value("model", std::string{});
    c.auth_env = doc.value("auth_env", std::string{});
    c.dimension = doc.value("dimension", Eigen::Index{64});
    c.request_timeout = std::chrono::milliseconds(
        static_cast<long long>(doc.value("request_timeout_s", 30.0) * 1000.0));
    c.retry.max_retries = doc.value("max_retries", 3);
    c.retry.initial_backoff = std::chrono::milliseconds(doc.value("retry_backoff_ms", 500));
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("embedding config: {}", e.what()));
  }
  if (c.type != "stub" && c.type != "http") {
    throw ParseError(fmt::format("embedding config: unknown type '{}'", c.type));
  }
  if (c.type == "http" && c.endpoint.empty()) throw ValidationError("embedding config: endpoint required");
  if (c.dimension <= 0) throw ValidationError("embedding config: dimension must be > 0");
  return c;
}

HttpEmbedder::HttpEmbedder(EmbeddingConfig config) : config_(std::move(config)) {}

Eigen::MatrixXd HttpEmbedder::embed_batch(std::span<const std::string> inputs) {
  HttpHeaders headers;
  if (!config_.auth_env.empty()) {
    const char* key = std::getenv(config_.auth_env.c_str());
    if (!key || !*key) throw AuthError(fmt::format("environment variable {} is not set", config_.auth_env));
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  const json req{{"model", config_.model}, {"input", std::vector<std::string>(inputs.begin(), inputs.end())}};
  const auto body = with_retries(config_.retry, [&] {
    auto res = http_post_json(config_.endpoint, headers, req.dump(), config_.request_timeout);
    raise_for_status(res);
    return res.body;
  });

  try {
    const auto doc = json::parse(body);
    const auto& data = doc.at("data");
    if (data.size() != inputs.size()) {
      throw MalformedResponseError(fmt::format("embedding response has {} vectors for {} inputs",
                                               data.size(), inputs.size()));
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(inputs.size()), config_.dimension);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto vec = data[i].at("embedding").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(vec.size()) != config_.dimension) {
        throw MalformedResponseError(fmt::format("embedding dimension {} != configured {}",
                                                 vec.size(), config_.dimension));
      }
      out.row(static_cast<Eigen::Index>(i)) =
          Eigen::Map<const Eigen::RowVectorXd>(vec.data(), config_.dimension);
    }
    if (!out.allFinite()) throw MalformedResponseError("embedding contains non-finite values");
    return out;
  } catch (const json::exception& e) {
    throw MalformedResponseError(fmt::format("unexpected embedding response: {}", e.what()));
  }
}

Eigen::VectorXd HttpEmbedder::embed_text(std::string_view text) {
  const std::string input(text);
  return embed_batch({&input, 1}).row(0).transpose();
}

Eigen::MatrixXd HttpEmbedder::embed_tokens(std::span<const std::string> tokens) {
  if (tokens.empty()) return Eigen::MatrixXd(0, config_.dimension);
  return embed_batch(tokens);
}

std::unique_ptr<EmbeddingProvider> make_embedder(const EmbeddingConfig& config) {
  if (config.type == "http") return std::make_unique<HttpEmbedder>(config);
  return std::make_unique<StubEmbedder>(config.dimension);
}

}  // namespace tutorqa
