#pragma once

#include <chrono>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "tutorqa/http_transport.hpp"

namespace tutorqa {

/// Text -> vector. Implementations are deterministic per (provider, model)
/// and safe for concurrent calls.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Eigen::VectorXd embed_text(std::string_view text) = 0;
  /// One row per token.
  virtual Eigen::MatrixXd embed_tokens(std::span<const std::string> tokens) = 0;
  virtual Eigen::Index dimension() const noexcept = 0;
};

/// Offline embedder. Each token maps to a pseudo-random unit vector seeded
/// from its hash; a text maps to the normalised sum of its token vectors.
class StubEmbedder final : public EmbeddingProvider {
 public:
  explicit StubEmbedder(Eigen::Index dimension = 64) : dimension_(dimension) {}

  Eigen::VectorXd embed_text(std::string_view text) override;
  Eigen::MatrixXd embed_tokens(std::span<const std::string> tokens) override;
  Eigen::Index dimension() const noexcept override { return dimension_; }

  Eigen::VectorXd token_vector(std::string_view token) const;

 private:
  Eigen::Index dimension_;
};

struct EmbeddingConfig {
  std::string type = "stub";  ///< "stub" | "http"
  std::string endpoint;
  std::string model;
  std::string auth_env;
  Eigen::Index dimension = 64;
  std::chrono::milliseconds request_timeout{30000};
  RetryPolicy retry;
};

EmbeddingConfig parse_embedding_config(const nlohmann::json& doc);

/// Embeddings-style HTTP API: {"model", "input": [texts]} ->
/// {"data": [{"embedding": [...]}, ...]}. Tokens are embedded one text each.
class HttpEmbedder final : public EmbeddingProvider {
 public:
  explicit HttpEmbedder(EmbeddingConfig config);

  Eigen::VectorXd embed_text(std::string_view text) override;
  Eigen::MatrixXd embed_tokens(std::span<const std::string> tokens) override;
  Eigen::Index dimension() const noexcept override { return config_.dimension; }

 private:
  Eigen::MatrixXd embed_batch(std::span<const std::string> inputs);

  EmbeddingConfig config_;
};

std::unique_ptr<EmbeddingProvider> make_embedder(const EmbeddingConfig& config);

/// Cosine similarity; zero when either vector has zero norm.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine(const Eigen::MatrixBase<DerivedA>& a,
                                 const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) return Scalar(0);
  return a.dot(b) / (na * nb);
}

template <typename Scalar>
struct GreedyMatch {
  Scalar precision{0};
  Scalar recall{0};
  Scalar f1{0};
};

/// BERTScore-style greedy matching over row embeddings. Precision averages,
/// over candidate rows, the best cosine to any reference row; recall does the
/// converse. F1 is their harmonic mean, zero when precision + recall <= 0.
template <typename DerivedC, typename DerivedR>
GreedyMatch<typename DerivedC::Scalar> greedy_match(const Eigen::MatrixBase<DerivedC>& candidate,
                                                    const Eigen::MatrixBase<DerivedR>& reference) {
  using Scalar = typename DerivedC::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  GreedyMatch<Scalar> out;
  if (candidate.rows() == 0 || reference.rows() == 0) return out;

  auto normalized = [](const auto& m) {
    Matrix n = m;
    for (Eigen::Index i = 0; i < n.rows(); ++i) {
      const Scalar len = n.row(i).norm();
      if (len > Scalar(0)) n.row(i) /= len;
    }
    return n;
  };
  const Matrix sim = normalized(candidate) * normalized(reference).transpose();
  out.precision = sim.rowwise().maxCoeff().mean();
  out.recall = sim.colwise().maxCoeff().mean();
  const Scalar sum = out.precision + out.recall;
  out.f1 = sum > Scalar(0) ? Scalar(2) * out.precision * out.recall / sum : Scalar(0);
  return out;
}

}  // namespace tutorqa
