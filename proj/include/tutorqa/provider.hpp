#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tutorqa/corpus.hpp"
#include "tutorqa/gateway.hpp"
#include "tutorqa/http_transport.hpp"

namespace tutorqa {

enum class ProviderKind { ChatCompletions, Mock };

enum class MockMode {
  Oracle,  ///< answers with the expected answers verbatim
  Empty,   ///< answers with an empty reply
  Table,   ///< canned raw reply per frame_id
};

struct MockSettings {
  MockMode mode = MockMode::Oracle;
  std::map<std::string, std::string> table;  ///< frame_id -> raw reply
};

struct ProviderConfig {
  std::string name;
  ProviderKind kind = ProviderKind::ChatCompletions;
  std::string endpoint;
  std::string model;
  std::string auth_env;  ///< name of the environment variable holding the key
  double temperature = 0.0;
  int max_answer_tokens = 512;
  int image_width = 1920;
  int image_height = 1080;
  std::chrono::milliseconds request_timeout{60000};
  RetryPolicy retry;
  int parallelism = 1;
  MockSettings mock;
};

/// Throws ValidationError on negative temperature or non-positive sizes.
void validate(const ProviderConfig& config);

/// Reads one provider entry. Mock tables may be inline objects or a path
/// (relative to `base_dir`) to a JSON object of frame_id -> reply text or
/// reply list.
ProviderConfig parse_provider_config(const nlohmann::json& entry,
                                     const std::filesystem::path& base_dir = {});

/// "mock:oracle" / "mock:empty" shorthands.
ProviderConfig builtin_provider(std::string_view name);

/// Extra information a provider may use; live providers ignore it.
struct AskContext {
  const FrameCase* frame = nullptr;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  /// Returns the assistant text for the given conversation. Must be safe to
  /// call concurrently.
  virtual std::string ask(std::span<const ChatTurn> turns, const AskContext& context) = 0;
  virtual const ProviderConfig& config() const noexcept = 0;
};

class MockProvider final : public ChatProvider {
 public:
  explicit MockProvider(ProviderConfig config);

  std::string ask(std::span<const ChatTurn> turns, const AskContext& context) override;
  const ProviderConfig& config() const noexcept override { return config_; }

  int calls() const noexcept { return calls_.load(); }
  /// Turn count of every request received, in call order.
  std::vector<std::size_t> turn_counts() const;

 private:
  ProviderConfig config_;
  std::atomic<int> calls_{0};
  mutable std::mutex mutex_;
  std::vector<std::size_t> turn_counts_;
};

/// Chat-completions style HTTP provider: role-tagged messages, inline
/// base64 PNG images resized to the configured dimensions.
class HttpChatProvider final : public ChatProvider {
 public:
  explicit HttpChatProvider(ProviderConfig config);

  std::string ask(std::span<const ChatTurn> turns, const AskContext& context) override;
  const ProviderConfig& config() const noexcept override { return config_; }

  /// Request payload; byte-identical for identical turns and config.
  std::string build_request_body(std::span<const ChatTurn> turns);

 private:
  const std::string& encoded_image(const std::filesystem::path& path);

  ProviderConfig config_;
  std::mutex image_mutex_;
  std::map<std::string, std::string> image_cache_;
};

/// Extracts choices[0].message.content; throws MalformedResponseError.
std::string parse_chat_response(const std::string& body);

std::unique_ptr<ChatProvider> make_provider(const ProviderConfig& config);

}  // namespace tutorqa
