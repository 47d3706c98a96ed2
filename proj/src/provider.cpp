#include "tutorqa/provider.hpp"

#include <cstdlib>

#include <fmt/format.h>

#include "tutorqa/error.hpp"
#include "tutorqa/image.hpp"
#include "tutorqa/util.hpp"

namespace tutorqa {

using nlohmann::json;

void validate(const ProviderConfig& c) {
  if (c.name.empty()) throw ValidationError("provider: name must not be empty");
  if (c.temperature < 0.0) throw ValidationError(fmt::format("provider {}: temperature < 0", c.name));
  if (c.image_width <= 0 || c.image_height <= 0) {
    throw ValidationError(fmt::format("provider {}: image dimensions must be > 0", c.name));
  }
  if (c.parallelism < 1) throw ValidationError(fmt::format("provider {}: parallelism < 1", c.name));
  if (c.kind == ProviderKind::ChatCompletions && c.endpoint.empty()) {
    throw ValidationError(fmt::format("provider {}: endpoint required", c.name));
  }
}

namespace {

std::map<std::string, std::string> read_mock_table(const json& table) {
  if (!table.is_object()) throw ParseError("mock table must be an object of frame_id -> reply");
  std::map<std::string, std::string> out;
  for (const auto& [frame_id, reply] : table.items()) {
    if (reply.is_string()) {
      out[frame_id] = reply.get<std::string>();
    } else if (reply.is_array()) {
      out[frame_id] = format_numbered(reply.get<std::vector<std::string>>());
    } else {
      throw ParseError(fmt::format("mock table entry {} must be a string or list", frame_id));
    }
  }
  return out;
}

MockMode parse_mock_mode(std::string_view s) {
  if (s == "oracle") return MockMode::Oracle;
  if (s == "empty") return MockMode::Empty;
  if (s == "table") return MockMode::Table;
  throw ParseError(fmt::format("unknown mock mode '{}'", s));
}

}  // namespace

ProviderConfig parse_provider_config(const json& e, const std::filesystem::path& base_dir) {
  ProviderConfig c;
  try {
    c.name = e.at("name").get<std::string>();
    const auto type = e.value("type", std::string("chat-completions"));
    if (type == "mock") {
      c.kind = ProviderKind::Mock;
    } else if (type == "chat-completions" || type == "openai") {
      c.kind = ProviderKind::ChatCompletions;
    } else {
      throw ParseError(fmt::format("provider {}: unknown type '{}'", c.name, type));
    }
    c.endpoint = e.value("endpoint", std::string{});
    c.model = e.value("model", c.name);
    c.auth_env = e.value("auth_env", std::string{});
    c.temperature = e.value("temperature", 0.0);
    c.max_answer_tokens = e.value("max_answer_tokens", 512);
    c.image_width = e.value("image_width", 1920);
    c.image_height = e.value("image_height", 1080);
    c.request_timeout = std::chrono::milliseconds(
        static_cast<long long>(e.value("request_timeout_s", 60.0) * 1000.0));
    c.retry.max_retries = e.value("max_retries", 3);
    c.retry.initial_backoff = std::chrono::milliseconds(e.value("retry_backoff_ms", 500));
    c.parallelism = e.value("parallelism", 1);
    if (auto it = e.find("mock"); it != e.end()) {
      c.mock.mode = parse_mock_mode(it->value("mode", std::string("oracle")));
      if (auto t = it->find("table"); t != it->end()) {
        if (t->is_string()) {
          const auto path = base_dir / t->get<std::string>();
          c.mock.table = read_mock_table(json::parse(read_file(path)));
        } else {
          c.mock.table = read_mock_table(*t);
        }
      }
    }
  } catch (const json::exception& ex) {
    throw ParseError(fmt::format("provider config: {}", ex.what()));
  }
  validate(c);
  return c;
}

ProviderConfig builtin_provider(std::string_view name) {
  ProviderConfig c;
  c.kind = ProviderKind::Mock;
  if (name == "mock:oracle") {
    c.mock.mode = MockMode::Oracle;
    c.name = "mock-oracle";
  } else if (name == "mock:empty") {
    c.mock.mode = MockMode::Empty;
    c.name = "mock-empty";
  } else {
    throw ValidationError(fmt::format("unknown builtin provider '{}'", name));
  }
  c.model = c.name;
  return c;
}

MockProvider::MockProvider(ProviderConfig config) : config_(std::move(config)) {}

std::string MockProvider::ask(std::span<const ChatTurn> turns, const AskContext& context) {
  ++calls_;
  {
    std::lock_guard lock(mutex_);
    turn_counts_.push_back(turns.size());
  }
  switch (config_.mock.mode) {
    case MockMode::Empty:
      return {};
    case MockMode::Oracle: {
      if (!context.frame) throw MalformedResponseError("mock oracle needs the frame context");
      std::vector<std::string> answers;
      for (const auto& q : context.frame->qa_pairs) answers.push_back(q.expected_answer);
      return format_numbered(answers);
    }
    case MockMode::Table: {
      if (!context.frame) throw MalformedResponseError("mock table needs the frame context");
      auto it = config_.mock.table.find(context.frame->frame_id);
      if (it == config_.mock.table.end()) {
        throw MalformedResponseError(
            fmt::format("mock table has no reply for frame {}", context.frame->frame_id));
      }
      return it->second;
    }
  }
  return {};
}

std::vector<std::size_t> MockProvider::turn_counts() const {
  std::lock_guard lock(mutex_);
  return turn_counts_;
}

HttpChatProvider::HttpChatProvider(ProviderConfig config) : config_(std::move(config)) {
  validate(config_);
}

const std::string& HttpChatProvider::encoded_image(const std::filesystem::path& path) {
  std::lock_guard lock(image_mutex_);
  auto [it, inserted] = image_cache_.try_emplace(path.string());
  if (inserted) {
    try {
      it->second = encode_image_base64(path, config_.image_width, config_.image_height);
    } catch (...) {
      image_cache_.erase(it);
      throw;
    }
  }
  return it->second;
}

std::string HttpChatProvider::build_request_body(std::span<const ChatTurn> turns) {
  json messages = json::array();
  for (const auto& t : turns) {
    json msg{{"role", to_string(t.role)}};
    if (t.image) {
      msg["content"] = json::array(
          {{{"type", "text"}, {"text", t.text}},
           {{"type", "image_url"},
            {"image_url", {{"url", "data:image/png;base64," + encoded_image(*t.image)}}}}});
    } else {
      msg["content"] = t.text;
    }
    messages.push_back(std::move(msg));
  }
  json body{{"model", config_.model},
            {"temperature", config_.temperature},
            {"max_tokens", config_.max_answer_tokens},
            {"messages", std::move(messages)}};
  return body.dump();
}

std::string parse_chat_response(const std::string& body) {
  try {
    const auto doc = json::parse(body);
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    // Some servers return content parts.
    std::string text;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") text += part.at("text").get<std::string>();
    }
    return text;
  } catch (const json::exception& e) {
    throw MalformedResponseError(fmt::format("unexpected chat response: {}", e.what()));
  }
}

std::string HttpChatProvider::ask(std::span<const ChatTurn> turns, const AskContext&) {
  HttpHeaders headers;
  if (!config_.auth_env.empty()) {
    const char* key = std::getenv(config_.auth_env.c_str());
    if (!key || !*key) {
      throw AuthError(fmt::format("environment variable {} is not set", config_.auth_env));
    }
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  const auto body = build_request_body(turns);
  return with_retries(config_.retry, [&] {
    const auto res = http_post_json(config_.endpoint, headers, body, config_.request_timeout);
    raise_for_status(res);
    return parse_chat_response(res.body);
  });
}

std::unique_ptr<ChatProvider> make_provider(const ProviderConfig& config) {
  if (config.kind == ProviderKind::Mock) return std::make_unique<MockProvider>(config);
  return std::make_unique<HttpChatProvider>(config);
}

}  // namespace tutorqa
