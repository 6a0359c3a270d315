#pragma once

#include <chrono>
#include <cstddef>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "ccvqa/chat.hpp"
#include "ccvqa/embedding.hpp"

namespace ccvqa::clients {

// Client-side token bucket. rate <= 0 disables limiting.
class TokenBucket {
 public:
  TokenBucket(double rate_per_second, double burst);
  // Blocks until one token is available.
  void acquire();

 private:
  using Clock = std::chrono::steady_clock;
  double rate_;
  double burst_;
  double tokens_;
  Clock::time_point last_;
  std::mutex mutex_;
};

struct HttpEndpoint {
  std::string url;                            // e.g. https://host:port/v1/chat/completions
  std::string model;
  std::string api_key_env = "CCVQA_API_KEY";  // bearer token source
  double timeout_seconds = 60.0;
  int max_retries = 3;
  double backoff_seconds = 0.5;               // doubled after every failed attempt
  double rate_per_second = 0.0;

  static HttpEndpoint from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Split of an absolute URL into the origin httplib connects to and the path.
struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};
ParsedUrl parse_url(const std::string& url);

// Raw POST with retries. Transport failures, 429 and 5xx are retried with
// exponential backoff; other statuses fail immediately.
class HttpPoster {
 public:
  explicit HttpPoster(HttpEndpoint endpoint);

  // Returns the response body of a 2xx reply. Throws TimeoutError when the
  // last attempt timed out, ClientError otherwise.
  std::string post_json(const nlohmann::json& body) const;

  // Appends every request/response pair as a JSONL record, for replay.
  void set_exchange_log(const std::string& path);

  const HttpEndpoint& endpoint() const { return endpoint_; }

 private:
  HttpEndpoint endpoint_;
  ParsedUrl url_;
  mutable TokenBucket bucket_;
  mutable std::mutex log_mutex_;
  mutable std::ofstream log_;
};

// Chat-completions compatible VLM client.
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(HttpEndpoint endpoint);
  std::string chat(const ChatRequest& request) const override;

  // The wire body for a request; exposed for tests and replay.
  nlohmann::json request_body(const ChatRequest& request) const;
  static std::string parse_response(const std::string& body);

  void set_exchange_log(const std::string& path) { poster_.set_exchange_log(path); }

 private:
  HttpPoster poster_;
};

// Embedding service client: POST {"input": [str], "model"} and read
// data[0].embedding. Images are sent as their reference string.
class HttpEmbedder final : public EmbeddingProvider {
 public:
  HttpEmbedder(HttpEndpoint endpoint, std::size_t dimension);

  std::size_t dimension() const override { return dimension_; }
  Vector embed_text(const std::string& text) const override;
  Vector embed_image(const std::string& image_ref) const override;

 private:
  Vector embed(const std::string& input) const;

  HttpPoster poster_;
  std::size_t dimension_;
};

// image_url payload for a reference: URLs pass through, readable local files
// become base64 data URLs, anything else is sent verbatim.
std::string image_url_for(const std::string& image_ref);

}  // namespace ccvqa::clients
