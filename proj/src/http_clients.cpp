#include "ccvqa/http_clients.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "ccvqa/errors.hpp"
#include "ccvqa/util.hpp"

namespace ccvqa::clients {

using nlohmann::json;

TokenBucket::TokenBucket(double rate_per_second, double burst)
    : rate_(rate_per_second), burst_(std::max(1.0, burst)), tokens_(burst_), last_(Clock::now()) {}

void TokenBucket::acquire() {
  if (rate_ <= 0.0) return;
  std::unique_lock lock(mutex_);
  for (;;) {
    const auto now = Clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(burst_, tokens_ + elapsed * rate_);
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait = (1.0 - tokens_) / rate_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    lock.lock();
  }
}

HttpEndpoint HttpEndpoint::from_json(const json& j) {
  HttpEndpoint e;
  e.url = j.value("url", e.url);
  e.model = j.value("model", e.model);
  e.api_key_env = j.value("api_key_env", e.api_key_env);
  e.timeout_seconds = j.value("timeout_seconds", e.timeout_seconds);
  e.max_retries = j.value("max_retries", e.max_retries);
  e.backoff_seconds = j.value("backoff_seconds", e.backoff_seconds);
  e.rate_per_second = j.value("rate_per_second", e.rate_per_second);
  return e;
}

json HttpEndpoint::to_json() const {
  return {{"url", url},
          {"model", model},
          {"api_key_env", api_key_env},
          {"timeout_seconds", timeout_seconds},
          {"max_retries", max_retries},
          {"backoff_seconds", backoff_seconds},
          {"rate_per_second", rate_per_second}};
}

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.origin = url;
    out.path = "/";
  } else {
    out.origin = url.substr(0, path_start);
    out.path = url.substr(path_start);
  }
  return out;
}

HttpPoster::HttpPoster(HttpEndpoint endpoint)
    : endpoint_(std::move(endpoint)),
      url_(parse_url(endpoint_.url)),
      bucket_(endpoint_.rate_per_second, std::max(1.0, endpoint_.rate_per_second)) {}

void HttpPoster::set_exchange_log(const std::string& path) {
  std::lock_guard lock(log_mutex_);
  log_.open(path, std::ios::app);
  if (!log_) throw Error("cannot open exchange log " + path);
}

std::string HttpPoster::post_json(const json& body) const {
  httplib::Client client(url_.origin);
  const auto secs = std::chrono::duration<double>(endpoint_.timeout_seconds);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(secs);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (const char* key = std::getenv(endpoint_.api_key_env.c_str()); key != nullptr && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string payload = body.dump();

  double backoff = endpoint_.backoff_seconds;
  int last_status = 0;
  bool last_timed_out = false;
  std::string last_error;
  const int attempts = std::max(0, endpoint_.max_retries) + 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
    }
    bucket_.acquire();
    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(url_.path, headers, payload, "application/json");
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (!res) {
      const auto err = res.error();
      last_status = 0;
      last_timed_out = err == httplib::Error::ConnectionTimeout ||
                       (err == httplib::Error::Read && elapsed >= endpoint_.timeout_seconds * 0.9);
      last_error = httplib::to_string(err);
      spdlog::warn("POST {} attempt {} failed: {}", endpoint_.url, attempt + 1, last_error);
      continue;
    }
    last_timed_out = false;
    last_status = res->status;
    if (log_.is_open()) {
      std::lock_guard lock(log_mutex_);
      log_ << json{{"url", endpoint_.url}, {"request", body}, {"status", res->status},
                   {"response", res->body}}.dump()
           << '\n';
      log_.flush();
    }
    if (res->status >= 200 && res->status < 300) return res->body;
    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    const bool transient = res->status == 429 || res->status >= 500;
    if (!transient) break;
    spdlog::warn("POST {} attempt {} returned {}", endpoint_.url, attempt + 1, res->status);
  }
  if (last_timed_out) throw TimeoutError("request to " + endpoint_.url + " timed out");
  throw ClientError(last_status, "request to " + endpoint_.url + " failed: " + last_error);
}

// ---------------------------------------------------------------------------

std::string image_url_for(const std::string& image_ref) {
  if (image_ref.rfind("http://", 0) == 0 || image_ref.rfind("https://", 0) == 0 ||
      image_ref.rfind("data:", 0) == 0) {
    return image_ref;
  }
  std::error_code ec;
  if (!std::filesystem::is_regular_file(image_ref, ec)) return image_ref;
  auto ext = to_lower(std::filesystem::path(image_ref).extension().string());
  if (!ext.empty()) ext.erase(0, 1);
  if (ext == "jpg") ext = "jpeg";
  if (ext.empty()) ext = "jpeg";
  return "data:image/" + ext + ";base64," + httplib::detail::base64_encode(read_file(image_ref));
}

HttpChatClient::HttpChatClient(HttpEndpoint endpoint) : poster_(std::move(endpoint)) {}

json HttpChatClient::request_body(const ChatRequest& request) const {
  json messages = json::array();
  for (const auto& m : request.messages) {
    json content = json::array();
    for (const auto& p : m.parts) {
      if (p.kind == PartKind::text) {
        content.push_back({{"type", "text"}, {"text", p.payload}});
      } else {
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", image_url_for(p.payload)}}}});
      }
    }
    messages.push_back({{"role", m.role == Role::user ? "user" : "system"}, {"content", content}});
  }
  json body = {{"model", poster_.endpoint().model},
               {"messages", messages},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};
  if (request.seed) body["seed"] = *request.seed;
  return body;
}

std::string HttpChatClient::parse_response(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw ClientError(200, std::string("malformed chat response: ") + e.what());
  }
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    std::string out;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") out += part.value("text", "");
    }
    return out;
  } catch (const json::exception& e) {
    throw ClientError(200, std::string("chat response lacks choices[0].message.content: ") +
                               e.what());
  }
}

std::string HttpChatClient::chat(const ChatRequest& request) const {
  request.validate();
  return parse_response(poster_.post_json(request_body(request)));
}

// ---------------------------------------------------------------------------

HttpEmbedder::HttpEmbedder(HttpEndpoint endpoint, std::size_t dimension)
    : poster_(std::move(endpoint)), dimension_(dimension) {}

Vector HttpEmbedder::embed(const std::string& input) const {
  if (input.empty()) throw EmbeddingError("cannot embed empty input");
  std::string body;
  try {
    body = poster_.post_json({{"input", json::array({input})}, {"model", poster_.endpoint().model}});
  } catch (const Error& e) {
    throw EmbeddingError(std::string("embedding service failed: ") + e.what());
  }
  Vector v;
  try {
    v = json::parse(body).at("data").at(0).at("embedding").get<Vector>();
  } catch (const json::exception& e) {
    throw EmbeddingError(std::string("malformed embedding response: ") + e.what());
  }
  if (v.size() != dimension_) {
    throw EmbeddingError("embedding service returned dimension " + std::to_string(v.size()) +
                         ", expected " + std::to_string(dimension_));
  }
  normalize_in_place(v);
  return v;
}

Vector HttpEmbedder::embed_text(const std::string& text) const { return embed(text); }

Vector HttpEmbedder::embed_image(const std::string& image_ref) const {
  return embed(image_url_for(image_ref));
}

}  // namespace ccvqa::clients
