#pragma once

// Live HTTP generation backend. Kept out of backend.hpp so only the CLI and
// the HTTP tests pay for the httplib include.

#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "zsner/backend.hpp"

namespace zsner::backend {

struct HttpOptions {
  int timeout_s = 30;
  int retries = 3;       // additional attempts after the first
  int backoff_ms = 200;  // doubled per attempt
};

namespace detail {

struct SplitUrl {
  std::string host_port;  // scheme://host[:port]
  std::string path;
};

inline SplitUrl split_url(const std::string& url) {
  auto scheme = url.find("://");
  std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
  auto slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace detail

// POSTs {"inputs": prompt, "parameters": {"max_new_tokens": N}} and accepts
// either {"generated_text": ...} or [{"generated_text": ...}] in return.
// Transport failures and 5xx/429 statuses are retried with exponential
// backoff; other non-2xx statuses fail immediately.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(std::string url, HttpOptions options = {})
      : url_(std::move(url)), options_(options) {}

  GenerationResponse generate(const GenerationRequest& request) override {
    auto [host, path] = detail::split_url(url_);
    nlohmann::json body;
    body["inputs"] = request.prompt;
    body["parameters"]["max_new_tokens"] = request.max_new_tokens;
    const std::string payload = body.dump();

    std::string last_error;
    int delay_ms = options_.backoff_ms;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
        delay_ms *= 2;
      }
      httplib::Client client(host);
      client.set_connection_timeout(options_.timeout_s);
      client.set_read_timeout(options_.timeout_s);
      auto res = client.Post(path, payload, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "status " + std::to_string(res->status);
        continue;
      }
      if (res->status < 200 || res->status >= 300)
        throw BackendError("backend returned status " + std::to_string(res->status), request.id());
      return {extract_text(res->body, request), name(), 0.0};
    }
    throw BackendError("backend unreachable after " + std::to_string(options_.retries + 1) +
                           " attempts: " + last_error,
                       request.id());
  }

  std::string name() const override { return "http:" + url_; }

 private:
  static std::string extract_text(const std::string& body, const GenerationRequest& request) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (!j.is_discarded()) {
      if (j.is_object() && j.contains("generated_text") && j["generated_text"].is_string())
        return j["generated_text"].get<std::string>();
      if (j.is_array() && !j.empty() && j[0].is_object() && j[0].contains("generated_text") &&
          j[0]["generated_text"].is_string())
        return j[0]["generated_text"].get<std::string>();
    }
    throw BackendError("unrecognized response body shape", request.id());
  }

  std::string url_;
  HttpOptions options_;
};

}  // namespace zsner::backend
