#include "lga/llm_client.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lga/error.hpp"

namespace lga {

LlmEndpoint endpoint_from_env() {
  auto read = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  LlmEndpoint ep;
  auto url = read(kEnvEndpoint);
  if (!url) fail(ErrorKind::invalid_argument, std::string(kEnvEndpoint) + " is not set");
  auto key = read(kEnvApiKey);
  if (!key) fail(ErrorKind::invalid_argument, std::string(kEnvApiKey) + " is not set");
  ep.url = *url;
  ep.api_key = *key;
  if (auto model = read(kEnvModel)) ep.model = *model;
  return ep;
}

std::chrono::milliseconds RetryPolicy::backoff_before(std::size_t retry) const {
  double ms = static_cast<double>(initial_backoff.count());
  for (std::size_t i = 1; i < retry; ++i) ms *= multiplier;
  ms = std::min(ms, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // begins with '/', may be just "/"
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    fail(ErrorKind::invalid_argument, "endpoint URL must include a scheme: '" + url + "'");
  }
  const auto path_begin = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_begin);
  out.path = path_begin == std::string::npos ? "" : url.substr(path_begin);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

// Resolves `route` ("chat/completions", "embeddings") against an endpoint
// that may already point at the route itself.
SplitUrl resolve(const std::string& url, const std::string& route) {
  auto parts = split_url(url);
  if (parts.path.size() >= route.size() &&
      parts.path.compare(parts.path.size() - route.size(), route.size(), route) == 0) {
    return parts;
  }
  if (parts.path.empty()) parts.path = "/v1";
  parts.path += "/" + route;
  return parts;
}

void log(const FetchOptions& options, const std::string& line) {
  if (options.debug_log) options.debug_log(line);
}

// One POST, bounded by options.timeout end to end. A watchdog shuts the
// socket down at the deadline so a slow trickle cannot outlive it.
std::string post_once(const SplitUrl& target, const LlmEndpoint& endpoint, const std::string& body,
                      const FetchOptions& options) {
  httplib::Client cli(target.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers = {{"Authorization", "Bearer " + endpoint.api_key}};
  log(options, "POST " + target.origin + target.path + " Authorization: Bearer [redacted] body=" + body);

  std::mutex mu;
  std::condition_variable cv;
  bool finished = false;
  std::atomic<bool> expired{false};
  std::thread watchdog([&] {
    std::unique_lock lock(mu);
    if (!cv.wait_for(lock, options.timeout, [&] { return finished; })) {
      expired = true;
      cli.stop();
    }
  });

  auto res = cli.Post(target.path, headers, body, "application/json");
  {
    std::lock_guard lock(mu);
    finished = true;
  }
  cv.notify_all();
  watchdog.join();

  if (!res || expired) {
    const std::string why = expired ? std::string("timed out") : httplib::to_string(res.error());
    log(options, "request failed: " + why);
    throw Error(ErrorKind::network, "request to " + target.origin + target.path + " failed: " + why);
  }
  log(options, "HTTP " + std::to_string(res->status) + " body=" + res->body);
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw Error(ErrorKind::authentication,
                "endpoint rejected the API key (HTTP " + std::to_string(status) + ")");
  }
  if (status == 408 || status == 429 || status >= 500) {
    throw Error(ErrorKind::network, "transient HTTP " + std::to_string(status));
  }
  if (status < 200 || status >= 300) {
    throw Error(ErrorKind::invalid_argument,
                "request rejected with HTTP " + std::to_string(status) + ": " + res->body);
  }
  return res->body;
}

template <class Fn>
auto with_retries(const FetchOptions& options, std::size_t& retries, Fn&& attempt) {
  for (retries = 0;; ++retries) {
    try {
      return attempt();
    } catch (const Error& e) {
      if (!e.retryable() || retries >= options.retry.max_retries) throw;
      const auto wait = options.retry.backoff_before(retries + 1);
      log(options, "retrying in " + std::to_string(wait.count()) + " ms after: " + e.what());
      std::this_thread::sleep_for(wait);
    }
  }
}

}  // namespace

FetchResult fetch_descriptions(const LlmEndpoint& endpoint, const std::string& label,
                               std::size_t phases, const FetchOptions& options) {
  const auto target = resolve(endpoint.url, "chat/completions");
  nlohmann::json request = {
      {"model", endpoint.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", build_prompt(label, phases)}}})},
      {"temperature", 0},
  };
  const std::string body = request.dump();

  FetchResult out;
  const std::string reply =
      with_retries(options, out.retries, [&] { return post_once(target, endpoint, body, options); });

  auto envelope = nlohmann::json::parse(reply, nullptr, false);
  const nlohmann::json* content = nullptr;
  if (!envelope.is_discarded() && envelope.contains("choices") && envelope["choices"].is_array() &&
      !envelope["choices"].empty()) {
    const auto& choice = envelope["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
      content = &choice["message"]["content"];
    }
  }
  if (content == nullptr) throw ParseError("reply is not a chat-completions envelope", reply);

  out.raw_reply = content->get<std::string>();
  out.descriptions = parse_llm_response(out.raw_reply, phases);
  out.descriptions.label = label;
  return out;
}

std::vector<std::vector<double>> fetch_embeddings(const LlmEndpoint& endpoint,
                                                  const std::vector<std::string>& inputs,
                                                  const FetchOptions& options) {
  if (inputs.empty()) return {};
  const auto target = resolve(endpoint.url, "embeddings");
  const std::string body = nlohmann::json{{"model", endpoint.model}, {"input", inputs}}.dump();
  std::size_t retries = 0;
  const std::string reply =
      with_retries(options, retries, [&] { return post_once(target, endpoint, body, options); });

  auto j = nlohmann::json::parse(reply, nullptr, false);
  if (j.is_discarded() || !j.contains("data") || !j["data"].is_array() ||
      j["data"].size() != inputs.size()) {
    throw ParseError("reply is not an embeddings response for " + std::to_string(inputs.size()) +
                         " inputs",
                     reply);
  }
  std::vector<std::vector<double>> out(inputs.size());
  for (const auto& item : j["data"]) {
    const auto index = item.value("index", std::size_t{0});
    if (index >= out.size() || !item.contains("embedding") || !item["embedding"].is_array()) {
      throw ParseError("malformed embeddings entry", reply);
    }
    out[index] = item["embedding"].get<std::vector<double>>();
  }
  for (const auto& v : out) {
    if (v.empty()) throw ParseError("embeddings response is missing an index", reply);
  }
  return out;
}

}  // namespace lga
