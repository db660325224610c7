#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "doctest.h"
#include "helpers.hpp"
#include "lga/error.hpp"
#include "lga/llm_client.hpp"

using namespace lga;
using namespace std::chrono_literals;

namespace {

const std::string kContent =
    "{\"Action Label\": \"Jumping into poo\", \"sub-action description\": [\"stand at the edge\", "
    "\"leap\", \"splash\"]}";

std::string envelope(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

// Local OpenAI-style server. `handler` sees every request with its
// 0-based call index.
class MockServer {
 public:
  using Handler = std::function<void(int, const httplib::Request&, httplib::Response&)>;

  explicit MockServer(Handler handler) : handler_(std::move(handler)) {
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      const int call = calls_++;
      {
        std::lock_guard lock(mu_);
        requests_.push_back(req);
      }
      handler_(call, req, res);
    };
    server_.Post("/v1/chat/completions", route);
    server_.Post("/v1/embeddings", route);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int calls() const { return calls_; }
  httplib::Request request(std::size_t i) {
    std::lock_guard lock(mu_);
    return requests_.at(i);
  }

 private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> calls_{0};
  std::mutex mu_;
  std::vector<httplib::Request> requests_;
};

FetchOptions fast_options() {
  FetchOptions o;
  o.timeout = 2000ms;
  o.retry.initial_backoff = 5ms;
  o.retry.max_backoff = 20ms;
  return o;
}

void ok(httplib::Response& res, const std::string& content = kContent) {
  res.set_content(envelope(content), "application/json");
}

}  // namespace

TEST_CASE("happy path parses the reply and sends the prompt") {
  MockServer server([](int, const httplib::Request&, httplib::Response& res) { ok(res); });
  LlmEndpoint ep{server.base_url(), "sk-secret", "gpt-4o"};
  std::vector<std::string> log;
  auto opts = fast_options();
  opts.debug_log = [&](std::string_view line) { log.emplace_back(line); };

  auto result = fetch_descriptions(ep, "jumping into pool", 3, opts);
  CHECK(result.retries == 0);
  CHECK(result.descriptions.label == "jumping into pool");
  CHECK(result.descriptions.descriptions == std::vector<std::string>{"stand at the edge", "leap", "splash"});
  CHECK(result.raw_reply == kContent);

  REQUIRE(server.calls() == 1);
  const auto req = server.request(0);
  CHECK(req.get_header_value("Authorization") == "Bearer sk-secret");
  const auto body = nlohmann::json::parse(req.body);
  CHECK(body["model"] == "gpt-4o");
  REQUIRE(body["messages"].size() == 1);
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(body["messages"][0]["content"] == build_prompt("jumping into pool", 3));

  REQUIRE_FALSE(log.empty());
  for (const auto& line : log) CHECK(line.find("sk-secret") == std::string::npos);
}

TEST_CASE("full chat-completions URL is used as given") {
  MockServer server([](int, const httplib::Request&, httplib::Response& res) { ok(res); });
  LlmEndpoint ep{server.base_url() + "/chat/completions", "k", "m"};
  CHECK(fetch_descriptions(ep, "x", 3, fast_options()).descriptions.phase_count() == 3);
}

TEST_CASE("401 is an authentication error and is not retried") {
  MockServer server([](int, const httplib::Request&, httplib::Response& res) { res.status = 401; });
  LlmEndpoint ep{server.base_url(), "bad", "m"};
  try {
    fetch_descriptions(ep, "x", 3, fast_options());
    FAIL("expected authentication error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::authentication);
    CHECK_FALSE(e.retryable());
  }
  CHECK(server.calls() == 1);
}

TEST_CASE("two timeouts then success reports two retries") {
  MockServer server([](int call, const httplib::Request&, httplib::Response& res) {
    if (call < 2) std::this_thread::sleep_for(600ms);
    ok(res);
  });
  LlmEndpoint ep{server.base_url(), "k", "m"};
  auto opts = fast_options();
  opts.timeout = 200ms;
  const auto start = std::chrono::steady_clock::now();
  auto result = fetch_descriptions(ep, "x", 3, opts);
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(result.retries == 2);
  CHECK(result.descriptions.phase_count() == 3);
  CHECK(server.calls() == 3);
  // Each attempt is bounded by the timeout, not by the slow server.
  CHECK(elapsed < 1100ms);
}

TEST_CASE("5xx and 429 are retried, exhaustion surfaces a network error") {
  MockServer flaky([](int call, const httplib::Request&, httplib::Response& res) {
    if (call == 0) {
      res.status = 503;
    } else if (call == 1) {
      res.status = 429;
    } else {
      ok(res);
    }
  });
  CHECK(fetch_descriptions({flaky.base_url(), "k", "m"}, "x", 3, fast_options()).retries == 2);

  MockServer down([](int, const httplib::Request&, httplib::Response& res) { res.status = 500; });
  auto opts = fast_options();
  opts.retry.max_retries = 2;
  CHECK(test::kind_of([&] { fetch_descriptions({down.base_url(), "k", "m"}, "x", 3, opts); }) ==
        ErrorKind::network);
  CHECK(down.calls() == 3);
}

TEST_CASE("unreachable endpoint is a network error") {
  httplib::Server probe;
  const int port = probe.bind_to_any_port("127.0.0.1");
  probe.stop();
  auto opts = fast_options();
  opts.retry.max_retries = 1;
  LlmEndpoint ep{"http://127.0.0.1:" + std::to_string(port) + "/v1", "k", "m"};
  CHECK(test::kind_of([&] { fetch_descriptions(ep, "x", 3, opts); }) == ErrorKind::network);
}

TEST_CASE("unusable replies raise ParseError with the raw text") {
  MockServer prose([](int, const httplib::Request&, httplib::Response& res) { ok(res, "I cannot help."); });
  try {
    fetch_descriptions({prose.base_url(), "k", "m"}, "x", 3, fast_options());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.raw() == "I cannot help.");
  }
  CHECK(prose.calls() == 1);

  MockServer arity([](int, const httplib::Request&, httplib::Response& res) { ok(res); });
  CHECK_THROWS_AS(fetch_descriptions({arity.base_url(), "k", "m"}, "x", 4, fast_options()), ParseError);

  MockServer junk([](int, const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "text/plain");
  });
  CHECK_THROWS_AS(fetch_descriptions({junk.base_url(), "k", "m"}, "x", 3, fast_options()), ParseError);
}

TEST_CASE("other 4xx responses are not retried") {
  MockServer server([](int, const httplib::Request&, httplib::Response& res) { res.status = 400; });
  CHECK(test::kind_of([&] { fetch_descriptions({server.base_url(), "k", "m"}, "x", 3, fast_options()); }) ==
        ErrorKind::invalid_argument);
  CHECK(server.calls() == 1);
}

TEST_CASE("embeddings come back in input order") {
  MockServer server([](int, const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json data = nlohmann::json::array();
    for (std::size_t i = body["input"].size(); i-- > 0;) {
      data.push_back({{"index", i}, {"embedding", {static_cast<double>(i), 1.0}}});
    }
    res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
  });
  auto out = fetch_embeddings({server.base_url(), "k", "m"}, {"a", "b", "c"}, fast_options());
  REQUIRE(out.size() == 3);
  CHECK(out[2] == std::vector<double>{2.0, 1.0});
  CHECK(fetch_embeddings({server.base_url(), "k", "m"}, {}, fast_options()).empty());
}

TEST_CASE("backoff doubles and is capped") {
  RetryPolicy p;
  CHECK(p.backoff_before(1) == 500ms);
  CHECK(p.backoff_before(2) == 1000ms);
  CHECK(p.backoff_before(3) == 2000ms);
  CHECK(p.backoff_before(10) == 8000ms);
}

TEST_CASE("environment lookup names the missing variable") {
  ::setenv(kEnvEndpoint, "http://localhost:1/v1", 1);
  ::unsetenv(kEnvApiKey);
  try {
    endpoint_from_env();
    FAIL("expected invalid_argument");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_argument);
    CHECK(std::string(e.what()).find(kEnvApiKey) != std::string::npos);
  }
  ::setenv(kEnvApiKey, "k", 1);
  ::unsetenv(kEnvModel);
  const auto ep = endpoint_from_env();
  CHECK(ep.url == "http://localhost:1/v1");
  CHECK(ep.model == "gpt-4o");
  ::setenv(kEnvModel, "other", 1);
  CHECK(endpoint_from_env().model == "other");
  ::unsetenv(kEnvEndpoint);
  ::unsetenv(kEnvApiKey);
  ::unsetenv(kEnvModel);
}
