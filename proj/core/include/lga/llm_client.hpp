#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "lga/text_anatomy.hpp"

namespace lga {

// An OpenAI-compatible endpoint. `url` is either the API base
// (e.g. https://api.openai.com/v1) or the full chat-completions URL.
struct LlmEndpoint {
  std::string url;
  std::string api_key;
  std::string model = "gpt-4o";
};

inline constexpr const char* kEnvEndpoint = "LGA_LLM_ENDPOINT";
inline constexpr const char* kEnvApiKey = "LGA_LLM_API_KEY";
inline constexpr const char* kEnvModel = "LGA_LLM_MODEL";

// Reads LGA_LLM_ENDPOINT / LGA_LLM_API_KEY / LGA_LLM_MODEL. Throws
// invalid_argument naming the first missing required variable.
LlmEndpoint endpoint_from_env();

struct RetryPolicy {
  std::size_t max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};

  std::chrono::milliseconds backoff_before(std::size_t retry) const;
};

struct FetchOptions {
  // Upper bound for one HTTP attempt, connect through last byte.
  std::chrono::milliseconds timeout{30000};
  RetryPolicy retry;
  // Receives request/response traces with the API key redacted.
  std::function<void(std::string_view)> debug_log;
};

struct FetchResult {
  AtomicDescriptions descriptions;
  std::size_t retries = 0;
  std::string raw_reply;
};

// Sends build_prompt(label, phases) as a single user message and parses the
// reply. Transient failures (connect errors, timeouts, HTTP 408/429/5xx) are
// retried with exponential backoff; 401/403 raise `authentication`; an
// unusable reply raises ParseError. The returned label is `label` as
// requested, not the model's echo of it.
FetchResult fetch_descriptions(const LlmEndpoint& endpoint, const std::string& label,
                               std::size_t phases, const FetchOptions& options = {});

// POSTs `inputs` to the embeddings route of the same API and returns one
// vector per input, in order.
std::vector<std::vector<double>> fetch_embeddings(const LlmEndpoint& endpoint,
                                                  const std::vector<std::string>& inputs,
                                                  const FetchOptions& options = {});

}  // namespace lga
