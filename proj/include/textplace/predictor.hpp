#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "textplace/prompt.hpp"

namespace textplace::vlm {

// Transport/auth failure surfaced by query_predictor after retry handling.
struct PredictorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised by endpoints; retryable failures are retried with backoff,
// non-retryable ones (bad credentials) abort immediately.
struct EndpointError : std::runtime_error {
  explicit EndpointError(const std::string& what, bool retryable_failure)
      : std::runtime_error(what), retryable(retryable_failure) {}
  bool retryable;
};

class PredictorEndpoint {
 public:
  virtual ~PredictorEndpoint() = default;
  // Returns the raw reply text for one prompt; throws EndpointError on failure.
  virtual std::string complete(const std::string& prompt_text,
                               const Raster& image) = 0;
};

struct EndpointConfig {
  std::string base_url;  // e.g. http://host:port
  std::string api_key;
  std::string model = "default";
  double timeout_seconds = 30.0;
  int max_retries = 3;
};

// TEXTPLACE_VLM_BASE_URL, _API_KEY, _MODEL, _TIMEOUT_S, _RETRIES.
EndpointConfig endpoint_config_from_env();

// Chat-completion style JSON over HTTP: POST {base}/v1/chat/completions with
// the image first (base64 PPM), then the preamble + records; reads
// choices[0].message.content. 401/403 map to non-retryable EndpointError.
class HttpEndpoint : public PredictorEndpoint {
 public:
  explicit HttpEndpoint(EndpointConfig config);
  std::string complete(const std::string& prompt_text,
                       const Raster& image) override;

 private:
  EndpointConfig config_;
};

// Scripted endpoint for tests and offline runs. Thread-safe; consumes queued
// steps in order, then keeps returning the default reply.
class MockEndpoint : public PredictorEndpoint {
 public:
  void push_reply(std::string reply);
  void push_failure(std::string what = "connection reset");
  void push_auth_failure();
  void set_default_reply(std::string reply);

  std::string complete(const std::string& prompt_text,
                       const Raster& image) override;

  int calls() const;
  std::string last_prompt() const;
  Raster last_image() const;

 private:
  struct Step {
    enum { reply, failure, auth_failure } kind = reply;
    std::string payload;
  };
  mutable std::mutex mu_;
  std::deque<Step> steps_;
  std::string default_reply_ = "{\"left\":0.25,\"top\":0.25,\"width\":0.5,\"height\":0.5}";
  int calls_ = 0;
  std::string last_prompt_;
  Raster last_image_;
};

struct QueryOptions {
  int max_retries = 3;        // additional attempts after the first
  double backoff_base_s = 0.25;  // doubles per retry
};

// Sends preamble + records + image, parses the reply, retries transient
// failures with exponential backoff. Throws PredictorError("unauthorized")
// on auth failure and PredictorError("predictor unavailable") when the retry
// budget is exhausted. Latency covers all attempts.
PredictorResponse query_predictor(const PromptDocument& prompt,
                                  PredictorEndpoint& endpoint,
                                  const QueryOptions& opts = {});

using EndpointFactory = std::function<std::unique_ptr<PredictorEndpoint>()>;

// Bounded-concurrency fan-out; one endpoint per worker, results in input order.
std::vector<PredictorResponse> query_many(
    const std::vector<PromptDocument>& prompts, const EndpointFactory& factory,
    const QueryOptions& opts = {}, int workers = 4);

struct InvalidTally {
  int valid = 0;
  int invalid_format = 0;
  int out_of_range_clamped = 0;
};

InvalidTally tally_invalid(const std::vector<PredictorResponse>& responses);

// Transcript row for JSONL logging.
std::string transcript_json(const std::string& layout_id,
                            const PromptDocument& prompt,
                            const PredictorResponse& response);

std::string base64_encode(const void* data, size_t size);

}  // namespace textplace::vlm
