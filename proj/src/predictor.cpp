#include "textplace/predictor.hpp"

#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "textplace/ppm.hpp"

namespace textplace::vlm {
namespace {

using nlohmann::json;

double env_double(const char* name, double fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const double parsed = std::strtod(v, &end);
  return end && *end == '\0' ? parsed : fallback;
}

std::string env_str(const char* name, const char* fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

}  // namespace

EndpointConfig endpoint_config_from_env() {
  EndpointConfig cfg;
  cfg.base_url = env_str("TEXTPLACE_VLM_BASE_URL", "");
  cfg.api_key = env_str("TEXTPLACE_VLM_API_KEY", "");
  cfg.model = env_str("TEXTPLACE_VLM_MODEL", "default");
  cfg.timeout_seconds = env_double("TEXTPLACE_VLM_TIMEOUT_S", 30.0);
  cfg.max_retries = static_cast<int>(env_double("TEXTPLACE_VLM_RETRIES", 3.0));
  return cfg;
}

HttpEndpoint::HttpEndpoint(EndpointConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty())
    throw std::invalid_argument("endpoint base URL not configured");
}

std::string HttpEndpoint::complete(const std::string& prompt_text,
                                   const Raster& image) {
  const std::string ppm = encode_ppm(image);
  // The image precedes the text so the records read as captions of it.
  const json body = {
      {"model", config_.model},
      {"messages",
       {{{"role", "user"},
         {"content",
          {{{"type", "image"},
            {"format", "ppm_base64"},
            {"data", base64_encode(ppm.data(), ppm.size())}},
           {{"type", "text"}, {"text", prompt_text}}}}}}}};

  httplib::Client cli(config_.base_url);
  cli.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
  cli.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
  httplib::Headers headers;
  if (!config_.api_key.empty())
    headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto result = cli.Post("/v1/chat/completions", headers, body.dump(),
                         "application/json");
  if (!result)
    throw EndpointError(httplib::to_string(result.error()), /*retryable=*/true);
  if (result->status == 401 || result->status == 403)
    throw EndpointError("unauthorized", /*retryable=*/false);
  if (result->status < 200 || result->status >= 300)
    throw EndpointError("http status " + std::to_string(result->status),
                        /*retryable=*/true);

  const json reply = json::parse(result->body, nullptr, false);
  if (!reply.is_discarded() && reply.contains("choices") &&
      reply["choices"].is_array() && !reply["choices"].empty()) {
    const json& msg = reply["choices"][0].value("message", json::object());
    const json& content = msg.contains("content") ? msg["content"] : json();
    if (content.is_string()) return content.get<std::string>();
    if (content.is_array()) {
      std::string text;
      for (const json& block : content)
        if (block.is_object() && block.value("type", "") == "text")
          text += block.value("text", "");
      if (!text.empty()) return text;
    }
  }
  // Unrecognized envelope: hand the body to the parser rather than retrying.
  return result->body;
}

void MockEndpoint::push_reply(std::string reply) {
  std::lock_guard lock(mu_);
  steps_.push_back({Step::reply, std::move(reply)});
}

void MockEndpoint::push_failure(std::string what) {
  std::lock_guard lock(mu_);
  steps_.push_back({Step::failure, std::move(what)});
}

void MockEndpoint::push_auth_failure() {
  std::lock_guard lock(mu_);
  steps_.push_back({Step::auth_failure, "unauthorized"});
}

void MockEndpoint::set_default_reply(std::string reply) {
  std::lock_guard lock(mu_);
  default_reply_ = std::move(reply);
}

std::string MockEndpoint::complete(const std::string& prompt_text,
                                   const Raster& image) {
  std::lock_guard lock(mu_);
  ++calls_;
  last_prompt_ = prompt_text;
  last_image_ = image;
  if (steps_.empty()) return default_reply_;
  const Step step = steps_.front();
  steps_.pop_front();
  switch (step.kind) {
    case Step::reply: return step.payload;
    case Step::failure: throw EndpointError(step.payload, /*retryable=*/true);
    case Step::auth_failure: throw EndpointError(step.payload, /*retryable=*/false);
  }
  return default_reply_;
}

int MockEndpoint::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::string MockEndpoint::last_prompt() const {
  std::lock_guard lock(mu_);
  return last_prompt_;
}

Raster MockEndpoint::last_image() const {
  std::lock_guard lock(mu_);
  return last_image_;
}

PredictorResponse query_predictor(const PromptDocument& prompt,
                                  PredictorEndpoint& endpoint,
                                  const QueryOptions& opts) {
  const std::string text = std::string(kPromptPreamble) + prompt.records_text();
  const auto t0 = std::chrono::steady_clock::now();
  int retries = 0;
  for (;;) {
    try {
      const std::string raw = endpoint.complete(text, prompt.image);
      PredictorResponse resp = parse_response(raw);
      resp.retries = retries;
      resp.latency_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      return resp;
    } catch (const EndpointError& e) {
      if (!e.retryable) throw PredictorError("unauthorized");
      if (retries >= opts.max_retries) throw PredictorError("predictor unavailable");
      const double delay = opts.backoff_base_s * double(1 << retries);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      ++retries;
    }
  }
}

std::vector<PredictorResponse> query_many(
    const std::vector<PromptDocument>& prompts, const EndpointFactory& factory,
    const QueryOptions& opts, int workers) {
  std::vector<PredictorResponse> out(prompts.size());
  if (prompts.empty()) return out;
  workers = std::max(1, std::min<int>(workers, static_cast<int>(prompts.size())));
  std::atomic<size_t> next{0};
  auto run = [&] {
    auto endpoint = factory();
    for (size_t i = next.fetch_add(1); i < prompts.size();
         i = next.fetch_add(1)) {
      try {
        out[i] = query_predictor(prompts[i], *endpoint, opts);
      } catch (const std::exception& e) {
        out[i].raw = std::string("error: ") + e.what();
        out[i].status = ResponseStatus::invalid_format;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  return out;
}

InvalidTally tally_invalid(const std::vector<PredictorResponse>& responses) {
  InvalidTally tally;
  for (const PredictorResponse& r : responses) {
    switch (r.status) {
      case ResponseStatus::valid: ++tally.valid; break;
      case ResponseStatus::invalid_format: ++tally.invalid_format; break;
      case ResponseStatus::out_of_range_clamped: ++tally.out_of_range_clamped; break;
    }
  }
  return tally;
}

std::string transcript_json(const std::string& layout_id,
                            const PromptDocument& prompt,
                            const PredictorResponse& response) {
  json row = {{"layout_id", layout_id},
              {"prompt", prompt.records_text()},
              {"raw", response.raw},
              {"status", to_string(response.status)},
              {"latency_s", response.latency_seconds},
              {"retries", response.retries}};
  if (response.parsed)
    row["parsed"] = {response.parsed->left, response.parsed->top,
                     response.parsed->width, response.parsed->height};
  else
    row["parsed"] = nullptr;
  return row.dump();
}

std::string base64_encode(const void* data, size_t size) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::string out;
  out.reserve((size + 2) / 3 * 4);
  for (size_t i = 0; i < size; i += 3) {
    uint32_t chunk = uint32_t(bytes[i]) << 16;
    if (i + 1 < size) chunk |= uint32_t(bytes[i + 1]) << 8;
    if (i + 2 < size) chunk |= uint32_t(bytes[i + 2]);
    out.push_back(alphabet[(chunk >> 18) & 63]);
    out.push_back(alphabet[(chunk >> 12) & 63]);
    out.push_back(i + 1 < size ? alphabet[(chunk >> 6) & 63] : '=');
    out.push_back(i + 2 < size ? alphabet[chunk & 63] : '=');
  }
  return out;
}

}  // namespace textplace::vlm
