/*
 * Copyright 2026 The steer Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Chat-completion backends over JSON/HTTP. Requests follow the common
//
//   POST <base_url><path>
//   {"model": ..., "temperature": ..., "messages": [{"role": "system", ...},
//                                                    {"role": "user", ...}]}
//
// shape and read `choices[0].message.content` from the reply. The content is
// expected to hold a JSON object; surrounding prose or code fences are ignored.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "steer/backends.hpp"
#include "steer/templates.hpp"

namespace steer {

struct HttpEndpointConfig {
  std::string base_url;  // e.g. "http://localhost:8000"
  std::string path = "/v1/chat/completions";
  std::string model;
  double temperature = 1.0;
  std::string api_key_env;  // empty: no Authorization header
  int max_attempts = 3;
  int backoff_initial_ms = 500;
  int backoff_max_ms = 8000;
  int timeout_ms = 60'000;
  std::string user_message = "Respond in the required JSON format.";

  void validate() const {
    if (base_url.empty()) throw ConfigError("http backend: base_url is required");
    if (model.empty()) throw ConfigError("http backend: model is required");
    if (max_attempts < 1) throw ConfigError("http backend: max_attempts must be >= 1");
    if (backoff_initial_ms < 0 || backoff_max_ms < 0 || timeout_ms <= 0)
      throw ConfigError("http backend: timeouts must be positive");
  }
};

namespace detail {

// Raised by response parsers for replies worth re-requesting.
struct Unparseable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// First '{' to last '}' of `content`, parsed as JSON.
inline nlohmann::json extract_json_object(const std::string& content) {
  const auto open = content.find('{');
  const auto close = content.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw Unparseable("no JSON object in response");
  try {
    return nlohmann::json::parse(content.substr(open, close - open + 1));
  } catch (const nlohmann::json::exception& e) {
    throw Unparseable(e.what());
  }
}

}  // namespace detail

class ChatClient {
 public:
  explicit ChatClient(HttpEndpointConfig config) : config_(std::move(config)) {
    config_.validate();
    if (!config_.api_key_env.empty()) {
      const char* token = std::getenv(config_.api_key_env.c_str());
      if (token == nullptr || *token == '\0')
        throw ConfigError("environment variable " + config_.api_key_env + " is not set");
      token_ = token;
    }
  }

  const HttpEndpointConfig& config() const noexcept { return config_; }

  // Sends `system_prompt` and hands the message content to `parse`. Transport
  // failures, 408/429/5xx replies and detail::Unparseable are retried with
  // capped exponential backoff; any other exception from `parse` propagates.
  template <typename Parse>
  auto complete(const std::string& system_prompt, Parse&& parse) const
      -> decltype(parse(std::string{})) {
    const nlohmann::json body = {
        {"model", config_.model},
        {"temperature", config_.temperature},
        {"messages",
         {{{"role", "system"}, {"content", system_prompt}},
          {{"role", "user"}, {"content", config_.user_message}}}},
    };
    const std::string payload = body.dump();

    std::string last_error;
    std::string last_raw;
    bool last_unparseable = false;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
      if (attempt > 1) std::this_thread::sleep_for(backoff(attempt - 1));

      httplib::Client client(config_.base_url);
      const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      httplib::Headers headers;
      if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

      auto res = client.Post(config_.path, headers, payload, "application/json");
      if (!res) {
        last_error = "request failed: " + httplib::to_string(res.error());
        last_unparseable = false;
        continue;
      }
      if (res->status == 408 || res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        last_unparseable = false;
        continue;
      }
      if (res->status != 200)
        throw TransportError("HTTP " + std::to_string(res->status) + " from " +
                                 config_.base_url + config_.path + ": " + res->body,
                             attempt);
      try {
        return parse(message_content(res->body));
      } catch (const detail::Unparseable& e) {
        last_error = e.what();
        last_raw = res->body;
        last_unparseable = true;
      }
    }
    if (last_unparseable)
      throw RatingError("unparseable response after " + std::to_string(config_.max_attempts) +
                            " attempts: " + last_error,
                        last_raw);
    throw TransportError(last_error + " (after " + std::to_string(config_.max_attempts) +
                             " attempts)",
                         config_.max_attempts);
  }

 private:
  std::chrono::milliseconds backoff(int retry) const {
    long long ms = config_.backoff_initial_ms;
    for (int i = 1; i < retry && ms < config_.backoff_max_ms; ++i) ms *= 2;
    return std::chrono::milliseconds(std::min<long long>(ms, config_.backoff_max_ms));
  }

  static std::string message_content(const std::string& body) {
    try {
      const auto j = nlohmann::json::parse(body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw detail::Unparseable(std::string("malformed completion envelope: ") + e.what());
    }
  }

  HttpEndpointConfig config_;
  std::string token_;
};

struct HttpRaterConfig {
  HttpEndpointConfig endpoint;
  PromptTemplate prompt{std::string(default_templates::kRaterEsi), "rater_esi"};
  std::string response_field = "esi_level";
  std::string scale_definitions{default_templates::kScaleDefinitionsPlaceholder};
};

class HttpRater final : public RaterBackend {
 public:
  explicit HttpRater(HttpRaterConfig config)
      : config_(std::move(config)), client_(config_.endpoint) {
    config_.prompt.require({"persona_block", "patient_case"});
  }

  std::string id() const override {
    return "http:" + config_.endpoint.base_url + config_.endpoint.path + ":" +
           config_.endpoint.model + ":t=" + format_fixed(config_.endpoint.temperature, 3) +
           ":tmpl=" + template_digest();
  }
  RaterCapabilities capabilities() const override {
    return {config_.endpoint.temperature == 0.0, true};
  }

  std::string render(const Persona& persona, const Case& c) const {
    return config_.prompt.render({{"persona_block", persona.prompt_text},
                                  {"patient_case", c.payload},
                                  {"scale_definitions", config_.scale_definitions}});
  }

  Rating rate(const Persona& persona, const Case& c, const OrdinalScale& scale) override {
    return client_.complete(render(persona, c), [&](const std::string& content) {
      const auto j = detail::extract_json_object(content);
      const auto it = j.find(config_.response_field);
      if (it == j.end() || !it->is_number_integer())
        throw detail::Unparseable("field '" + config_.response_field + "' missing or not an integer");
      const long long level = it->get<long long>();
      if (level < 1 || level > scale.k_levels)
        throw RatingError("rater returned level " + std::to_string(level) + " outside [1, " +
                              std::to_string(scale.k_levels) + "]",
                          content);
      Rating r{static_cast<int>(level), {}};
      if (auto reason = j.find("reasoning"); reason != j.end() && reason->is_string())
        r.rationale = reason->get<std::string>();
      return r;
    });
  }

 private:
  std::string template_digest() const {
    // Template edits must invalidate cached ratings.
    return std::to_string(stable_hash(config_.prompt.text()));
  }

  HttpRaterConfig config_;
  ChatClient client_;
};

// Sends the request's rendered prompt and returns the trimmed reply text.
class HttpGenerator final : public GeneratorBackend {
 public:
  explicit HttpGenerator(HttpEndpointConfig endpoint) : client_(std::move(endpoint)) {}

  std::string generate_persona(const GenerationRequest& request) override {
    if (request.rendered_prompt.empty())
      throw DomainError("generation request '" + request.id + "' has no rendered prompt");
    return client_.complete(request.rendered_prompt, [](const std::string& content) {
      const auto b = content.find_first_not_of(" \t\r\n");
      if (b == std::string::npos) throw detail::Unparseable("empty persona text");
      const auto e = content.find_last_not_of(" \t\r\n");
      return content.substr(b, e - b + 1);
    });
  }

 private:
  ChatClient client_;
};

struct HttpScorerConfig {
  HttpEndpointConfig endpoint;
  PromptTemplate soundness{std::string(default_templates::kJudgeSoundness), "judge_soundness"};
  PromptTemplate grounding{std::string(default_templates::kJudgeGrounding), "judge_grounding"};
};

// Two judge calls per (persona, case): soundness and grounding, each replying
// {"score": n} with n in [0, 4].
class HttpCoherenceScorer final : public CoherenceScorer {
 public:
  explicit HttpCoherenceScorer(HttpScorerConfig config)
      : config_(std::move(config)), client_(config_.endpoint) {
    config_.soundness.require({"rationale"});
    config_.grounding.require({"rationale"});
  }

  CoherenceScore score(const Persona& persona, const Case& c,
                       std::string_view rationale) override {
    const std::map<std::string, std::string, std::less<>> values{
        {"persona_block", persona.prompt_text},
        {"patient_case", c.payload},
        {"rationale", std::string(rationale)}};
    CoherenceScore s{judge(config_.soundness.render(values)),
                     judge(config_.grounding.render(values))};
    return s;
  }

 private:
  double judge(const std::string& prompt) const {
    return client_.complete(prompt, [](const std::string& content) {
      const auto j = detail::extract_json_object(content);
      const auto it = j.find("score");
      if (it == j.end() || !it->is_number()) throw detail::Unparseable("field 'score' missing");
      const double v = it->get<double>();
      if (v < 0.0 || v > 4.0)
        throw RatingError("judge score " + std::to_string(v) + " outside [0, 4]", content);
      return v;
    });
  }

  HttpScorerConfig config_;
  ChatClient client_;
};

}  // namespace steer
