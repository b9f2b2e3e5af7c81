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

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "test_support.hpp"

using namespace steer;

namespace {

// A local chat-completion endpoint whose reply content is chosen per test.
class FakeEndpoint {
 public:
  explicit FakeEndpoint(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", [this, handler](const auto& req, auto& res) {
      ++hits;
      last_body = req.body;
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }

  HttpEndpointConfig config() const {
    HttpEndpointConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_);
    c.model = "test-model";
    c.backoff_initial_ms = 1;
    c.backoff_max_ms = 2;
    c.timeout_ms = 2000;
    return c;
  }

  std::atomic<int> hits{0};
  std::string last_body;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string completion(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}
      .dump();
}

Persona persona() {
  Persona p;
  p.id = "p1";
  p.prompt_text = "You are a careful triage nurse.";
  return p;
}
Case patient() { return {"c1", "45-year-old with chest pain", CaseSplit::ambiguous, {}}; }

}  // namespace

TEST(HttpRater, ParsesWellFormedReply) {
  FakeEndpoint ep([](const auto&, auto& res) {
    res.set_content(completion(R"(Here you go: {"reasoning": "chest pain, stable", "esi_level": 2})"),
                    "application/json");
  });
  HttpRater rater({ep.config()});
  const auto r = rater.rate(persona(), patient(), OrdinalScale{});
  EXPECT_EQ(r.level, 2);
  EXPECT_EQ(r.rationale, "chest pain, stable");
  EXPECT_EQ(ep.hits, 1);
  const auto sent = nlohmann::json::parse(ep.last_body);
  EXPECT_EQ(sent["model"], "test-model");
  const std::string system = sent["messages"][0]["content"];
  EXPECT_NE(system.find("You are a careful triage nurse."), std::string::npos);
  EXPECT_NE(system.find("45-year-old with chest pain"), std::string::npos);
}

TEST(HttpRater, OutOfRangeLevelIsARatingErrorAndNotRetried) {
  FakeEndpoint ep([](const auto&, auto& res) {
    res.set_content(completion(R"({"reasoning": "x", "esi_level": 7})"), "application/json");
  });
  HttpRater rater({ep.config()});
  try {
    rater.rate(persona(), patient(), OrdinalScale{});
    FAIL();
  } catch (const RatingError& e) {
    EXPECT_NE(e.raw_payload().find("7"), std::string::npos);
  }
  EXPECT_EQ(ep.hits, 1);
}

TEST(HttpRater, UnparseableAfterRetriesCarriesRawPayload) {
  FakeEndpoint ep([](const auto&, auto& res) {
    res.set_content(completion("I would say level two."), "application/json");
  });
  HttpRater rater({ep.config()});
  try {
    rater.rate(persona(), patient(), OrdinalScale{});
    FAIL();
  } catch (const RatingError& e) {
    EXPECT_NE(e.raw_payload().find("level two"), std::string::npos);
  }
  EXPECT_EQ(ep.hits, 3);
}

TEST(HttpRater, TimeoutsExhaustRetries) {
  FakeEndpoint ep([](const auto&, auto& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    res.set_content(completion(R"({"esi_level": 3})"), "application/json");
  });
  auto cfg = ep.config();
  cfg.timeout_ms = 100;
  HttpRater rater({cfg});
  try {
    rater.rate(persona(), patient(), OrdinalScale{});
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.attempts(), 3);
  }
}

TEST(HttpRater, ServerErrorsAreRetriedThenSucceed) {
  std::atomic<int> n{0};
  FakeEndpoint ep([&n](const auto&, auto& res) {
    if (n++ == 0) {
      res.status = 503;
      return;
    }
    res.set_content(completion(R"({"esi_level": 4})"), "application/json");
  });
  HttpRater rater({ep.config()});
  EXPECT_EQ(rater.rate(persona(), patient(), OrdinalScale{}).level, 4);
  EXPECT_EQ(ep.hits, 2);
}

TEST(HttpRater, IdentityTracksTemplateAndTemperature) {
  HttpEndpointConfig ep;
  ep.base_url = "http://127.0.0.1:1";
  ep.model = "m";
  HttpRaterConfig a{ep};
  HttpRaterConfig b{ep};
  b.prompt = PromptTemplate("{persona_block} {patient_case} {scale_definitions} v2");
  HttpRaterConfig c{ep};
  c.endpoint.temperature = 0.0;
  EXPECT_NE(HttpRater(a).id(), HttpRater(b).id());
  EXPECT_NE(HttpRater(a).id(), HttpRater(c).id());
  EXPECT_TRUE(HttpRater(c).capabilities().deterministic);
}

TEST(HttpGenerator, ReturnsPersonaText) {
  FakeEndpoint ep([](const auto&, auto& res) {
    res.set_content(completion(R"({"persona": "You are a cautious nurse."})"), "application/json");
  });
  HttpGenerator gen(ep.config());
  GenerationRequest req;
  req.id = "req-001";
  req.rendered_prompt = "make a persona";
  EXPECT_NE(gen.generate_persona(req).find("cautious nurse"), std::string::npos);
}

TEST(HttpCoherenceScorer, AveragesTwoJudgeCalls) {
  std::atomic<int> n{0};
  FakeEndpoint ep([&n](const auto&, auto& res) {
    res.set_content(completion(n++ == 0 ? R"({"score": 4})" : R"({"score": 2})"),
                    "application/json");
  });
  HttpCoherenceScorer scorer({ep.config()});
  const auto s = scorer.score(persona(), patient(), "because of the chest pain");
  EXPECT_DOUBLE_EQ(s.soundness, 4.0);
  EXPECT_DOUBLE_EQ(s.grounding, 2.0);
  EXPECT_DOUBLE_EQ(s.mean(), 3.0);
  EXPECT_NE(ep.last_body.find("because of the chest pain"), std::string::npos);
}
