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

// Rater, generator, and coherence-scorer interfaces, with deterministic
// synthetic implementations that realize the additive model
//
//   level = clamp(round(theta_case + u_persona + centre + noise), 1, K)
//
// Synthetic personas and cases describe themselves through an inline marker
// such as `[synthetic latent_bias=-0.5]`, so a rating depends only on the
// texts, ids, and seed.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "steer/core_model.hpp"
#include "steer/generation.hpp"
#include "steer/random.hpp"

namespace steer {

struct Rating {
  int level = 0;
  std::string rationale;
};

struct RaterCapabilities {
  bool deterministic = false;
  bool supports_parallel = false;
};

// Implementations must allow concurrent rate() calls.
class RaterBackend {
 public:
  virtual ~RaterBackend() = default;
  // Stable identifier; part of every cache key.
  virtual std::string id() const = 0;
  virtual RaterCapabilities capabilities() const = 0;
  // Returns a level in [1, K] or throws. Never substitutes a default.
  virtual Rating rate(const Persona& persona, const Case& c, const OrdinalScale& scale) = 0;
};

class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual std::string generate_persona(const GenerationRequest& request) = 0;
};

struct CoherenceScore {
  double soundness = 0.0;  // 0..4
  double grounding = 0.0;  // 0..4
  double mean() const noexcept { return (soundness + grounding) / 2.0; }
};

class CoherenceScorer {
 public:
  virtual ~CoherenceScorer() = default;
  virtual CoherenceScore score(const Persona& persona, const Case& c,
                               std::string_view rationale) = 0;
};

inline void require_score_range(const CoherenceScore& s) {
  auto ok = [](double v) { return v >= 0.0 && v <= 4.0; };
  if (!ok(s.soundness) || !ok(s.grounding))
    throw RatingError("coherence score outside [0, 4]");
}

// ---------------------------------------------------------------------------
// Synthetic marker helpers.

using SyntheticAttributes = std::map<std::string, double, std::less<>>;

inline std::string format_synthetic_marker(const SyntheticAttributes& attrs) {
  std::string out = "[synthetic";
  for (const auto& [k, v] : attrs) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += " " + k + "=" + buf;
  }
  return out + "]";
}

// Attributes of the last `[synthetic ...]` marker in `text` (empty if none).
inline SyntheticAttributes parse_synthetic_marker(std::string_view text) {
  SyntheticAttributes out;
  const auto start = text.rfind("[synthetic");
  if (start == std::string_view::npos) return out;
  const auto end = text.find(']', start);
  if (end == std::string_view::npos) return out;
  std::string_view body = text.substr(start + 10, end - start - 10);
  while (!body.empty()) {
    const auto sp = body.find_first_not_of(' ');
    if (sp == std::string_view::npos) break;
    body.remove_prefix(sp);
    const auto token_end = std::min(body.find(' '), body.size());
    const auto token = body.substr(0, token_end);
    body.remove_prefix(token_end);
    const auto eq = token.find('=');
    if (eq == std::string_view::npos) continue;
    const std::string value(token.substr(eq + 1));
    char* parse_end = nullptr;
    const double v = std::strtod(value.c_str(), &parse_end);
    if (parse_end == value.c_str() || *parse_end != '\0')
      throw DomainError("bad synthetic attribute '" + std::string(token) + "'");
    out.emplace(std::string(token.substr(0, eq)), v);
  }
  return out;
}

inline std::optional<double> synthetic_attribute(std::string_view text, std::string_view key) {
  const auto attrs = parse_synthetic_marker(text);
  auto it = attrs.find(key);
  if (it == attrs.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Index-based simulator.

struct SyntheticRaterConfig {
  std::vector<double> latent_theta;  // per case, centred
  std::vector<double> latent_u;      // per persona
  double noise_sd = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(noise_sd >= 0.0)) throw DomainError("noise_sd must be >= 0");
    double sum = 0.0;
    for (double t : latent_theta) sum += t;
    if (std::abs(sum) > 1e-9) throw DomainError("latent_theta must sum to 0");
  }
};

inline int synthetic_level(double latent_score, const OrdinalScale& scale) {
  const double r = std::round(latent_score + scale.center());
  return static_cast<int>(std::clamp(r, 1.0, static_cast<double>(scale.k_levels)));
}

// Noise for one cell comes from a stream keyed by (seed, case, persona), so
// the result does not depend on evaluation order.
inline int synthetic_rate(const SyntheticRaterConfig& config, const OrdinalScale& scale,
                          std::size_t case_index, std::size_t persona_index) {
  if (case_index >= config.latent_theta.size() || persona_index >= config.latent_u.size())
    throw DomainError("synthetic_rate: index out of range");
  double noise = 0.0;
  if (config.noise_sd > 0.0) {
    CounterRng rng(mix_key(config.seed, case_index, persona_index));
    noise = config.noise_sd * rng.normal();
  }
  return synthetic_level(config.latent_theta[case_index] + config.latent_u[persona_index] + noise,
                         scale);
}

// ---------------------------------------------------------------------------
// Text-driven synthetic backends.

struct SyntheticBackendConfig {
  std::uint64_t seed = 0;
  double noise_sd = 0.0;
};

// Reads `theta` from the case payload and `latent_bias` (plus optional
// `noise_sd`, `fail`) from the persona prompt.
class SyntheticRater final : public RaterBackend {
 public:
  explicit SyntheticRater(SyntheticBackendConfig config = {}) : config_(config) {
    if (!(config_.noise_sd >= 0.0)) throw DomainError("noise_sd must be >= 0");
  }

  std::string id() const override {
    return "synthetic:seed=" + std::to_string(config_.seed) + ":noise=" +
           format_fixed(config_.noise_sd, 6);
  }
  RaterCapabilities capabilities() const override { return {true, true}; }

  Rating rate(const Persona& persona, const Case& c, const OrdinalScale& scale) override {
    const auto p = parse_synthetic_marker(persona.prompt_text);
    if (auto f = p.find("fail"); f != p.end() && f->second != 0.0)
      throw RatingError("synthetic persona '" + persona.id + "' is configured to fail");
    const auto u = p.find("latent_bias");
    if (u == p.end())
      throw RatingError("persona '" + persona.id + "' has no synthetic latent_bias");
    const auto theta = synthetic_attribute(c.payload, "theta");
    if (!theta) throw RatingError("case '" + c.id + "' has no synthetic theta");

    double sd = config_.noise_sd;
    if (auto n = p.find("noise_sd"); n != p.end()) sd = n->second;
    double noise = 0.0;
    if (sd > 0.0) {
      CounterRng rng(mix_key(config_.seed, stable_hash(c.id), stable_hash(persona.id)));
      noise = sd * rng.normal();
    }
    const double latent = *theta + u->second + noise;
    return {synthetic_level(latent, scale), "synthetic latent score " + format_fixed(latent)};
  }

 private:
  SyntheticBackendConfig config_;
};

struct SyntheticGeneratorConfig {
  std::uint64_t seed = 0;
  double perturbation_sd = 0.0;
};

// Produces a persona whose latent bias equals the request target plus an
// optional Gaussian perturbation keyed by (seed, request id).
class SyntheticGenerator final : public GeneratorBackend {
 public:
  explicit SyntheticGenerator(SyntheticGeneratorConfig config = {}) : config_(config) {
    if (!(config_.perturbation_sd >= 0.0)) throw DomainError("perturbation_sd must be >= 0");
  }

  double latent_bias_for(const GenerationRequest& request) const {
    double latent = request.target_bias;
    if (config_.perturbation_sd > 0.0) {
      CounterRng rng(mix_key(config_.seed, stable_hash(request.id)));
      latent += config_.perturbation_sd * rng.normal();
    }
    return latent;
  }

  std::string generate_persona(const GenerationRequest& request) override {
    const double latent = latent_bias_for(request);
    return "You are a synthetic " + std::string(to_string(request.kind)) +
           " rater whose judgments run about " + format_fixed(request.target_bias) +
           " scale units from typical.\n" + format_synthetic_marker({{"latent_bias", latent}});
  }

 private:
  SyntheticGeneratorConfig config_;
};

struct SyntheticScorerConfig {
  double soundness = 3.0;
  double grounding = 3.0;
  // Score falls by `bias_slope` per unit of |latent_bias| when non-zero.
  double bias_slope = 0.0;
};

// A persona marker `coherence=x` overrides both components.
class SyntheticCoherenceScorer final : public CoherenceScorer {
 public:
  explicit SyntheticCoherenceScorer(SyntheticScorerConfig config = {}) : config_(config) {
    for (double v : {config_.soundness, config_.grounding})
      if (!(v >= 0.0 && v <= 4.0)) throw DomainError("synthetic coherence scores must lie in [0, 4]");
  }

  CoherenceScore score(const Persona& persona, const Case&, std::string_view) override {
    const auto p = parse_synthetic_marker(persona.prompt_text);
    if (auto c = p.find("coherence"); c != p.end()) {
      CoherenceScore s{c->second, c->second};
      require_score_range(s);
      return s;
    }
    double drop = 0.0;
    if (auto u = p.find("latent_bias"); u != p.end()) drop = config_.bias_slope * std::abs(u->second);
    return {std::clamp(config_.soundness - drop, 0.0, 4.0),
            std::clamp(config_.grounding - drop, 0.0, 4.0)};
  }

 private:
  SyntheticScorerConfig config_;
};

}  // namespace steer
