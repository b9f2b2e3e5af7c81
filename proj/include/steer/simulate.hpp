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

// Builds synthetic datasets whose latent structure is known, for demos and
// for checking the pipeline against ground truth.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "steer/backends.hpp"

namespace steer {

struct SimulationSpec {
  int ambiguous_cases = 50;
  int safety_cases = 20;  // must be even: split between the two scale ends
  int personas = 8;
  double theta_spread = 1.0;   // ambiguous difficulties lie in [-spread, spread]
  double safety_theta = 4.0;   // |difficulty| of the unambiguous cases
  double persona_spread = 0.5; // seed latent biases lie in [-spread, spread]
  std::uint64_t seed = 0;

  void validate() const {
    if (ambiguous_cases < 1) throw DomainError("need at least one ambiguous case");
    if (safety_cases < 2 || safety_cases % 2 != 0)
      throw DomainError("safety_cases must be a positive even number");
    if (personas < 1) throw DomainError("need at least one persona");
    if (!(theta_spread >= 0.0 && safety_theta > 0.0 && persona_spread >= 0.0))
      throw DomainError("spreads must be non-negative");
  }
};

struct SyntheticWorld {
  std::vector<Case> cases;
  std::vector<double> theta;  // parallel to cases
  std::vector<Persona> personas;
  std::vector<double> latent_bias;  // parallel to personas
};

inline std::string synthetic_case_payload(int index, double theta) {
  return "Synthetic presentation #" + std::to_string(index) + ".\n" +
         format_synthetic_marker({{"theta", theta}});
}

inline std::string synthetic_persona_prompt(double latent_bias) {
  return "You are a synthetic triage rater offset " + format_fixed(latent_bias) +
         " scale units from typical.\n" + format_synthetic_marker({{"latent_bias", latent_bias}});
}

// Ambiguous difficulties are stratified (one uniform draw per equal slice)
// and then centred so they sum to zero; the unambiguous cases sit at
// +/- safety_theta in equal numbers, so their ground truth is the clamped
// end level.
inline SyntheticWorld make_synthetic_world(const SimulationSpec& spec, const OrdinalScale& scale) {
  spec.validate();
  SyntheticWorld w;
  CounterRng rng(mix_key(spec.seed, stable_hash("synthetic-world")));
  const int n = spec.ambiguous_cases;
  std::vector<double> theta(static_cast<std::size_t>(n));
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    theta[i] = -spec.theta_spread + 2.0 * spec.theta_spread * (i + rng.uniform()) / n;
    mean += theta[i] / n;
  }
  char id[32];
  for (int i = 0; i < n; ++i) {
    const double t = theta[i] - mean;
    std::snprintf(id, sizeof id, "amb-%03d", i + 1);
    w.cases.push_back({id, synthetic_case_payload(i + 1, t), CaseSplit::ambiguous, std::nullopt});
    w.theta.push_back(t);
  }
  for (int i = 0; i < spec.safety_cases; ++i) {
    const double t = i % 2 == 0 ? -spec.safety_theta : spec.safety_theta;
    std::snprintf(id, sizeof id, "safe-%03d", i + 1);
    w.cases.push_back({id, synthetic_case_payload(n + i + 1, t), CaseSplit::unambiguous,
                       synthetic_level(t, scale)});
    w.theta.push_back(t);
  }
  for (int j = 0; j < spec.personas; ++j) {
    const double u = spec.personas == 1
                         ? 0.0
                         : -spec.persona_spread + 2.0 * spec.persona_spread * j / (spec.personas - 1);
    std::snprintf(id, sizeof id, "seed-%02d", j + 1);
    Persona p;
    p.id = id;
    p.prompt_text = synthetic_persona_prompt(u);
    w.personas.push_back(std::move(p));
    w.latent_bias.push_back(u);
  }
  return w;
}

}  // namespace steer
