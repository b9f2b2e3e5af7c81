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

// Least-squares fit of the additive rating model
//
//   rating(i, j) = theta_i + u_j + noise
//
// with sum_i theta_i = 0. Solved by alternating exact coordinate updates,
// which for a complete panel reproduces row/column means after one sweep.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "steer/core_model.hpp"

namespace steer {

struct FitOptions {
  double tolerance = 1e-8;
  int max_iterations = 10'000;
};

struct BiasFit {
  std::vector<std::string> case_ids;
  std::vector<std::string> persona_ids;
  std::vector<double> theta;  // per case, sums to zero
  std::vector<double> u;      // per persona
  std::vector<double> s2;     // per persona mean squared residual
  double loss = 0.0;          // total squared error
  int iterations = 0;
  bool converged = false;
  std::vector<double> loss_trace;  // loss after each sweep

  std::size_t persona_position(std::string_view id) const {
    auto it = std::find(persona_ids.begin(), persona_ids.end(), id);
    if (it == persona_ids.end())
      throw DomainError("persona '" + std::string(id) + "' not in fit");
    return static_cast<std::size_t>(it - persona_ids.begin());
  }
};

namespace detail {

struct Observation {
  std::size_t other;
  double value;
};

inline std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

// Throws IdentifiabilityError when the bipartite case/persona graph is not
// connected. The message lists each component.
inline void require_connected(const RatingMatrix& ratings) {
  const std::size_t nc = ratings.case_count();
  const std::size_t np = ratings.persona_count();
  std::vector<std::size_t> parent(nc + np);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (std::size_t i = 0; i < nc; ++i)
    for (std::size_t j = 0; j < np; ++j)
      if (ratings.at(i, j)) {
        auto a = find_root(parent, i);
        auto b = find_root(parent, nc + j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }

  std::vector<std::size_t> roots;
  for (std::size_t n = 0; n < nc + np; ++n) {
    auto r = find_root(parent, n);
    if (std::find(roots.begin(), roots.end(), r) == roots.end()) roots.push_back(r);
  }
  if (roots.size() <= 1) return;

  std::string msg = "observation graph has " + std::to_string(roots.size()) +
                    " disconnected components:";
  for (std::size_t c = 0; c < roots.size(); ++c) {
    std::string cases, personas;
    for (std::size_t i = 0; i < nc; ++i)
      if (find_root(parent, i) == roots[c])
        cases += (cases.empty() ? "" : ",") + ratings.case_ids()[i];
    for (std::size_t j = 0; j < np; ++j)
      if (find_root(parent, nc + j) == roots[c])
        personas += (personas.empty() ? "" : ",") + ratings.persona_ids()[j];
    msg += " [" + std::to_string(c + 1) + ": cases {" + cases + "} personas {" +
           personas + "}]";
  }
  throw IdentifiabilityError(msg);
}

}  // namespace detail

inline BiasFit fit_additive_bias_model(const RatingMatrix& ratings,
                                       const FitOptions& options = {}) {
  const std::size_t nc = ratings.case_count();
  const std::size_t np = ratings.persona_count();
  if (nc == 0 || np == 0 || ratings.entry_count() == 0)
    throw DomainError("cannot fit an empty rating matrix");
  if (options.max_iterations < 1) throw DomainError("max_iterations must be >= 1");
  detail::require_connected(ratings);

  std::vector<std::vector<detail::Observation>> by_case(nc), by_persona(np);
  for (std::size_t i = 0; i < nc; ++i)
    for (std::size_t j = 0; j < np; ++j)
      if (auto r = ratings.at(i, j)) {
        by_case[i].push_back({j, static_cast<double>(*r)});
        by_persona[j].push_back({i, static_cast<double>(*r)});
      }

  BiasFit fit;
  fit.case_ids = ratings.case_ids();
  fit.persona_ids = ratings.persona_ids();
  fit.theta.assign(nc, 0.0);
  fit.u.assign(np, 0.0);

  auto total_loss = [&] {
    double loss = 0.0;
    for (std::size_t i = 0; i < nc; ++i)
      for (const auto& o : by_case[i]) {
        const double e = o.value - fit.theta[i] - fit.u[o.other];
        loss += e * e;
      }
    return loss;
  };

  for (int it = 1; it <= options.max_iterations; ++it) {
    double change = 0.0;

    double mean_theta = 0.0;
    for (std::size_t i = 0; i < nc; ++i) {
      double acc = 0.0;
      for (const auto& o : by_case[i]) acc += o.value - fit.u[o.other];
      const double next = acc / static_cast<double>(by_case[i].size());
      change = std::max(change, std::abs(next - fit.theta[i]));
      fit.theta[i] = next;
      mean_theta += next;
    }
    // Re-centre; the shift moves into u so predictions are unchanged.
    mean_theta /= static_cast<double>(nc);
    for (auto& t : fit.theta) t -= mean_theta;
    for (auto& v : fit.u) v += mean_theta;

    for (std::size_t j = 0; j < np; ++j) {
      double acc = 0.0;
      for (const auto& o : by_persona[j]) acc += o.value - fit.theta[o.other];
      const double next = acc / static_cast<double>(by_persona[j].size());
      change = std::max(change, std::abs(next - fit.u[j]));
      fit.u[j] = next;
    }

    fit.loss_trace.push_back(total_loss());
    fit.iterations = it;
    if (change < options.tolerance) {
      fit.converged = true;
      break;
    }
  }
  fit.loss = fit.loss_trace.back();

  fit.s2.assign(np, 0.0);
  for (std::size_t j = 0; j < np; ++j) {
    double acc = 0.0;
    for (const auto& o : by_persona[j]) {
      const double e = o.value - fit.theta[o.other] - fit.u[j];
      acc += e * e;
    }
    fit.s2[j] = acc / static_cast<double>(by_persona[j].size());
  }
  return fit;
}

// Mean squared residual of one persona's observed cells under `fit`. Cells of
// cases that are not part of the fit are ignored.
inline double residual_variance(const RatingMatrix& ratings, const BiasFit& fit,
                                std::string_view persona) {
  const std::size_t fp = fit.persona_position(persona);
  const auto pj = ratings.persona_index(persona);
  if (!pj) throw DomainError("persona '" + std::string(persona) + "' not in ratings");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t fc = 0; fc < fit.case_ids.size(); ++fc) {
    const auto ci = ratings.case_index(fit.case_ids[fc]);
    if (!ci) continue;
    if (auto r = ratings.at(*ci, *pj)) {
      const double e = *r - fit.theta[fc] - fit.u[fp];
      acc += e * e;
      ++n;
    }
  }
  if (n == 0)
    throw DomainError("persona '" + std::string(persona) + "' has no fitted ratings");
  return acc / static_cast<double>(n);
}

}  // namespace steer
