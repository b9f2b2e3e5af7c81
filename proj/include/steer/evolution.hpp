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

// The generation loop: evaluate the pool, fit biases, apply the selection
// cascade, then refill the pool with gap-filling and edge-expanding newborns.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "steer/backends.hpp"
#include "steer/bias_mle.hpp"
#include "steer/diversity.hpp"
#include "steer/generation.hpp"
#include "steer/parallel.hpp"
#include "steer/selection.hpp"

namespace steer {

struct ConvergenceConfig {
  double min_coverage_gain = 0.005;
  int patience = 2;
};

struct EvolutionConfig {
  OrdinalScale scale;
  int n_generations = 5;
  int target_pool_size = 75;
  GenerationRatios ratios;
  SelectionConfig selection;
  ConvergenceConfig convergence;
  std::uint64_t seed = 0;
  int parallelism = 8;
  double failure_budget = 0.1;  // share of a persona's calls allowed to fail
  int coherence_sample = 0;     // ambiguous cases judged per persona; 0 = all
  FitOptions fit;
  GenerationTemplates templates;

  void validate() const {
    scale.validate();
    if (n_generations < 1) throw ConfigError("n_generations must be >= 1");
    if (target_pool_size < 2) throw ConfigError("target_pool_size must be >= 2");
    if (convergence.patience < 1) throw ConfigError("convergence.patience must be >= 1");
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (!(failure_budget >= 0.0 && failure_budget < 1.0))
      throw ConfigError("failure_budget must lie in [0, 1)");
    if (coherence_sample < 0) throw ConfigError("coherence_sample must be >= 0");
    ratios.validate();
    selection.validate();
  }
};

// Non-owning; all three must outlive the run.
struct Backends {
  RaterBackend* rater = nullptr;
  GeneratorBackend* generator = nullptr;
  CoherenceScorer* scorer = nullptr;
};

// Results of backend calls keyed by (persona id, case id). Persona text never
// changes under an id within a run, so entries stay valid across generations.
struct EvaluationMemo {
  struct Cell {
    std::optional<Rating> rating;
    std::optional<CoherenceScore> coherence;
    bool rating_failed = false;
    bool coherence_failed = false;
    bool transport_failure = false;
  };
  std::map<std::pair<std::string, std::string>, Cell> cells;
};

struct PoolEvaluation {
  std::vector<Persona> evaluated;      // evaluable personas with descriptors, input order
  std::vector<Removal> unevaluable;    // stage = evaluation
  RatingMatrix ratings;                // all cases x evaluable personas
  std::vector<std::string> ambiguous_ids;
  std::optional<BiasFit> fit;
  std::size_t backend_calls = 0;
};

namespace detail {

inline void require_both_splits(std::span<const Case> cases) {
  bool amb = false, safe = false;
  for (const auto& c : cases) (c.split == CaseSplit::ambiguous ? amb : safe) = true;
  if (!amb || !safe) throw DomainError("evaluation needs both ambiguous and unambiguous cases");
}

}  // namespace detail

inline PoolEvaluation evaluate_pool(std::span<const Persona> pool, std::span<const Case> cases,
                                    const Backends& backends, const EvolutionConfig& config,
                                    EvaluationMemo& memo) {
  if (!backends.rater || !backends.scorer) throw DomainError("evaluate_pool needs rater and scorer");
  if (pool.empty()) throw DomainError("evaluate_pool: empty pool");
  detail::require_both_splits(cases);
  const auto& scale = config.scale;

  std::vector<const Case*> ambiguous, safety;
  for (const auto& c : cases) {
    c.validate(scale);
    (c.split == CaseSplit::ambiguous ? ambiguous : safety).push_back(&c);
  }
  const std::size_t n_judged =
      config.coherence_sample > 0
          ? std::min<std::size_t>(ambiguous.size(), static_cast<std::size_t>(config.coherence_sample))
          : ambiguous.size();

  // Collect every missing cell. Ratings first, then judge calls that need
  // the rating's rationale.
  using Key = std::pair<std::string, std::string>;
  std::vector<Key> rating_todo;
  for (const auto& p : pool)
    for (const auto& c : cases)
      if (!memo.cells.count({p.id, c.id})) rating_todo.emplace_back(p.id, c.id);

  auto persona_by_id = [&](const std::string& id) -> const Persona& {
    for (const auto& p : pool)
      if (p.id == id) return p;
    throw DomainError("unknown persona '" + id + "'");
  };
  auto case_by_id = [&](const std::string& id) -> const Case& {
    for (const auto& c : cases)
      if (c.id == id) return c;
    throw DomainError("unknown case '" + id + "'");
  };

  std::vector<EvaluationMemo::Cell> fresh(rating_todo.size());
  parallel_for(rating_todo.size(), config.parallelism, [&](std::size_t t) {
    auto& cell = fresh[t];
    try {
      Rating r = backends.rater->rate(persona_by_id(rating_todo[t].first),
                                      case_by_id(rating_todo[t].second), scale);
      require_level(scale, r.level);
      cell.rating = std::move(r);
    } catch (const TransportError&) {
      cell.rating_failed = cell.transport_failure = true;
    } catch (const RatingError&) {
      cell.rating_failed = true;
    } catch (const DomainError&) {
      cell.rating_failed = true;
    }
  });
  PoolEvaluation out;
  out.backend_calls += rating_todo.size();
  for (std::size_t t = 0; t < rating_todo.size(); ++t) memo.cells[rating_todo[t]] = fresh[t];

  std::vector<Key> judge_todo;
  for (const auto& p : pool)
    for (std::size_t i = 0; i < n_judged; ++i) {
      auto& cell = memo.cells[{p.id, ambiguous[i]->id}];
      if (cell.rating && !cell.coherence && !cell.coherence_failed)
        judge_todo.emplace_back(p.id, ambiguous[i]->id);
    }
  std::vector<std::optional<CoherenceScore>> scores(judge_todo.size());
  std::vector<char> transport(judge_todo.size(), 0);
  parallel_for(judge_todo.size(), config.parallelism, [&](std::size_t t) {
    const auto& rationale = memo.cells.at(judge_todo[t]).rating->rationale;
    try {
      auto s = backends.scorer->score(persona_by_id(judge_todo[t].first),
                                      case_by_id(judge_todo[t].second), rationale);
      require_score_range(s);
      scores[t] = s;
    } catch (const TransportError&) {
      transport[t] = 1;
    } catch (const RatingError&) {
    } catch (const DomainError&) {
    }
  });
  out.backend_calls += judge_todo.size();
  for (std::size_t t = 0; t < judge_todo.size(); ++t) {
    auto& cell = memo.cells.at(judge_todo[t]);
    cell.coherence = scores[t];
    cell.coherence_failed = !scores[t];
    cell.transport_failure = cell.transport_failure || transport[t];
  }

  // Failure accounting per persona.
  std::vector<const Persona*> ok;
  bool any_non_transport_failure = false;
  for (const auto& p : pool) {
    std::size_t calls = 0, failed = 0, judged = 0, safety_rated = 0;
    for (const auto& c : cases) {
      const auto& cell = memo.cells.at({p.id, c.id});
      ++calls;
      failed += cell.rating_failed;
      any_non_transport_failure |= cell.rating_failed && !cell.transport_failure;
      if (c.split == CaseSplit::unambiguous && cell.rating) ++safety_rated;
    }
    for (std::size_t i = 0; i < n_judged; ++i) {
      const auto& cell = memo.cells.at({p.id, ambiguous[i]->id});
      if (!cell.rating) continue;
      ++calls;
      if (cell.coherence) {
        ++judged;
      } else {
        ++failed;
        any_non_transport_failure |= !cell.transport_failure;
      }
    }
    const double share = static_cast<double>(failed) / static_cast<double>(calls);
    if (share > config.failure_budget || judged == 0 || safety_rated == 0) {
      out.unevaluable.push_back({p.id, SelectionStage::evaluation, share, config.failure_budget,
                                 "backend failures exceed the failure budget"});
      continue;
    }
    ok.push_back(&p);
  }
  if (ok.empty()) {
    if (!any_non_transport_failure)
      throw TransportError("every persona is unevaluable: backend unreachable", 0);
    throw ExtinctionError("every persona is unevaluable");
  }

  std::vector<std::string> case_ids, persona_ids;
  for (const auto& c : cases) case_ids.push_back(c.id);
  for (const auto* p : ok) persona_ids.push_back(p->id);
  out.ratings = RatingMatrix(case_ids, persona_ids, scale.k_levels);
  for (std::size_t j = 0; j < ok.size(); ++j)
    for (std::size_t i = 0; i < cases.size(); ++i)
      if (const auto& r = memo.cells.at({ok[j]->id, cases[i].id}).rating)
        out.ratings.set(i, j, r->level);

  for (const auto* c : ambiguous) out.ambiguous_ids.push_back(c->id);
  const RatingMatrix amb = out.ratings.select_cases(out.ambiguous_ids);
  out.fit = fit_additive_bias_model(amb, config.fit);

  std::vector<Case> safety_cases;
  for (const auto* c : safety) safety_cases.push_back(*c);
  for (std::size_t j = 0; j < ok.size(); ++j) {
    Persona p = *ok[j];
    Descriptors d;
    const std::size_t fj = out.fit->persona_position(p.id);
    d.bias = out.fit->u[fj] - scale.center();
    d.variance = out.fit->s2[fj];
    d.safety = safety_score(out.ratings, p.id, safety_cases);
    double sum = 0.0;
    std::size_t judged = 0;
    for (std::size_t i = 0; i < n_judged; ++i) {
      const auto& cell = memo.cells.at({p.id, ambiguous[i]->id});
      if (cell.coherence) {
        sum += cell.coherence->mean();
        ++judged;
      }
    }
    d.coherence = sum / static_cast<double>(judged);
    p.descriptors = d;
    out.evaluated.push_back(std::move(p));
  }
  return out;
}

// Post-hoc score of a persona born in the previous generation.
struct TargetingRecord {
  std::string persona_id;
  GenerationKind kind = GenerationKind::gap_fill;
  double target_bias = 0.0;
  double measured_bias = 0.0;
  TargetingScore score;
  std::optional<EdgeDirection> direction;
  std::optional<EdgeExpansionScore> edge;
};

struct GenerationRecord {
  int generation = 0;
  std::vector<Persona> evaluated_pool;  // with descriptors
  RatingMatrix ratings;
  double diversity = 0.0;
  std::pair<double, double> bias_range{0.0, 0.0};
  SelectionReport selection;
  std::vector<GenerationRequest> requests;
  std::vector<TargetingRecord> targeting;
  std::vector<std::string> warnings;
  std::optional<double> frozen_delta;
  std::vector<Persona> next_pool;
  bool terminal = false;
  bool early_stopped = false;
  bool saturated = false;
};

struct EvolutionState {
  int generation = 1;  // the next generation to run
  std::vector<Persona> pool;
  std::optional<double> frozen_delta;
  std::vector<double> diversity_history;
  int stalled = 0;  // consecutive generations below min_coverage_gain
  std::map<std::string, GenerationRequest> pending;  // newborns awaiting scoring
  EvaluationMemo memo;
};

inline GenerationRecord run_generation(EvolutionState& state, std::span<const Case> cases,
                                       const Backends& backends, const EvolutionConfig& config) {
  if (state.pool.empty()) throw DomainError("run_generation: empty pool");
  const auto& scale = config.scale;
  GenerationRecord rec;
  rec.generation = state.generation;

  auto eval = evaluate_pool(state.pool, cases, backends, config, state.memo);
  rec.ratings = eval.ratings;
  rec.evaluated_pool = eval.evaluated;
  rec.diversity = mean_ambiguous_entropy(eval.ratings, eval.ambiguous_ids, scale);
  {
    auto [lo, hi] = std::minmax_element(
        eval.evaluated.begin(), eval.evaluated.end(),
        [](const Persona& a, const Persona& b) { return a.descriptors->bias < b.descriptors->bias; });
    rec.bias_range = {lo->descriptors->bias, hi->descriptors->bias};
  }

  for (const auto& p : eval.evaluated) {
    auto it = state.pending.find(p.id);
    if (it == state.pending.end()) continue;
    const auto& req = it->second;
    TargetingRecord t;
    t.persona_id = p.id;
    t.kind = req.kind;
    t.target_bias = req.target_bias;
    t.measured_bias = p.descriptors->bias;
    t.score = score_targeting(req.target_bias, t.measured_bias);
    t.direction = req.direction;
    if (req.direction && req.reference_range.second > req.reference_range.first)
      t.edge = score_edge_expansion(req.reference_range, *req.direction, t.measured_bias, scale);
    rec.targeting.push_back(std::move(t));
  }
  state.pending.clear();

  // Coverage plateau bookkeeping.
  if (!state.diversity_history.empty()) {
    const double gain = rec.diversity - state.diversity_history.back();
    state.stalled = gain < config.convergence.min_coverage_gain ? state.stalled + 1 : 0;
  }
  state.diversity_history.push_back(rec.diversity);
  rec.early_stopped = state.stalled >= config.convergence.patience &&
                      state.generation < config.n_generations;
  rec.terminal = rec.early_stopped || state.generation >= config.n_generations;

  std::vector<PersonaScores> scores;
  for (const auto& p : eval.evaluated)
    scores.push_back({p.id, p.descriptors->bias, p.descriptors->safety,
                      p.descriptors->coherence, p.descriptors->variance});
  rec.selection = apply_constraints(scores, config.selection, state.frozen_delta);
  rec.selection.removed.insert(rec.selection.removed.begin(), eval.unevaluable.begin(),
                               eval.unevaluable.end());
  if (!state.frozen_delta) state.frozen_delta = rec.selection.frozen_delta;
  rec.frozen_delta = state.frozen_delta;

  std::vector<Persona> survivors;
  for (const auto& id : rec.selection.survivors)
    for (const auto& p : eval.evaluated)
      if (p.id == id) survivors.push_back(p);

  if (rec.terminal) {
    rec.next_pool = survivors;
    ++state.generation;
    state.pool = rec.next_pool;
    return rec;
  }

  const int budget = config.target_pool_size - static_cast<int>(survivors.size());
  rec.saturated = budget == 0;
  if (budget > 0) {
    std::vector<PersonaRef> refs;
    for (const auto& p : survivors) refs.push_back({p.id, p.prompt_text, p.descriptors->bias});
    std::sort(refs.begin(), refs.end(), [](const PersonaRef& a, const PersonaRef& b) {
      return a.bias != b.bias ? a.bias < b.bias : a.id < b.id;
    });
    std::vector<double> biases;
    for (const auto& r : refs) biases.push_back(r.bias);
    GapReport gaps;
    try {
      gaps = find_gaps(biases);
    } catch (const DomainError&) {
      rec.warnings.push_back("fewer than two distinct survivor biases; edge expansion only");
    }
    rec.requests = plan_generation(gaps, refs, budget, config.ratios, scale,
                                   "g" + std::to_string(state.generation) + "-");
    for (auto& r : rec.requests) r.rendered_prompt = render_request(r, config.templates, scale);
  }

  std::vector<std::optional<std::string>> born(rec.requests.size());
  std::vector<std::string> failure(rec.requests.size());
  if (!rec.requests.empty() && !backends.generator)
    throw DomainError("run_generation needs a generator backend");
  parallel_for(rec.requests.size(), config.parallelism, [&](std::size_t i) {
    try {
      born[i] = backends.generator->generate_persona(rec.requests[i]);
    } catch (const Error& e) {
      failure[i] = e.what();
    }
  });

  rec.next_pool = survivors;
  for (std::size_t i = 0; i < rec.requests.size(); ++i) {
    const auto& req = rec.requests[i];
    if (!born[i]) {
      rec.warnings.push_back("request " + req.id + " produced no persona: " + failure[i]);
      continue;
    }
    Persona p;
    p.id = req.id;
    p.prompt_text = *born[i];
    p.origin = req.kind == GenerationKind::gap_fill ? PersonaOrigin::gap_fill
                                                     : PersonaOrigin::edge_expand;
    p.target_bias = req.target_bias;
    p.generation_born = state.generation;
    state.pending[p.id] = req;
    rec.next_pool.push_back(std::move(p));
  }
  ++state.generation;
  state.pool = rec.next_pool;
  return rec;
}

using RecordSink = std::function<void(const GenerationRecord&)>;

// Each finished record goes to `sink` before the next generation starts, so
// a later failure leaves earlier records on disk.
inline std::vector<GenerationRecord> run_evolution(std::vector<Persona> initial_pool,
                                                   std::span<const Case> cases,
                                                   const Backends& backends,
                                                   const EvolutionConfig& config,
                                                   const RecordSink& sink = {}) {
  config.validate();
  if (initial_pool.empty()) throw DomainError("initial pool is empty");
  if (initial_pool.size() > static_cast<std::size_t>(config.target_pool_size))
    throw DomainError("initial pool (" + std::to_string(initial_pool.size()) +
                      ") exceeds target_pool_size (" + std::to_string(config.target_pool_size) +
                      ")");
  std::set<std::string> ids;
  for (const auto& p : initial_pool) {
    p.validate();
    if (!ids.insert(p.id).second) throw DomainError("duplicate persona id '" + p.id + "'");
  }
  std::set<std::string> case_ids;
  for (const auto& c : cases)
    if (!case_ids.insert(c.id).second) throw DomainError("duplicate case id '" + c.id + "'");
  detail::require_both_splits(cases);

  EvolutionState state;
  state.pool = std::move(initial_pool);
  std::vector<GenerationRecord> records;
  for (;;) {
    records.push_back(run_generation(state, cases, backends, config));
    if (sink) sink(records.back());
    if (records.back().terminal) break;
  }
  return records;
}

}  // namespace steer
