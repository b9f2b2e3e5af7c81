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

// JSON forms of the domain types. Every document and every JSONL line that
// steer writes carries "schema_version"; readers reject versions they do not
// know.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "steer/evolution.hpp"
#include "steer/team.hpp"

namespace steer {

inline constexpr int kSchemaVersion = 1;

using json = nlohmann::json;

// A document without the field is accepted only when `required` is false
// (hand-written inputs such as cases.jsonl).
inline void check_schema_version(const json& j, const std::string& where, bool required = true) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  auto it = j.find("schema_version");
  if (it == j.end()) {
    if (required) throw ConfigError(where + ": missing schema_version");
    return;
  }
  if (!it->is_number_integer() || it->get<int>() != kSchemaVersion)
    throw ConfigError(where + ": unsupported schema_version " + it->dump());
}

namespace detail {

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace detail

inline void to_json(json& j, const OrdinalScale& s) {
  j = {{"k_levels", s.k_levels}, {"most_urgent_level", s.most_urgent_level},
       {"midpoint", s.midpoint}};
}
inline void from_json(const json& j, OrdinalScale& s) {
  const int k = j.at("k_levels").get<int>();
  s = OrdinalScale::make(k, j.value("most_urgent_level", 1),
                         detail::get_optional<int>(j, "midpoint"));
}

inline const char* to_string(CaseSplit s) noexcept {
  return s == CaseSplit::ambiguous ? "ambiguous" : "unambiguous";
}
inline CaseSplit parse_split(const std::string& s) {
  if (s == "ambiguous") return CaseSplit::ambiguous;
  if (s == "unambiguous") return CaseSplit::unambiguous;
  throw ConfigError("unknown case split '" + s + "'");
}

inline void to_json(json& j, const Case& c) {
  j = {{"id", c.id}, {"payload", c.payload}, {"split", to_string(c.split)}};
  detail::put_optional(j, "ground_truth", c.ground_truth);
}
inline void from_json(const json& j, Case& c) {
  c.id = j.at("id").get<std::string>();
  const auto& payload = j.at("payload");
  // Structured payloads are kept as their compact JSON text.
  c.payload = payload.is_string() ? payload.get<std::string>() : payload.dump();
  c.split = parse_split(j.at("split").get<std::string>());
  c.ground_truth = detail::get_optional<int>(j, "ground_truth");
}

inline const char* to_string(PersonaOrigin o) noexcept {
  switch (o) {
    case PersonaOrigin::seed: return "seed";
    case PersonaOrigin::gap_fill: return "gap_fill";
    case PersonaOrigin::edge_expand: return "edge_expand";
  }
  return "?";
}
inline PersonaOrigin parse_origin(const std::string& s) {
  if (s == "seed") return PersonaOrigin::seed;
  if (s == "gap_fill") return PersonaOrigin::gap_fill;
  if (s == "edge_expand") return PersonaOrigin::edge_expand;
  throw ConfigError("unknown persona origin '" + s + "'");
}

inline void to_json(json& j, const Descriptors& d) {
  j = {{"bias", d.bias}, {"variance", d.variance}, {"safety", d.safety},
       {"coherence", d.coherence}};
}
inline void from_json(const json& j, Descriptors& d) {
  d.bias = j.at("bias").get<double>();
  d.variance = j.at("variance").get<double>();
  d.safety = j.at("safety").get<double>();
  d.coherence = j.at("coherence").get<double>();
}

inline void to_json(json& j, const Persona& p) {
  j = {{"id", p.id}, {"prompt_text", p.prompt_text}, {"origin", to_string(p.origin)},
       {"generation_born", p.generation_born}};
  detail::put_optional(j, "target_bias", p.target_bias);
  detail::put_optional(j, "descriptors", p.descriptors);
}
inline void from_json(const json& j, Persona& p) {
  p.id = j.at("id").get<std::string>();
  p.prompt_text = j.at("prompt_text").get<std::string>();
  p.origin = parse_origin(j.value("origin", std::string("seed")));
  p.generation_born = j.value("generation_born", 0);
  p.target_bias = detail::get_optional<double>(j, "target_bias");
  p.descriptors = detail::get_optional<Descriptors>(j, "descriptors");
  p.validate();
}

inline void to_json(json& j, const Removal& r) {
  j = {{"persona_id", r.persona_id}, {"stage", to_string(r.stage)}, {"metric", r.metric},
       {"threshold", r.threshold}, {"reason", r.reason}};
}

inline void to_json(json& j, const SelectionReport& r) {
  j = {{"survivors", r.survivors},
       {"removed", r.removed},
       {"delta_tightened", r.delta_tightened},
       {"clusters", r.clusters},
       {"density_check", r.density_check}};
  detail::put_optional(j, "frozen_delta", r.frozen_delta);
}

inline void to_json(json& j, const GenerationRequest& r) {
  std::vector<std::string> refs;
  for (const auto& ref : r.references) refs.push_back(ref.id);
  j = {{"id", r.id},
       {"kind", to_string(r.kind)},
       {"target_bias", r.target_bias},
       {"reference_ids", refs},
       {"reference_range", {r.reference_range.first, r.reference_range.second}},
       {"rendered_prompt", r.rendered_prompt}};
  if (r.direction) j["direction"] = to_string(*r.direction);
}

inline void to_json(json& j, const TargetingRecord& t) {
  j = {{"persona_id", t.persona_id},
       {"kind", to_string(t.kind)},
       {"target_bias", t.target_bias},
       {"measured_bias", t.measured_bias},
       {"error", t.score.error},
       {"category", to_string(t.score.category)}};
  if (t.direction) j["direction"] = to_string(*t.direction);
  if (t.edge) j["edge"] = {{"reached_decile", t.edge->reached_decile}, {"extension", t.edge->extension}};
}

// The record document; the pool snapshot and ratings go to their own files.
inline json record_document(const GenerationRecord& r) {
  std::vector<std::string> next_ids;
  std::vector<Persona> newborns;
  for (const auto& p : r.next_pool) {
    next_ids.push_back(p.id);
    if (!p.descriptors) newborns.push_back(p);
  }
  json j = {{"schema_version", kSchemaVersion},
            {"generation", r.generation},
            {"diversity", r.diversity},
            {"bias_range", {r.bias_range.first, r.bias_range.second}},
            {"pool_size", r.evaluated_pool.size()},
            {"selection", r.selection},
            {"requests", r.requests},
            {"targeting", r.targeting},
            {"warnings", r.warnings},
            {"next_pool", next_ids},
            {"newborns", newborns},
            {"terminal", r.terminal},
            {"early_stopped", r.early_stopped},
            {"saturated", r.saturated}};
  detail::put_optional(j, "frozen_delta", r.frozen_delta);
  return j;
}

inline void to_json(json& j, const TeamSlot& s) {
  j = {{"persona_id", s.persona_id}, {"kind", to_string(s.kind)}};
  if (s.bucket) {
    j["bucket"] = *s.bucket;
    j["bucket_range"] = {s.bucket_lo, s.bucket_hi};
    j["bucket_center"] = s.bucket_center;
  }
}

inline json team_document(const Team& team, const OrdinalScale& scale) {
  return {{"schema_version", kSchemaVersion}, {"n", team.n}, {"scale", scale},
          {"members", team.members}, {"provenance", team.provenance}};
}

struct LoadedTeam {
  OrdinalScale scale;
  std::vector<Persona> members;
};

inline LoadedTeam parse_team_document(const json& j, const std::string& where) {
  check_schema_version(j, where);
  LoadedTeam t;
  t.scale = j.at("scale").get<OrdinalScale>();
  t.members = j.at("members").get<std::vector<Persona>>();
  if (t.members.empty()) throw ConfigError(where + ": team has no members");
  for (const auto& m : t.members)
    if (!m.descriptors) throw ConfigError(where + ": member '" + m.id + "' lacks descriptors");
  return t;
}

}  // namespace steer
