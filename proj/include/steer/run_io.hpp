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

// Run configuration, dataset readers and the run-directory writer.

#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "steer/cache.hpp"
#include "steer/http_backend.hpp"
#include "steer/serialization.hpp"

namespace steer {

namespace fs = std::filesystem;

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes through a sibling temp file so readers never see a partial file.
inline void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << text;
    if (!out) throw ConfigError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline json read_json_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
}

inline void write_json_file(const fs::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// One JSON object per non-blank line.
inline std::vector<json> read_jsonl(const fs::path& path, bool version_required) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::vector<json> out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(n);
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ConfigError(where + ": malformed JSON: " + e.what());
    }
    check_schema_version(out.back(), where, version_required);
  }
  return out;
}

template <typename T>
std::string to_jsonl(const std::vector<T>& items) {
  std::string out;
  for (const auto& item : items) {
    json j = item;
    j["schema_version"] = kSchemaVersion;
    out += j.dump() + "\n";
  }
  return out;
}

inline std::vector<Case> read_cases(const fs::path& path, const OrdinalScale& scale) {
  std::vector<Case> cases;
  std::set<std::string> ids;
  for (const auto& j : read_jsonl(path, false)) {
    Case c;
    try {
      c = j.get<Case>();
      c.validate(scale);
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": bad case record: " + e.what());
    } catch (const DomainError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    if (!ids.insert(c.id).second)
      throw ConfigError(path.string() + ": duplicate case id '" + c.id + "'");
    cases.push_back(std::move(c));
  }
  if (cases.empty()) throw ConfigError(path.string() + ": no cases");
  return cases;
}

inline std::vector<Persona> read_personas(const fs::path& path) {
  std::vector<Persona> personas;
  std::set<std::string> ids;
  for (const auto& j : read_jsonl(path, false)) {
    Persona p;
    try {
      p = j.get<Persona>();
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": bad persona record: " + e.what());
    } catch (const DomainError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    if (!ids.insert(p.id).second)
      throw ConfigError(path.string() + ": duplicate persona id '" + p.id + "'");
    personas.push_back(std::move(p));
  }
  if (personas.empty()) throw ConfigError(path.string() + ": no personas");
  return personas;
}

// ---------------------------------------------------------------------------
// Configuration

struct BackendSettings {
  std::string kind = "synthetic";  // "synthetic" | "http"
  double noise_sd = 0.0;
  double perturbation_sd = 0.0;
  SyntheticScorerConfig synthetic_scorer;
  HttpEndpointConfig rater_endpoint;
  HttpEndpointConfig generator_endpoint;
  HttpEndpointConfig judge_endpoint;
  std::string response_field = "esi_level";
  std::string cache_dir;  // empty: no rating cache
};

struct RunConfig {
  fs::path base_dir;  // relative paths resolve against the config file's folder
  json document;      // as loaded, re-emitted into the run directory
  OrdinalScale scale;
  std::string cases_path;
  std::string seed_personas_path;
  std::string output_dir = "run";
  int team_size = 10;
  std::uint64_t seed = 0;
  BackendSettings backend;
  EvolutionConfig evolution;
  // Template file overrides (paths); empty keeps the built-in text.
  std::string rater_template, gap_fill_template, edge_expand_template, judge_soundness_template,
      judge_grounding_template, scale_definitions;

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
};

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                                const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline HttpEndpointConfig parse_endpoint(const json& j) {
  HttpEndpointConfig e;
  e.base_url = j.at("base_url").get<std::string>();
  e.path = j.value("path", e.path);
  e.model = j.value("model", e.model);
  e.temperature = j.value("temperature", e.temperature);
  e.api_key_env = j.value("api_key_env", e.api_key_env);
  e.max_attempts = j.value("max_attempts", e.max_attempts);
  e.backoff_initial_ms = j.value("backoff_initial_ms", e.backoff_initial_ms);
  e.backoff_max_ms = j.value("backoff_max_ms", e.backoff_max_ms);
  e.timeout_ms = j.value("timeout_ms", e.timeout_ms);
  e.user_message = j.value("user_message", e.user_message);
  e.validate();
  return e;
}

}  // namespace detail

inline RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  RunConfig rc;
  rc.base_dir = base_dir;
  rc.document = j;
  try {
    check_schema_version(j, "config");
    detail::reject_unknown_keys(j,
                                {"schema_version", "scale", "cases", "seed_personas",
                                 "output_dir", "team_size", "seed", "backend", "evolution",
                                 "selection", "templates"},
                                "config");
    if (j.contains("scale")) rc.scale = j.at("scale").get<OrdinalScale>();
    rc.cases_path = j.at("cases").get<std::string>();
    rc.seed_personas_path = j.value("seed_personas", std::string());
    rc.output_dir = j.value("output_dir", rc.output_dir);
    rc.team_size = j.value("team_size", rc.team_size);
    rc.seed = j.value("seed", std::uint64_t{0});

    auto& ev = rc.evolution;
    ev.scale = rc.scale;
    ev.seed = rc.seed;
    if (auto it = j.find("evolution"); it != j.end()) {
      const json& e = *it;
      detail::reject_unknown_keys(e,
                                  {"n_generations", "target_pool_size", "ratios", "convergence",
                                   "parallelism", "failure_budget", "coherence_sample", "fit"},
                                  "config.evolution");
      ev.n_generations = e.value("n_generations", ev.n_generations);
      ev.target_pool_size = e.value("target_pool_size", ev.target_pool_size);
      if (e.contains("ratios")) {
        ev.ratios.gap_filling = e["ratios"].value("gap_filling", ev.ratios.gap_filling);
        ev.ratios.edge_expansion = e["ratios"].value("edge_expansion", ev.ratios.edge_expansion);
      }
      if (e.contains("convergence")) {
        const json& c = e["convergence"];
        ev.convergence.min_coverage_gain =
            c.value("min_coverage_gain", ev.convergence.min_coverage_gain);
        ev.convergence.patience = c.value("patience", ev.convergence.patience);
      }
      ev.parallelism = e.value("parallelism", ev.parallelism);
      ev.failure_budget = e.value("failure_budget", ev.failure_budget);
      ev.coherence_sample = e.value("coherence_sample", ev.coherence_sample);
      if (e.contains("fit")) {
        ev.fit.tolerance = e["fit"].value("tolerance", ev.fit.tolerance);
        ev.fit.max_iterations = e["fit"].value("max_iterations", ev.fit.max_iterations);
      }
    }
    if (auto it = j.find("selection"); it != j.end()) {
      const json& s = *it;
      detail::reject_unknown_keys(s,
                                  {"safety_percentile", "safety_threshold",
                                   "coherence_percentile", "variance_percentile",
                                   "min_cluster_size", "cluster_delta"},
                                  "config.selection");
      auto& sel = ev.selection;
      sel.safety_percentile = s.value("safety_percentile", sel.safety_percentile);
      sel.safety_threshold = s.value("safety_threshold", sel.safety_threshold);
      sel.coherence_percentile = s.value("coherence_percentile", sel.coherence_percentile);
      sel.variance_percentile = s.value("variance_percentile", sel.variance_percentile);
      sel.min_cluster_size = s.value("min_cluster_size", sel.min_cluster_size);
      sel.cluster_delta = detail::get_optional<double>(s, "cluster_delta");
    }
    if (auto it = j.find("backend"); it != j.end()) {
      const json& b = *it;
      auto& be = rc.backend;
      be.kind = b.value("kind", be.kind);
      be.cache_dir = b.value("cache_dir", be.cache_dir);
      if (be.kind == "synthetic") {
        be.noise_sd = b.value("noise_sd", be.noise_sd);
        be.perturbation_sd = b.value("perturbation_sd", be.perturbation_sd);
        be.synthetic_scorer.soundness = b.value("soundness", be.synthetic_scorer.soundness);
        be.synthetic_scorer.grounding = b.value("grounding", be.synthetic_scorer.grounding);
        be.synthetic_scorer.bias_slope = b.value("coherence_bias_slope", be.synthetic_scorer.bias_slope);
      } else if (be.kind == "http") {
        be.rater_endpoint = detail::parse_endpoint(b.at("rater"));
        be.generator_endpoint = detail::parse_endpoint(b.value("generator", b.at("rater")));
        be.judge_endpoint = detail::parse_endpoint(b.value("judge", b.at("rater")));
        be.response_field = b.value("response_field", be.response_field);
      } else {
        throw ConfigError("config.backend: unknown kind '" + be.kind + "'");
      }
    }
    if (auto it = j.find("templates"); it != j.end()) {
      const json& t = *it;
      detail::reject_unknown_keys(t,
                                  {"rater", "gap_fill", "edge_expand", "judge_soundness",
                                   "judge_grounding", "scale_definitions", "role", "setting"},
                                  "config.templates");
      rc.rater_template = t.value("rater", std::string());
      rc.gap_fill_template = t.value("gap_fill", std::string());
      rc.edge_expand_template = t.value("edge_expand", std::string());
      rc.judge_soundness_template = t.value("judge_soundness", std::string());
      rc.judge_grounding_template = t.value("judge_grounding", std::string());
      rc.scale_definitions = t.value("scale_definitions", std::string());
      ev.templates.role = t.value("role", ev.templates.role);
      ev.templates.setting = t.value("setting", ev.templates.setting);
    }
    if (!rc.gap_fill_template.empty())
      ev.templates.gap_fill = PromptTemplate::from_file(rc.resolve(rc.gap_fill_template));
    if (!rc.edge_expand_template.empty())
      ev.templates.edge_expand = PromptTemplate::from_file(rc.resolve(rc.edge_expand_template));
    if (rc.team_size < 2) throw ConfigError("team_size must be >= 2");
    ev.validate();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const TemplateError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return rc;
}

inline RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_run_config(read_json_file(path), fs::absolute(path).parent_path());
}

// Owns the backends a RunConfig describes.
struct OwnedBackends {
  std::shared_ptr<RaterBackend> rater;
  std::unique_ptr<GeneratorBackend> generator;
  std::unique_ptr<CoherenceScorer> scorer;

  Backends view() const { return {rater.get(), generator.get(), scorer.get()}; }
};

inline OwnedBackends make_backends(const RunConfig& rc) {
  OwnedBackends b;
  const auto& be = rc.backend;
  if (be.kind == "synthetic") {
    b.rater = std::make_shared<SyntheticRater>(SyntheticBackendConfig{rc.seed, be.noise_sd});
    b.generator = std::make_unique<SyntheticGenerator>(
        SyntheticGeneratorConfig{rc.seed, be.perturbation_sd});
    b.scorer = std::make_unique<SyntheticCoherenceScorer>(be.synthetic_scorer);
  } else {
    HttpRaterConfig rater{be.rater_endpoint};
    rater.response_field = be.response_field;
    if (!rc.rater_template.empty())
      rater.prompt = PromptTemplate::from_file(rc.resolve(rc.rater_template));
    if (!rc.scale_definitions.empty())
      rater.scale_definitions = read_text_file(rc.resolve(rc.scale_definitions));
    b.rater = std::make_shared<HttpRater>(std::move(rater));
    b.generator = std::make_unique<HttpGenerator>(be.generator_endpoint);
    HttpScorerConfig judge{be.judge_endpoint};
    if (!rc.judge_soundness_template.empty())
      judge.soundness = PromptTemplate::from_file(rc.resolve(rc.judge_soundness_template));
    if (!rc.judge_grounding_template.empty())
      judge.grounding = PromptTemplate::from_file(rc.resolve(rc.judge_grounding_template));
    b.scorer = std::make_unique<HttpCoherenceScorer>(std::move(judge));
  }
  if (!be.cache_dir.empty())
    b.rater = std::make_shared<CachedRater>(rc.resolve(be.cache_dir), b.rater);
  return b;
}

// ---------------------------------------------------------------------------
// Run directory

class RunWriter {
 public:
  explicit RunWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  const fs::path& dir() const noexcept { return dir_; }

  void write_config(const json& config) {
    json j = config;
    j["schema_version"] = kSchemaVersion;
    write_json_file(dir_ / "config.json", j);
  }

  void write_record(const GenerationRecord& r) {
    const std::string g = std::to_string(r.generation);
    write_json_file(dir_ / ("generation_" + g + ".json"), record_document(r));
    write_text_file(dir_ / ("pool_" + g + ".jsonl"), to_jsonl(r.evaluated_pool));

    std::string lines;
    const auto& m = r.ratings;
    for (std::size_t j = 0; j < m.persona_ids().size(); ++j)
      for (std::size_t i = 0; i < m.case_ids().size(); ++i)
        if (auto level = m.at(i, j))
          lines += json{{"schema_version", kSchemaVersion},
                        {"persona_id", m.persona_ids()[j]},
                        {"case_id", m.case_ids()[i]},
                        {"level", *level}}
                       .dump() +
                   "\n";
    write_text_file(dir_ / ("ratings_" + g + ".jsonl"), lines);

    if (r.frozen_delta && !delta_written_) {
      write_json_file(dir_ / "frozen_delta.json",
                      {{"schema_version", kSchemaVersion},
                       {"delta", *r.frozen_delta},
                       {"calibrated_in_generation", r.generation}});
      delta_written_ = true;
    }
  }

 private:
  fs::path dir_;
  bool delta_written_ = false;
};

// The final pool of a run: the survivors listed by the last record.
inline std::vector<Persona> load_final_pool(const fs::path& run_dir) {
  int last = 0;
  for (int g = 1; fs::exists(run_dir / ("generation_" + std::to_string(g) + ".json")); ++g) last = g;
  if (last == 0) throw ConfigError("no generation records in " + run_dir.string());
  const std::string g = std::to_string(last);
  const json rec = read_json_file(run_dir / ("generation_" + g + ".json"));
  check_schema_version(rec, "generation_" + g + ".json");
  std::set<std::string> survivors;
  for (const auto& id : rec.at("selection").at("survivors")) survivors.insert(id.get<std::string>());
  std::vector<Persona> pool;
  for (const auto& j : read_jsonl(run_dir / ("pool_" + g + ".jsonl"), true)) {
    Persona p = j.get<Persona>();
    if (survivors.count(p.id)) pool.push_back(std::move(p));
  }
  return pool;
}

}  // namespace steer
