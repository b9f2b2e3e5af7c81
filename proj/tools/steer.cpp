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

// steer command-line tool: simulate, evolve, assemble, infer, curve, compare.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "steer/steer.hpp"

namespace fs = std::filesystem;
using steer::json;

namespace {

// Where error.json goes when a command fails; empty means stderr only.
fs::path g_error_dir;

int report_failure(const std::string& kind, const std::string& message, int code) {
  const json err = {{"schema_version", steer::kSchemaVersion},
                    {"kind", kind},
                    {"message", message},
                    {"exit_code", code}};
  std::cerr << err.dump() << "\n";
  if (!g_error_dir.empty()) {
    try {
      steer::write_json_file(g_error_dir / "error.json", err);
    } catch (...) {
      // Already reporting a failure; the stderr copy has to do.
    }
  }
  return code;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      grid.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw steer::ConfigError("bad percentile grid entry '" + item + "'");
    }
  }
  if (grid.empty()) throw steer::ConfigError("empty percentile grid");
  return grid;
}

steer::OrdinalScale run_scale(const fs::path& run_dir) {
  const json cfg = steer::read_json_file(run_dir / "config.json");
  steer::check_schema_version(cfg, (run_dir / "config.json").string());
  return cfg.contains("scale") ? cfg["scale"].get<steer::OrdinalScale>() : steer::OrdinalScale{};
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  steer::SimulationSpec spec;
  double noise_sd = 0.0;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  g_error_dir = a.out;
  const steer::OrdinalScale scale;
  const auto world = steer::make_synthetic_world(a.spec, scale);
  const fs::path out(a.out);
  fs::create_directories(out);
  steer::write_text_file(out / "cases.jsonl", steer::to_jsonl(world.cases));
  steer::write_text_file(out / "seeds.jsonl", steer::to_jsonl(world.personas));

  json latent = {{"schema_version", steer::kSchemaVersion}, {"seed", a.spec.seed}};
  for (std::size_t i = 0; i < world.cases.size(); ++i)
    latent["cases"].push_back({{"id", world.cases[i].id}, {"theta", world.theta[i]}});
  for (std::size_t j = 0; j < world.personas.size(); ++j)
    latent["personas"].push_back(
        {{"id", world.personas[j].id}, {"latent_bias", world.latent_bias[j]}});
  steer::write_json_file(out / "latent.json", latent);

  const json config = {{"schema_version", steer::kSchemaVersion},
                       {"scale", scale},
                       {"cases", "cases.jsonl"},
                       {"seed_personas", "seeds.jsonl"},
                       {"output_dir", "run"},
                       {"team_size", 10},
                       {"seed", a.spec.seed},
                       {"backend", {{"kind", "synthetic"}, {"noise_sd", a.noise_sd}}}};
  steer::write_json_file(out / "config.json", config);
  std::cout << json{{"cases", world.cases.size()}, {"personas", world.personas.size()},
                    {"out", out.string()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_evolve(const std::string& config_path, const std::string& out_override) {
  const auto rc = steer::load_run_config(config_path);
  const fs::path run_dir = out_override.empty() ? rc.resolve(rc.output_dir) : fs::path(out_override);
  fs::create_directories(run_dir);
  g_error_dir = run_dir;
  fs::remove(run_dir / "error.json");

  const fs::path cases_path = rc.resolve(rc.cases_path);
  if (!fs::exists(cases_path)) throw steer::ConfigError("cases file not found: " + cases_path.string());
  if (rc.seed_personas_path.empty()) throw steer::ConfigError("config: seed_personas is required");
  const fs::path seeds_path = rc.resolve(rc.seed_personas_path);
  if (!fs::exists(seeds_path)) throw steer::ConfigError("seed persona file not found: " + seeds_path.string());
  const auto cases = steer::read_cases(cases_path, rc.scale);
  auto seeds = steer::read_personas(seeds_path);

  auto backends = steer::make_backends(rc);
  steer::RunWriter writer(run_dir);
  writer.write_config(rc.document);
  const auto records = steer::run_evolution(
      std::move(seeds), cases, backends.view(), rc.evolution,
      [&](const steer::GenerationRecord& r) {
        writer.write_record(r);
        std::fprintf(stderr, "generation %d: D=%.4f range=[%.3f, %.3f] survivors=%zu requests=%zu\n",
                     r.generation, r.diversity, r.bias_range.first, r.bias_range.second,
                     r.selection.survivors.size(), r.requests.size());
      });
  const auto& last = records.back();
  std::cout << json{{"run_dir", run_dir.string()},
                    {"generations", records.size()},
                    {"early_stopped", last.early_stopped},
                    {"final_pool", last.next_pool.size()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_assemble(const std::string& run, int n, const std::string& out_path) {
  const fs::path run_dir(run);
  const auto scale = run_scale(run_dir);
  const auto pool = steer::load_final_pool(run_dir);
  const auto team = steer::assemble_team(pool, n);
  const fs::path out = out_path.empty() ? run_dir / ("team_" + std::to_string(n) + ".json")
                                        : fs::path(out_path);
  steer::write_json_file(out, steer::team_document(team, scale));
  std::cout << json{{"team", out.string()}, {"n", n}}.dump() << "\n";
  return 0;
}

std::vector<steer::Case> read_case_input(const std::string& source, const steer::OrdinalScale& scale) {
  std::string text;
  if (source == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    text = ss.str();
  } else {
    text = steer::read_text_file(source);
  }
  std::vector<json> docs;
  try {
    docs.push_back(json::parse(text));  // a single (possibly multi-line) object
  } catch (const json::parse_error&) {
    std::istringstream lines(text);
    std::string line;
    for (int n = 1; std::getline(lines, line); ++n) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        docs.push_back(json::parse(line));
      } catch (const json::parse_error& e) {
        throw steer::ConfigError("case input line " + std::to_string(n) + ": malformed JSON: " + e.what());
      }
    }
  }
  std::vector<steer::Case> cases;
  for (const auto& d : docs) {
    steer::check_schema_version(d, "case input", false);
    try {
      auto c = d.get<steer::Case>();
      c.validate(scale);
      cases.push_back(std::move(c));
    } catch (const json::exception& e) {
      throw steer::ConfigError(std::string("case input: ") + e.what());
    } catch (const steer::DomainError& e) {
      throw steer::ConfigError(std::string("case input: ") + e.what());
    }
  }
  if (cases.empty()) throw steer::ConfigError("case input is empty");
  return cases;
}

steer::OwnedBackends backends_for(const std::string& config_path) {
  if (config_path.empty()) {
    steer::RunConfig rc;
    return steer::make_backends(rc);  // synthetic, seed 0, no noise
  }
  return steer::make_backends(steer::load_run_config(config_path));
}

int cmd_infer(const std::string& team_path, const std::string& case_source, double percentile,
              const std::string& config_path, int parallelism) {
  const auto team = steer::parse_team_document(steer::read_json_file(team_path), team_path);
  const auto cases = read_case_input(case_source, team.scale);
  auto backends = backends_for(config_path);
  const auto outputs =
      steer::collect_outputs(team.members, cases, *backends.rater, team.scale, parallelism);
  for (const auto& out : outputs) {
    const auto sel = steer::percentile_select(out, percentile, team.scale);
    json dist = json::object();
    const auto hist = steer::level_histogram(out, team.scale);
    for (std::size_t l = 0; l < hist.size(); ++l) dist[std::to_string(l + 1)] = hist[l];
    std::cout << json{{"schema_version", steer::kSchemaVersion},
                      {"case_id", out.case_id},
                      {"percentile", percentile},
                      {"level", sel.level},
                      {"rank", sel.rank},
                      {"persona", sel.persona_id},
                      {"distribution", dist}}
                     .dump()
              << "\n";
  }
  return 0;
}

struct CurveArgs {
  std::string team;
  std::string run;
  std::string config;
  std::string cases;
  std::string grid;
  std::string out;
  int bootstrap = 2000;
  std::uint64_t seed = 0;
  int parallelism = 8;
};

int cmd_curve(const CurveArgs& a) {
  const fs::path out(a.out);
  fs::create_directories(out);
  g_error_dir = out;

  steer::OrdinalScale scale;
  std::vector<steer::Persona> members;
  if (!a.team.empty()) {
    auto team = steer::parse_team_document(steer::read_json_file(a.team), a.team);
    scale = team.scale;
    members = std::move(team.members);
  } else {
    scale = run_scale(a.run);
    members = steer::load_final_pool(a.run);
  }
  std::vector<steer::Case> ambiguous;
  for (auto& c : steer::read_cases(a.cases, scale))
    if (c.split == steer::CaseSplit::ambiguous) ambiguous.push_back(std::move(c));
  if (ambiguous.size() < 2) throw steer::ConfigError("curve needs at least 2 ambiguous cases");

  const auto grid = a.grid.empty() ? steer::default_percentile_grid() : parse_grid(a.grid);
  if (grid.front() != 0.0 || grid.back() != 100.0 || !std::is_sorted(grid.begin(), grid.end()))
    throw steer::ConfigError("percentile grid must be ascending from 0 to 100");

  auto backends = backends_for(a.config);
  const auto outputs = steer::collect_outputs(members, ambiguous, *backends.rater, scale, a.parallelism);
  const auto curve = steer::curve_from_outputs(outputs, grid, scale);

  std::string csv = "percentile,overtriage,safe_rate\n";
  char row[96];
  for (const auto& r : curve.rows) {
    std::snprintf(row, sizeof row, "%g,%.6f,%.6f\n", r.percentile, r.overtriage, r.safe_rate);
    csv += row;
  }
  steer::write_text_file(out / "curve.csv", csv);

  // Bootstrap over cases from the collected outputs; no new rater calls.
  const auto interval = steer::bootstrap_ci(
      [&](std::span<const std::size_t> idx) {
        std::vector<steer::EnsembleOutput> sample;
        sample.reserve(idx.size());
        for (auto i : idx) sample.push_back(outputs[i]);
        return steer::ordinal_auc(steer::curve_from_outputs(sample, grid, scale));
      },
      outputs.size(), a.bootstrap, 0.95, a.seed);

  json points = json::array();
  for (const auto& p : curve.points) points.push_back({{"x", p.x}, {"y", p.y}, {"percentiles", p.percentiles}});
  const json summary = {{"schema_version", steer::kSchemaVersion},
                        {"auc", interval.point},
                        {"ci_low", interval.low},
                        {"ci_high", interval.high},
                        {"bootstrap_iterations", a.bootstrap},
                        {"n_cases", ambiguous.size()},
                        {"team_size", members.size()},
                        {"points", points}};
  steer::write_json_file(out / "summary.json", summary);
  std::cout << json{{"auc", interval.point}, {"ci_low", interval.low}, {"ci_high", interval.high}}.dump()
            << "\n";
  return 0;
}

int cmd_compare(const std::string& baseline, const std::string& candidate) {
  auto auc_of = [](const std::string& path) {
    const json j = steer::read_json_file(path);
    steer::check_schema_version(j, path);
    if (!j.contains("auc")) throw steer::ConfigError(path + ": no auc field");
    return j["auc"].get<double>();
  };
  const double b = auc_of(baseline), c = auc_of(candidate);
  std::cout << json{{"schema_version", steer::kSchemaVersion},
                    {"auc_baseline", b},
                    {"auc_candidate", c},
                    {"auc_gain", c - b}}
                   .dump()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"steer: evolve rater personas, assemble teams, and tune a conservativeness dial"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Write a synthetic dataset and seed personas");
  simulate->add_option("--cases", sim.spec.ambiguous_cases, "Ambiguous cases")->capture_default_str();
  simulate->add_option("--safety-cases", sim.spec.safety_cases, "Unambiguous cases (even)")->capture_default_str();
  simulate->add_option("--personas", sim.spec.personas, "Seed personas")->capture_default_str();
  simulate->add_option("--theta-spread", sim.spec.theta_spread, "Ambiguous difficulty half-width")->capture_default_str();
  simulate->add_option("--persona-spread", sim.spec.persona_spread, "Seed bias half-width")->capture_default_str();
  simulate->add_option("--noise-sd", sim.noise_sd, "Rater noise written into config.json")->capture_default_str();
  simulate->add_option("--seed", sim.spec.seed, "Seed")->capture_default_str();
  simulate->add_option("--out", sim.out, "Output directory")->required();

  std::string config_path, out_dir;
  auto* evolve = app.add_subcommand("evolve", "Run the evolutionary search");
  evolve->add_option("--config", config_path, "Run configuration")->required();
  evolve->add_option("--out", out_dir, "Run directory (overrides output_dir)");

  std::string run_dir, team_out;
  int team_size = 10;
  auto* assemble = app.add_subcommand("assemble", "Distil a run's final pool into a team");
  assemble->add_option("--run", run_dir, "Run directory")->required();
  assemble->add_option("--team-size", team_size, "Team size N")->required();
  assemble->add_option("--out", team_out, "Team file (default <run>/team_<N>.json)");

  std::string team_path, case_source, infer_config;
  double percentile = 50.0;
  int parallelism = 8;
  auto* infer = app.add_subcommand("infer", "Decide cases with a team at percentile P");
  infer->add_option("--team", team_path, "team.json")->required();
  infer->add_option("--case", case_source, "Case JSON/JSONL file, or - for stdin")->required();
  infer->add_option("--percentile", percentile, "P in [0, 100]")->required();
  infer->add_option("--config", infer_config, "Backend configuration (default: synthetic)");
  infer->add_option("--parallelism", parallelism, "Concurrent rater calls")->capture_default_str();

  CurveArgs curve_args;
  auto* curve = app.add_subcommand("curve", "Operating curve, ordinal AUC and bootstrap CI");
  auto* team_opt = curve->add_option("--team", curve_args.team, "team.json");
  auto* run_opt = curve->add_option("--run", curve_args.run, "Use a run's final pool instead of a team");
  team_opt->excludes(run_opt);
  curve->add_option("--config", curve_args.config, "Backend configuration (default: synthetic)");
  curve->add_option("--cases", curve_args.cases, "cases.jsonl")->required();
  curve->add_option("--grid", curve_args.grid, "Comma-separated percentiles (default 0..100)");
  curve->add_option("--bootstrap", curve_args.bootstrap, "Bootstrap replicates")->capture_default_str();
  curve->add_option("--seed", curve_args.seed, "Bootstrap seed")->capture_default_str();
  curve->add_option("--parallelism", curve_args.parallelism, "Concurrent rater calls")->capture_default_str();
  curve->add_option("--out", curve_args.out, "Output directory")->required();

  std::string baseline, candidate;
  auto* compare = app.add_subcommand("compare", "AUC gain of one curve summary over another");
  compare->add_option("--baseline", baseline, "summary.json")->required();
  compare->add_option("--candidate", candidate, "summary.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*evolve) return cmd_evolve(config_path, out_dir);
    if (*assemble) return cmd_assemble(run_dir, team_size, team_out);
    if (*infer) return cmd_infer(team_path, case_source, percentile, infer_config, parallelism);
    if (*curve) {
      if (curve_args.team.empty() && curve_args.run.empty())
        throw steer::ConfigError("curve needs --team or --run");
      return cmd_curve(curve_args);
    }
    if (*compare) return cmd_compare(baseline, candidate);
  } catch (const steer::Error& e) {
    return report_failure(e.kind(), e.what(), steer::exit_code_for(e));
  } catch (const json::exception& e) {
    return report_failure("config", e.what(), 2);
  } catch (const fs::filesystem_error& e) {
    return report_failure("config", e.what(), 2);
  }
  return 2;
}
