// Copyright 2026 The tokenecon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TOKENECON_CLI_HPP_
#define TOKENECON_CLI_HPP_

// Command-line front end. Exit codes: 0 success, 1 validation or usage
// error, 2 verification failure (bound violated or ledger chain broken).

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tokenecon/accounting.hpp"
#include "tokenecon/calibration.hpp"
#include "tokenecon/instance.hpp"
#include "tokenecon/io.hpp"
#include "tokenecon/scenario.hpp"
#include "tokenecon/simulator.hpp"
#include "tokenecon/trilemma.hpp"

namespace tokenecon::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitVerification = 2;

inline constexpr const char* kOutputRootEnv = "TOKENECON_OUTPUT_ROOT";

inline std::filesystem::path output_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return "results";
}

inline ScenarioConfig load_with_overrides(const std::string& path, const std::optional<std::uint64_t>& seed) {
  if (!std::filesystem::exists(path)) throw ValidationError({"scenario file not found: " + path});
  ScenarioConfig c = load_scenario(path);
  if (seed) c.seed = *seed;
  return c;
}

// One labeled instance per request: its prompt (context) tokens.
inline std::vector<LabeledInstance> labeled_corpus(const ScenarioConfig& c, const char* label) {
  RngStream s = derive_rng_stream(c.seed, label);
  std::vector<LabeledInstance> out;
  for (const Request& r : generate_workload(c.workload, c.workload.horizon, s)) {
    LabeledInstance li;
    for (const TokenUnit& u : r.prompt) {
      li.units.push_back(u);
      li.true_values.push_back(weighted_value(u.value, c.weights));
    }
    out.push_back(std::move(li));
  }
  return out;
}

// Per-class rank bias of every cheap proxy over context tokens (the oracle
// row is identically zero).
inline std::string bias_profile_csv(const ScenarioConfig& c) {
  const std::vector<LabeledInstance> corpus = labeled_corpus(c, "bias");
  std::vector<TokenUnit> cal_units;
  std::vector<double> cal_values;
  for (const LabeledInstance& li : labeled_corpus(c, "calibration")) {
    cal_units.insert(cal_units.end(), li.units.begin(), li.units.end());
    cal_values.insert(cal_values.end(), li.true_values.begin(), li.true_values.end());
  }
  const StaticPredictorTable table = StaticPredictorTable::calibrate(cal_units, cal_values, c.estimator.bucket_width);
  CsvWriter w(c.seed, serialize_scenario(c), {"estimator", "class", "bias_mean", "bias_se", "count"});
  for (Provenance p : {Provenance::kOracle, Provenance::kRecency, Provenance::kPosition,
                       Provenance::kAttentionSurrogate, Provenance::kStaticPredictor}) {
    EstimatorSpec spec = c.estimator;
    spec.kind = p;
    const auto prof = bias_profile(spec, corpus, &table);
    for (const auto& [cls, b] : prof) {
      w.row({std::string(to_string(p)), std::string(to_string(cls)), fmt_num(b.mean), fmt_num(b.std_error),
             std::to_string(b.count)});
    }
  }
  return w.str();
}

inline FrontierScenario frontier_scenario_from(const ScenarioConfig& c) {
  FrontierScenario sc;
  sc.workload = c.workload;
  sc.weights = c.weights;
  sc.seed = c.seed;
  if (std::isfinite(c.budgets.memory)) sc.memory = c.budgets.memory;
  return sc;
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(item == "inf" ? kUnconstrained : std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError({"bad list element '" + item + "'"});
    }
  }
  return out;
}

inline int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"tokenecon: token economics simulator and policy laboratory", "tokenecon"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all");

  std::string outdir;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  int verbosity = 0;
  app.add_option("--outdir", outdir, "output root (default: $TOKENECON_OUTPUT_ROOT or ./results)");
  app.add_option("--seed", seed, "override the scenario seed");
  app.add_option("--jobs", jobs, "worker threads for sweeps")->check(CLI::Range(1u, 256u));
  app.add_flag("-v,--verbose", verbosity, "verbosity");

  std::string scenario_path;
  auto* run = app.add_subcommand("run", "simulate one scenario");
  run->add_option("scenario", scenario_path, "scenario JSON")->required();

  auto* sweep = app.add_subcommand("sweep", "trilemma frontier sweep");
  std::uint32_t sweep_seeds = 20;
  std::string grid_blocks, grid_taus;
  std::vector<std::string> grid_policies, grid_estimators;
  sweep->add_option("scenario", scenario_path, "scenario JSON")->required();
  sweep->add_option("--seeds", sweep_seeds, "seeds per grid cell")->check(CLI::Range(2u, 100000u));
  sweep->add_option("--policies", grid_policies, "extra grid: policy kinds")->delimiter(',');
  sweep->add_option("--estimators", grid_estimators, "extra grid: estimator kinds")->delimiter(',');
  sweep->add_option("--blocks", grid_blocks, "extra grid: block sizes, comma separated");
  sweep->add_option("--taus", grid_taus, "extra grid: tau values, comma separated");

  auto* vb = app.add_subcommand("verify-bound", "Monte Carlo check of the planted-family value bound");
  std::uint32_t bn = 100, bb = 10, bk = 10;
  std::uint64_t trials = 10000, bseed = 0;
  vb->add_option("--N", bn, "units")->check(CLI::PositiveNumber);
  vb->add_option("--B", bb, "planted units")->check(CLI::PositiveNumber);
  vb->add_option("--k", bk, "probes");
  vb->add_option("--trials", trials, "trials")->check(CLI::Range(std::uint64_t{100}, std::uint64_t{100000000}));
  vb->add_option("--bound-seed", bseed, "RNG seed (also set by --seed)");

  auto* be = app.add_subcommand("breakeven", "CV x pressure regime map");
  std::string cvs = "0,0.5,1,2,4", pressures = "0,0.5,1,2";
  std::uint32_t be_seeds = 20;
  be->add_option("scenario", scenario_path, "scenario JSON")->required();
  be->add_option("--cvs", cvs, "value CV grid");
  be->add_option("--pressures", pressures, "pressure grid");
  be->add_option("--seeds", be_seeds, "paired seeds per cell")->check(CLI::Range(2u, 100000u));

  auto* audit = app.add_subcommand("audit", "verify a ledger file");
  std::string ledger_path;
  audit->add_option("ledger", ledger_path, "ledger.bin")->required();

  auto* attr = app.add_subcommand("attribution", "value vector for an instance file");
  std::string instance_path, estimator_kind = "shapley_exact";
  EstimatorSpec attr_spec;
  attr->add_option("instance", instance_path, "instance JSON")->required();
  attr->add_option("--estimator", estimator_kind, "estimator kind");
  attr->add_option("--samples", attr_spec.samples, "Monte Carlo permutations");

  std::vector<std::string> argv_store = args;
  std::reverse(argv_store.begin(), argv_store.end());
  try {
    app.parse(argv_store);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    const std::filesystem::path root = output_root(outdir);
    if (*run) {
      const ScenarioConfig c = load_with_overrides(scenario_path, seed);
      const SimResult r = simulate(c);
      const auto dir = write_run_artifacts(r, c, root);
      if (verbosity > 0) err << "wrote " << dir.string() << '\n';
      out << metrics_json(r.metrics, c)["metrics"].dump(2) << '\n';
      return kExitOk;
    }
    if (*sweep) {
      const ScenarioConfig c = load_with_overrides(scenario_path, seed);
      const FrontierScenario sc = frontier_scenario_from(c);
      const double tau = c.budgets.tau;
      std::vector<FrontierCell> grid = preset_cells(tau);
      if (!grid_policies.empty() || !grid_estimators.empty() || !grid_blocks.empty() || !grid_taus.empty()) {
        std::vector<PolicyKind> pk;
        for (const auto& s : grid_policies) pk.push_back(policy_kind_from_string(s));
        if (pk.empty()) pk.push_back(c.policy.kind);
        std::vector<Provenance> ek;
        for (const auto& s : grid_estimators) ek.push_back(provenance_from_string(s));
        if (ek.empty()) ek.push_back(c.estimator.kind);
        std::vector<double> blocks = grid_blocks.empty() ? std::vector<double>{double(c.block_size)}
                                                         : parse_list(grid_blocks);
        std::vector<double> taus = grid_taus.empty() ? std::vector<double>{tau} : parse_list(grid_taus);
        for (PolicyKind p : pk) {
          for (Provenance e : ek) {
            for (double b : blocks) {
              for (double t : taus) {
                FrontierCell cell;
                cell.policy = c.policy;
                cell.policy.kind = p;
                cell.estimator = c.estimator;
                cell.estimator.kind = e;
                cell.estimator.unit_cost = default_unit_cost(e);
                cell.block_size = static_cast<std::uint32_t>(b);
                cell.tau = t;
                grid.push_back(cell);
              }
            }
          }
        }
      }
      const auto pts = frontier_sweep(grid, sc, sweep_seeds, jobs);
      nlohmann::json cfg = serialize_scenario(c);
      cfg["frontier"] = frontier_scenario_json(sc);
      cfg["frontier"]["seeds"] = sweep_seeds;
      const auto dir = root / c.name / std::to_string(c.seed);
      write_text_file(dir / "frontier.csv", frontier_csv(pts, c.seed, cfg));
      write_text_file(dir / "bias_profile.csv", bias_profile_csv(c));
      out << frontier_csv(pts, c.seed, cfg);
      return kExitOk;
    }
    if (*vb) {
      if (bb > bn) throw ValidationError({"--B: must be <= --N"});
      if (bk > bn) throw ValidationError({"--k: must be <= --N"});
      RngStream s = derive_rng_stream(seed.value_or(bseed), "verify_bound");
      const BoundReport r = mc_verify_bound(bn, bb, bk, trials, s);
      out << bound_report_json(r).dump(2) << '\n';
      return r.pass ? kExitOk : kExitVerification;
    }
    if (*be) {
      const ScenarioConfig c = load_with_overrides(scenario_path, seed);
      const BreakevenMap m = breakeven_sweep(c, parse_list(cvs), parse_list(pressures), be_seeds, jobs);
      nlohmann::json cfg = serialize_scenario(c);
      cfg["breakeven"] = {{"cvs", m.cvs}, {"pressures", m.pressures}, {"seeds", be_seeds}};
      const auto dir = root / c.name / std::to_string(c.seed);
      write_text_file(dir / "regime_map.csv", regime_csv(m, c.seed, cfg));
      write_text_file(dir / "breakeven_cells.csv", breakeven_cells_csv(m, c.seed, cfg));
      write_text_file(dir / "epsilon_sys.csv", epsilon_csv(m, c.seed, cfg));
      out << regime_csv(m, c.seed, cfg);
      return kExitOk;
    }
    if (*audit) {
      if (!std::filesystem::exists(ledger_path)) throw ValidationError({"ledger file not found: " + ledger_path});
      Ledger l;
      try {
        l = read_ledger_file(ledger_path);
      } catch (const Error& e) {
        out << nlohmann::json{{"ok", false}, {"error", e.what()}}.dump(2) << '\n';
        return kExitVerification;
      }
      const auto bad = verify_chain(l);
      nlohmann::json rep = {{"ok", !bad}, {"entries", l.size()}, {"head", to_hex(l.head())}};
      if (bad) rep["first_bad_sequence"] = *bad;
      nlohmann::json totals;
      for (const auto& [cls, t] : summarize_by_class(l)) {
        totals[std::string(to_string(cls))] = {{"count", t.count}, {"cost", t.cost}};
      }
      rep["totals"] = totals;
      out << rep.dump(2) << '\n';
      return bad ? kExitVerification : kExitOk;
    }
    if (*attr) {
      if (!std::filesystem::exists(instance_path)) throw ValidationError({"instance file not found: " + instance_path});
      const AllocationInstance inst = load_instance(instance_path);
      attr_spec.kind = provenance_from_string(estimator_kind);
      attr_spec.unit_cost = default_unit_cost(attr_spec.kind);
      if (const auto errs = check_estimator(attr_spec); !errs.empty()) throw ValidationError(errs);
      RngStream s = derive_rng_stream(seed.value_or(0), "attribution");
      const std::vector<double> v = score_units(attr_spec, inst, nullptr, s);
      nlohmann::json vals = nlohmann::json::array();
      for (double x : v) vals.push_back(json_num(x));
      out << nlohmann::json{{"estimator", estimator_kind}, {"values", vals}}.dump(2) << '\n';
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    for (const auto& m : e.errors()) err << "error: " << m << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace tokenecon::cli

#endif  // TOKENECON_CLI_HPP_
