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

#ifndef TOKENECON_TRILEMMA_HPP_
#define TOKENECON_TRILEMMA_HPP_

// (G, R, O) measurement and the planted adversarial family.
//
// Planted family: B of N units have value 1, the rest 0, the planted set
// uniform over B-subsets. A policy that probes k units and retains B satisfies
//
//   E[V] <= (k + B) B / N,   regret >= B (1 - (k + B) / N).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "tokenecon/allocation.hpp"
#include "tokenecon/core.hpp"
#include "tokenecon/io.hpp"
#include "tokenecon/rng.hpp"
#include "tokenecon/simulator.hpp"
#include "tokenecon/utility.hpp"
#include "tokenecon/valuation.hpp"
#include "tokenecon/workload.hpp"

namespace tokenecon {

class PlantedInstance {
 public:
  PlantedInstance(std::uint32_t n, std::uint32_t b, std::vector<std::uint32_t> planted, double query_cost)
      : n_(n), b_(b), planted_(std::move(planted)), query_cost_(query_cost), mask_(n, false) {
    for (std::uint32_t i : planted_) mask_[i] = true;
  }

  std::uint32_t n() const { return n_; }
  std::uint32_t b() const { return b_; }
  double query_cost() const { return query_cost_; }

  // Charged probe.
  double query(std::uint32_t i) {
    if (i >= n_) throw Error("planted instance: unit out of range");
    ++probes_;
    return mask_[i] ? 1.0 : 0.0;
  }

  std::uint64_t probes() const { return probes_; }
  double sensing_cost() const { return static_cast<double>(probes_) * query_cost_; }

  // Scoring of a final retention set; not a probe.
  double retained_value(const std::vector<std::uint32_t>& kept) const {
    double v = 0.0;
    for (std::uint32_t i : kept) v += mask_.at(i) ? 1.0 : 0.0;
    return v;
  }

  // Benchmark-side view of the hidden set (ascending).
  const std::vector<std::uint32_t>& planted_set() const { return planted_; }

 private:
  std::uint32_t n_;
  std::uint32_t b_;
  std::vector<std::uint32_t> planted_;
  double query_cost_;
  std::vector<bool> mask_;
  std::uint64_t probes_ = 0;
};

inline PlantedInstance planted_instance(std::uint32_t n, std::uint32_t b, RngStream& stream,
                                        double query_cost = 1.0) {
  if (b < 1 || b > n) throw Error("planted_instance: need 1 <= B <= N");
  if (!(query_cost > 0.0)) throw Error("planted_instance: query cost must be > 0");
  std::vector<std::uint32_t> set = stream.sample_subset(n, b);
  std::sort(set.begin(), set.end());
  return PlantedInstance(n, b, std::move(set), query_cost);
}

struct BoundValue {
  std::uint64_t numerator = 0;  // (k + B) B
  std::uint64_t denominator = 1;  // N
  double value_bound = 0.0;
  double regret_bound = 0.0;  // B - value_bound
};

inline BoundValue bound_expected_value(std::uint32_t n, std::uint32_t b, std::uint32_t k) {
  if (n == 0) throw Error("bound_expected_value: N must be >= 1");
  if (k > n) throw Error("bound_expected_value: need 0 <= k <= N");
  BoundValue out;
  out.numerator = static_cast<std::uint64_t>(k + b) * b;
  out.denominator = n;
  const std::uint64_t g = std::gcd(out.numerator, out.denominator);
  if (g > 1) {
    out.numerator /= g;
    out.denominator /= g;
  }
  out.value_bound = static_cast<double>(out.numerator) / static_cast<double>(out.denominator);
  out.regret_bound = static_cast<double>(b) - out.value_bound;
  return out;
}

// Exact expectation of query-then-fill: F ~ Hypergeometric(N, B, k) found
// units are kept, then min(B - F, N - k) slots are filled uniformly from the
// N - k unqueried units, of which B - F are planted.
inline double query_then_fill_expectation(std::uint32_t n, std::uint32_t b, std::uint32_t k) {
  if (b > n || k > n) throw Error("query_then_fill_expectation: need B, k <= N");
  auto log_choose = [](double a, double c) {
    return std::lgamma(a + 1.0) - std::lgamma(c + 1.0) - std::lgamma(a - c + 1.0);
  };
  const double total = log_choose(n, k);
  double e = 0.0;
  const std::uint32_t lo = k + b > n ? k + b - n : 0;
  for (std::uint32_t f = lo; f <= std::min(b, k); ++f) {
    const double p = std::exp(log_choose(b, f) + log_choose(n - b, k - f) - total);
    const double rest = static_cast<double>(b - f);
    const double unqueried = static_cast<double>(n - k);
    const double fill = unqueried > 0.0 ? std::min(rest, unqueried) * rest / unqueried : 0.0;
    e += p * (static_cast<double>(f) + fill);
  }
  return e;
}

// One run of the construction. Returns the retained value.
inline double query_then_fill(PlantedInstance& inst, std::uint32_t k, RngStream& stream) {
  const std::uint32_t n = inst.n();
  std::vector<std::uint32_t> order = stream.permutation(n);
  std::vector<std::uint32_t> kept;
  for (std::uint32_t j = 0; j < k && kept.size() < inst.b(); ++j) {
    if (inst.query(order[j]) > 0.0) kept.push_back(order[j]);
  }
  // Unqueried units in uniformly random order fill the rest.
  for (std::uint32_t j = k; j < n && kept.size() < inst.b(); ++j) kept.push_back(order[j]);
  return inst.retained_value(kept);
}

struct BoundReport {
  std::uint32_t n = 0;
  std::uint32_t b = 0;
  std::uint32_t k = 0;
  std::uint64_t trials = 0;
  double empirical_mean = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  double regret_bound = 0.0;
  double exact_expectation = 0.0;
  double margin_se = 0.0;  // (bound - mean) / std_error
  bool pass = false;       // mean <= bound + 3 std_error
};

inline BoundReport mc_verify_bound(std::uint32_t n, std::uint32_t b, std::uint32_t k, std::uint64_t trials,
                                   RngStream& stream) {
  if (trials < 100) throw Error("mc_verify_bound: trials must be >= 100");
  const BoundValue bv = bound_expected_value(n, b, k);
  std::vector<double> xs;
  xs.reserve(trials);
  for (std::uint64_t t = 0; t < trials; ++t) {
    PlantedInstance inst = planted_instance(n, b, stream);
    xs.push_back(query_then_fill(inst, k, stream));
  }
  const MeanCi m = mean_ci(xs);
  BoundReport r;
  r.n = n;
  r.b = b;
  r.k = k;
  r.trials = trials;
  r.empirical_mean = m.mean;
  r.std_error = m.sd / std::sqrt(static_cast<double>(trials));
  r.bound = bv.value_bound;
  r.regret_bound = bv.regret_bound;
  r.exact_expectation = query_then_fill_expectation(n, b, k);
  r.margin_se = r.std_error > 0.0 ? (r.bound - r.empirical_mean) / r.std_error
                                  : (r.empirical_mean <= r.bound ? kUnconstrained : -kUnconstrained);
  r.pass = r.empirical_mean <= r.bound + 3.0 * r.std_error;
  return r;
}

inline nlohmann::json bound_report_json(const BoundReport& r) {
  return {{"N", r.n},
          {"B", r.b},
          {"k", r.k},
          {"trials", r.trials},
          {"empirical_mean", r.empirical_mean},
          {"std_error", r.std_error},
          {"bound", r.bound},
          {"regret_bound", r.regret_bound},
          {"exact_expectation", r.exact_expectation},
          {"margin_se", json_num(r.margin_se)},
          {"pass", r.pass}};
}

// Probe-based threshold rule: probe k random units, retain those whose probed
// value exceeds `threshold`, fill remaining slots uniformly from the
// unprobed. Regret = B - retained value.
inline double probe_threshold_regret(PlantedInstance& inst, std::uint32_t k, RngStream& stream,
                                     double threshold = 0.5) {
  if (k > inst.n()) throw Error("probe_threshold_regret: k > N");
  std::vector<std::uint32_t> order = stream.permutation(inst.n());
  std::vector<std::uint32_t> kept;
  for (std::uint32_t j = 0; j < k; ++j) {
    if (kept.size() < inst.b() && inst.query(order[j]) > threshold) kept.push_back(order[j]);
  }
  for (std::uint32_t j = k; j < inst.n() && kept.size() < inst.b(); ++j) kept.push_back(order[j]);
  return static_cast<double>(inst.b()) - inst.retained_value(kept);
}

// ---------------------------------------------------------------------------
// Frontier

struct TrilemmaPoint {
  std::string policy;
  std::string estimator;
  std::uint32_t block_size = 1;
  double tau = 0.0;
  std::uint64_t G = 0;
  double R = 0.0;
  std::optional<double> O_mean;
  double O_ci95 = 0.0;
  std::uint32_t seeds = 0;
  bool flagged = false;  // regret unavailable
};

// Token-level instance family the frontier is measured on.
struct FrontierScenario {
  WorkloadParams workload;  // token source
  std::size_t tokens = 64;
  double memory = 15;  // held set plus one arrival stays within the exact Shapley cap
  ObjectiveWeights weights;
  std::uint64_t seed = 0;

  FrontierScenario() {
    workload.value_dist = ValueDist::kPlantedEarlyInstruction;
    workload.value_cv = 2.0;
    workload.horizon = 400;
  }
};

struct FrontierDraw {
  AllocationInstance instance;
  StaticPredictorTable table;
};

inline std::vector<TokenUnit> frontier_tokens(const FrontierScenario& sc, RngStream& stream) {
  std::vector<TokenUnit> units = prompt_stream(generate_workload(sc.workload, sc.workload.horizon, stream), sc.tokens);
  for (TokenUnit& u : units) {
    u.cost = CostVector{};
    u.cost.memory = 1;
  }
  return units;
}

inline FrontierDraw frontier_draw(const FrontierScenario& sc, std::uint64_t seed, double tau) {
  FrontierDraw d;
  RngStream ws = derive_rng_stream(seed, "workload");
  d.instance.units = frontier_tokens(sc, ws);
  if (d.instance.units.size() < sc.tokens) throw Error("frontier scenario: workload produced too few tokens");
  std::vector<double> w;
  for (const TokenUnit& u : d.instance.units) w.push_back(weighted_value(u.value, sc.weights));
  d.instance.utility = UtilityFunction::additive(w);
  d.instance.budgets.memory = sc.memory;
  d.instance.budgets.tau = tau;
  d.instance.weights = sc.weights;
  RngStream cs = derive_rng_stream(seed, "calibration");
  const std::vector<TokenUnit> cal = frontier_tokens(sc, cs);
  std::vector<double> cv;
  for (const TokenUnit& u : cal) cv.push_back(weighted_value(u.value, sc.weights));
  d.table = StaticPredictorTable::calibrate(cal, cv, 4);
  return d;
}

inline std::vector<std::vector<UnitId>> block_groups(std::size_t n, std::uint32_t block_size) {
  if (block_size < 1) throw Error("block_size must be >= 1");
  std::vector<std::vector<UnitId>> groups;
  for (std::size_t i = 0; i < n; i += block_size) {
    std::vector<UnitId> g;
    for (std::size_t j = i; j < std::min(n, i + block_size); ++j) g.push_back(static_cast<UnitId>(j));
    groups.push_back(std::move(g));
  }
  return groups;
}

inline std::uint64_t decision_unit_count(std::size_t n, std::uint32_t block_size) {
  if (block_size < 1) throw Error("block_size must be >= 1");
  return (n + block_size - 1) / block_size;
}

inline TrilemmaPoint measure_point(const PolicySpec& policy, const EstimatorSpec& estimator, std::uint32_t block_size,
                                   double tau, const FrontierScenario& sc, std::uint32_t seeds) {
  if (seeds < 2) throw Error("measure_point: seeds must be >= 2");
  {
    auto errs = check_policy(policy);
    auto e2 = check_estimator(estimator);
    errs.insert(errs.end(), e2.begin(), e2.end());
    if (!errs.empty()) throw ValidationError(errs);
  }
  TrilemmaPoint pt;
  pt.policy = std::string(to_string(policy.kind));
  pt.estimator = std::string(to_string(estimator.kind));
  pt.block_size = block_size;
  pt.tau = tau;
  pt.seeds = seeds;
  pt.G = decision_unit_count(sc.tokens, block_size);
  std::vector<double> regrets, rs;
  for (std::uint32_t s = 0; s < seeds; ++s) {
    const std::uint64_t seed = sc.seed + s;
    const FrontierDraw d = frontier_draw(sc, seed, tau);
    RunOptions opt;
    opt.groups = block_groups(d.instance.units.size(), block_size);
    opt.table = &d.table;
    RngStream ps = derive_rng_stream(seed, "policy");
    const Trajectory traj = run_policy(policy, d.instance, estimator, opt, ps);
    rs.push_back(real_time_ratio(traj, tau));
    try {
      regrets.push_back(compute_regret(traj, d.instance));
    } catch (const Error&) {
      pt.flagged = true;
    }
  }
  pt.R = mean_ci(rs).mean;
  if (!pt.flagged) {
    const MeanCi o = mean_ci(regrets);
    pt.O_mean = o.mean;
    pt.O_ci95 = o.ci95;
  }
  return pt;
}

struct FrontierCell {
  std::string preset;  // empty for user grid cells
  PolicySpec policy;
  EstimatorSpec estimator;
  std::uint32_t block_size = 1;
  double tau = 1.0;
};

// The four representative regimes, all under the same tau.
inline std::vector<FrontierCell> preset_cells(double tau) {
  auto cell = [&](std::string name, PolicyKind pk, Provenance ek, std::uint32_t block) {
    FrontierCell c;
    c.preset = std::move(name);
    c.policy.kind = pk;
    c.estimator.kind = ek;
    c.estimator.unit_cost = default_unit_cost(ek);
    c.block_size = block;
    c.tau = tau;
    return c;
  };
  return {cell("conventional_serving", PolicyKind::kRecency, Provenance::kRecency, 16),
          cell("offline_economic_analysis", PolicyKind::kGreedy, Provenance::kShapleyExact, 1),
          cell("naive_online", PolicyKind::kGreedy, Provenance::kShapleyMc, 1),
          cell("amortized_block", PolicyKind::kGreedy, Provenance::kStaticPredictor, 4)};
}

inline std::vector<TrilemmaPoint> frontier_sweep(const std::vector<FrontierCell>& grid, const FrontierScenario& sc,
                                                 std::uint32_t seeds, unsigned jobs = 1) {
  std::vector<TrilemmaPoint> pts(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    pts[i] = measure_point(grid[i].policy, grid[i].estimator, grid[i].block_size, grid[i].tau, sc, seeds);
  });
  std::sort(pts.begin(), pts.end(), [](const TrilemmaPoint& a, const TrilemmaPoint& b) {
    return std::tie(a.policy, a.estimator, a.block_size, a.tau) < std::tie(b.policy, b.estimator, b.block_size, b.tau);
  });
  return pts;
}

inline std::string frontier_csv(const std::vector<TrilemmaPoint>& pts, std::uint64_t seed,
                                const nlohmann::json& config) {
  CsvWriter w(seed, config, {"policy", "estimator", "block_size", "tau", "G", "R", "O_mean", "O_ci95", "seeds"});
  for (const TrilemmaPoint& p : pts) {
    w.row({p.policy, p.estimator, std::to_string(p.block_size), fmt_num(p.tau), std::to_string(p.G), fmt_num(p.R),
           p.O_mean ? fmt_num(*p.O_mean) : "missing", fmt_num(p.O_ci95), std::to_string(p.seeds)});
  }
  return w.str();
}

inline nlohmann::json frontier_scenario_json(const FrontierScenario& sc) {
  return {{"tokens", sc.tokens},
          {"memory", sc.memory},
          {"seed", sc.seed},
          {"workload",
           {{"rate", sc.workload.rate},
            {"value_cv", sc.workload.value_cv},
            {"value_dist", std::string(to_string(sc.workload.value_dist))},
            {"attention_bias", sc.workload.attention_bias},
            {"horizon", sc.workload.horizon}}}};
}

}  // namespace tokenecon

#endif  // TOKENECON_TRILEMMA_HPP_
