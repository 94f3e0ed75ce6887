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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Tolerances and runtime limits are fixed below.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "test_support.hpp"
#include "tokenecon/tokenecon.hpp"

namespace tokenecon {
namespace {

namespace fs = std::filesystem;

constexpr double kShapleyTol = 1e-9;
constexpr double kObjectiveTol = 1e-9;
constexpr double kZeroRegretTol = 1e-12;
constexpr double kLambdaTol = 1e-12;
constexpr double kWorkedTol = 1e-12;
constexpr double kZ95OneSided = 1.6448536269514722;
constexpr double kGamma = 0.01;
constexpr double kVerificationLimit = 0.05;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string num(double x, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << x;
  return os.str();
}

// Unit n is a dummy; unit n+1 is a copy of unit 0.
struct WithDummyAndTwin {
  const UtilityFunction* f;
  std::size_t n;

  std::size_t ground_size() const { return n + 2; }
  double operator()(std::span<const UnitId> s) const {
    std::vector<UnitId> mapped;
    for (UnitId id : s) {
      if (id == n) continue;
      mapped.push_back(id == n + 1 ? 0 : id);
    }
    std::sort(mapped.begin(), mapped.end());
    mapped.erase(std::unique(mapped.begin(), mapped.end()), mapped.end());
    return (*f)(std::span<const UnitId>(mapped));
  }
};

template <class F>
double eval_mask(const F& f, std::uint64_t mask) {
  std::vector<UnitId> s;
  for (std::size_t i = 0; i < f.ground_size(); ++i) {
    if (mask >> i & 1) s.push_back(static_cast<UnitId>(i));
  }
  return f(std::span<const UnitId>(s));
}

template <class F>
bool is_dummy(const F& f, std::size_t i) {
  const std::size_t n = f.ground_size();
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
    if (m >> i & 1) continue;
    if (std::abs(eval_mask(f, m | std::uint64_t{1} << i) - eval_mask(f, m)) > 1e-12) return false;
  }
  return true;
}

template <class F>
bool interchangeable(const F& f, std::size_t i, std::size_t j) {
  const std::size_t n = f.ground_size();
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
    if ((m >> i & 1) || (m >> j & 1)) continue;
    if (std::abs(eval_mask(f, m | std::uint64_t{1} << i) - eval_mask(f, m | std::uint64_t{1} << j)) > 1e-12) {
      return false;
    }
  }
  return true;
}

void criterion_bound(Outcome& o) {
  struct Case {
    std::uint32_t n, b, k;
    double bound;
  };
  for (const Case& c : {Case{100, 10, 10, 2.0}, Case{10, 3, 2, 1.5}}) {
    RngStream s = derive_rng_stream(0, "verify_bound");
    const BoundReport r = mc_verify_bound(c.n, c.b, c.k, 10000, s);
    o.detail << " (" << c.n << "," << c.b << "," << c.k << "): bound=" << num(r.bound)
             << " mean=" << num(r.empirical_mean) << " se=" << num(r.std_error);
    o.require(std::abs(r.bound - c.bound) <= kWorkedTol, "bound value");
    o.require(r.empirical_mean <= r.bound + 3.0 * r.std_error, "mean within bound + 3 se");
  }
}

void criterion_shapley(Outcome& o) {
  RngStream s = derive_rng_stream(2, "acceptance-shapley");
  double worst_eff = 0.0, worst_dummy = 0.0, worst_sym = 0.0;
  std::size_t instances = 0, dummies = 0, pairs = 0;
  for (UtilityKind kind : testing::kAllUtilityKinds) {
    for (int t = 0; t < 200; ++t) {
      const std::size_t n = 1 + s.below(10);
      const UtilityFunction base = testing::random_utility(kind, n, s);
      const WithDummyAndTwin f{&base, n};
      const std::vector<double> phi = shapley_exact(f);
      const std::size_t g = f.ground_size();
      double sum = 0.0;
      for (double x : phi) sum += x;
      worst_eff = std::max(worst_eff, std::abs(sum - (eval_mask(f, (std::uint64_t{1} << g) - 1) - eval_mask(f, 0))));
      for (std::size_t i = 0; i < g; ++i) {
        if (i == n || is_dummy(f, i)) {
          worst_dummy = std::max(worst_dummy, std::abs(phi[i]));
          ++dummies;
        }
        for (std::size_t j = i + 1; j < g; ++j) {
          if ((i == 0 && j == n + 1) || interchangeable(f, i, j)) {
            worst_sym = std::max(worst_sym, std::abs(phi[i] - phi[j]));
            ++pairs;
          }
        }
      }
      ++instances;
    }
  }
  o.detail << " instances=" << instances << " dummies=" << dummies << " symmetric_pairs=" << pairs
           << " max|eff|=" << num(worst_eff) << " max|dummy|=" << num(worst_dummy) << " max|sym|=" << num(worst_sym);
  o.require(worst_eff < kShapleyTol, "efficiency");
  o.require(worst_dummy < kShapleyTol, "dummy");
  o.require(worst_sym < kShapleyTol, "symmetry");
}

void criterion_offline(Outcome& o) {
  RngStream s = derive_rng_stream(3, "acceptance-offline");
  double worst = 0.0;
  int infeasible = 0;
  for (int t = 0; t < 500; ++t) {
    const UtilityKind kind = testing::kAllUtilityKinds[t % 4];
    const AllocationInstance inst = testing::random_instance(kind, 1 + s.below(14), s);
    const OfflineSolution sol = solve_offline(inst);
    worst = std::max(worst, std::abs(sol.objective - testing::brute_force_optimum(inst)));
    if (!is_feasible(inst, sol.action.selected)) ++infeasible;
  }
  o.detail << " instances=500 max|diff|=" << num(worst) << " infeasible=" << infeasible;
  o.require(worst <= kObjectiveTol, "objective match");
  o.require(infeasible == 0, "feasibility");
}

Trajectory run_with(PolicyKind pk, Provenance ek, const AllocationInstance& inst, std::uint64_t seed) {
  PolicySpec p;
  p.kind = pk;
  EstimatorSpec e;
  e.kind = ek;
  e.unit_cost = default_unit_cost(ek);
  RngStream s = derive_rng_stream(seed, "policy");
  return run_policy(p, inst, e, RunOptions{}, s);
}

void criterion_regret(Outcome& o) {
  RngStream s = derive_rng_stream(4, "acceptance-regret");
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    AllocationInstance inst = testing::random_instance(UtilityKind::kAdditive, 1 + s.below(30), s);
    inst.budgets.latency = inst.budgets.hardware = kUnconstrained;
    for (TokenUnit& u : inst.units) u.cost.memory = 1;
    worst = std::max(worst, std::abs(compute_regret(run_with(PolicyKind::kGreedy, Provenance::kOracle, inst, t), inst)));
  }
  std::vector<double> regrets;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const AllocationInstance inst = testing::planted_token_instance(seed, 64, 16);
    regrets.push_back(compute_regret(run_with(PolicyKind::kRecency, Provenance::kRecency, inst, seed), inst));
  }
  const MeanCi m = mean_ci(regrets);
  const double se = m.sd / std::sqrt(static_cast<double>(regrets.size()));
  o.detail << " oracle_greedy max|regret|=" << num(worst) << " over 200; recency planted mean=" << num(m.mean)
           << " se=" << num(se) << " over 100 seeds";
  o.require(worst <= kZeroRegretTol, "oracle greedy regret 0");
  o.require(m.mean - kZ95OneSided * se > 0.0, "recency regret > 0 at 95%");
}

std::uint64_t random_cache_events(CacheState& c, std::size_t events, RngStream& s) {
  TokenKey next = 0;
  std::optional<BlockId> tail;
  std::uint64_t applied = 0;
  for (std::size_t step = 0; step < events; ++step) {
    const double r = s.uniform();
    if (r < 0.5 || c.blocks().empty()) {
      const std::int64_t mem = 1 + static_cast<std::int64_t>(s.below(2));
      if (c.occupancy() + mem > c.capacity()) c.evict(mem, static_cast<EvictionPolicy>(s.below(4)), s, step);
      CacheEvent e;
      e.kind = CacheEventKind::kTokenAppended;
      e.token = next++;
      e.estimate = s.uniform(-1.0, 2.0);
      e.memory = mem;
      e.step = step;
      if (tail && c.contains(*tail) && c.block(*tail).token_ids.size() < 4 && s.bernoulli(0.7)) e.block = tail;
      tail = c.incremental_update(e);
    } else if (r < 0.7) {
      auto it = c.blocks().begin();
      std::advance(it, static_cast<std::ptrdiff_t>(s.below(c.blocks().size())));
      CacheEvent e;
      e.kind = CacheEventKind::kAccess;
      e.block = it->first;
      e.step = step;
      c.incremental_update(e);
    } else if (r < 0.95) {
      auto it = c.estimates().begin();
      std::advance(it, static_cast<std::ptrdiff_t>(s.below(c.estimates().size())));
      CacheEvent e;
      e.kind = CacheEventKind::kEstimateRevised;
      e.token = it->first;
      e.estimate = s.uniform(-1.0, 2.0);
      e.step = step;
      c.incremental_update(e);
    } else {
      c.set_contended(c.blocks().begin()->first, s.bernoulli(0.5));
      --applied;
    }
    ++applied;
  }
  return applied;
}

void criterion_shadow_price(Outcome& o) {
  KvBlock b;
  b.token_ids = {1, 2};
  b.size = 2;
  const std::map<TokenKey, double> est{{1, 0.5}, {2, 0.3}};
  const double lambda = block_shadow_price(b, est, 1.0, 0.1);
  o.detail << " worked=" << num(lambda);
  o.require(std::abs(lambda - 0.3) <= kWorkedTol, "worked value 0.3");

  double worst = 0.0;
  std::size_t events = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    RngStream s = derive_rng_stream(seed, "acceptance-cache");
    CacheState c(64, 0.7, kGamma);
    for (int round = 0; round < 10; ++round) {
      random_cache_events(c, 1000, s);
      events += 1000;
      const auto inc = c.lambda_map();
      const auto full = c.recompute_lambda_map();
      if (inc.size() != full.size()) worst = kUnconstrained;
      for (const auto& [id, lam] : inc) worst = std::max(worst, std::abs(lam - full.at(id)));
    }
  }
  o.detail << " events=" << events << " max|inc-full|=" << num(worst);
  o.require(worst <= kLambdaTol, "incremental lambda");

  const SimResult r = simulate(testing::scenario_from_file("default.json"));
  o.detail << " metadata_overhead=" << num(r.metrics.metadata_overhead);
  o.require(r.metrics.metadata_overhead < kGamma, "metadata overhead < gamma");
}

std::vector<TokenUnit> request_tokens(ValueDist dist, double cv, std::uint64_t seed) {
  WorkloadParams p;
  p.value_dist = dist;
  p.value_cv = cv;
  p.horizon = 400;
  RngStream s = derive_rng_stream(seed, "workload");
  return prompt_stream(generate_workload(p, p.horizon, s), 64);
}

void criterion_cache_policy(Outcome& o) {
  auto paired = [](ValueDist dist, double cv) {
    std::vector<double> diffs;
    ObjectiveWeights w;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto tokens = request_tokens(dist, cv, seed);
      diffs.push_back(testing::replay_retained_utility(tokens, w, 4, 16, EvictionPolicy::kValueAware, seed) -
                      testing::replay_retained_utility(tokens, w, 4, 16, EvictionPolicy::kLru, seed));
    }
    return mean_ci(diffs);
  };
  const MeanCi planted = paired(ValueDist::kPlantedEarlyInstruction, 1.0);
  const double se_p = planted.sd / 10.0;
  const MeanCi flat = paired(ValueDist::kUniform, 0.0);
  const double se_f = flat.sd / 10.0;
  o.detail << " planted diff=" << num(planted.mean) << " se=" << num(se_p) << "; cv0 diff=" << num(flat.mean)
           << " se=" << num(se_f);
  o.require(planted.mean - kZ95OneSided * se_p > 0.0, "value_aware > lru at 95%");
  o.require(std::abs(flat.mean) <= 2.0 * se_f, "cv0 tie within 2 sigma");
}

SpecProposal proposal(double p_acc, double v, double c_draft, double c_verify) {
  SpecProposal p;
  p.p_acc = p_acc;
  p.v = v;
  p.c_draft = c_draft;
  p.c_verify = c_verify;
  return p;
}

void criterion_speculation(Outcome& o) {
  const double e = env(proposal(0.5, 2.0, 0.4, 0.3));
  o.detail << " env=" << num(e);
  o.require(std::abs(e - 0.3) <= kWorkedTol, "worked env 0.3");

  const std::vector<double> acc{0.9, 0.8, 0.7};
  SpecCostModel cost;
  cost.c_draft_per_token = 0.3;
  cost.c_verify = 0.5;
  cost.decode_saving_per_token = 1.0;
  const double expected = env(proposal_for(acc, cost));
  RngStream s = derive_rng_stream(7, "acceptance-spec");
  std::vector<double> nets;
  constexpr int kRounds = 100000;
  nets.reserve(kRounds);
  for (int r = 0; r < kRounds; ++r) nets.push_back(simulate_spec_round(acc, cost, s).net());
  const MeanCi m = mean_ci(nets);
  const double se = m.sd / std::sqrt(static_cast<double>(kRounds));
  o.detail << " long_run=" << num(m.mean) << " env=" << num(expected) << " se=" << num(se);
  o.require(std::abs(m.mean - expected) <= 3.0 * se, "long-run net within 3 sigma");

  int mismatches = 0, cells = 0;
  for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    for (double v : {0.0, 0.5, 1.0, 2.0, 4.0}) {
      for (double c : {0.0, 0.1, 0.3, 0.6, 1.0}) {
        const double speculate = p * (v - c - 0.2) + (1 - p) * (-c - 0.2);
        if (decide_speculate(proposal(p, v, c, 0.2)) != (speculate > 0.0)) ++mismatches;
        ++cells;
      }
    }
  }
  o.detail << " grid=" << cells << " mismatches=" << mismatches;
  o.require(cells == 125 && mismatches == 0, "decision grid");
}

const TrilemmaPoint* find_point(const std::vector<TrilemmaPoint>& pts, const std::string& est, std::uint32_t block) {
  for (const TrilemmaPoint& p : pts) {
    if (p.estimator == est && p.block_size == block) return &p;
  }
  return nullptr;
}

void criterion_frontier(Outcome& o) {
  const double tau = 1.0;
  const std::vector<TrilemmaPoint> pts = frontier_sweep(preset_cells(tau), FrontierScenario{}, 20,
                                                        std::max(1u, std::thread::hardware_concurrency()));
  const TrilemmaPoint* coarse = find_point(pts, "recency", 16);
  const TrilemmaPoint* exact = find_point(pts, "shapley_exact", 1);
  const TrilemmaPoint* amortized = find_point(pts, "static_predictor", 4);
  if (!coarse || !exact || !amortized || !coarse->O_mean || !amortized->O_mean) {
    o.require(false, "preset points present with regret");
    return;
  }
  const double gap = *coarse->O_mean - *amortized->O_mean;
  const double slack = std::hypot(coarse->O_ci95, amortized->O_ci95);
  o.detail << " tau=" << num(tau) << " R_coarse=" << num(coarse->R) << " R_exact=" << num(exact->R)
           << " O_coarse=" << num(*coarse->O_mean) << "+-" << num(coarse->O_ci95)
           << " O_amortized=" << num(*amortized->O_mean) << "+-" << num(amortized->O_ci95);
  o.require(coarse->R <= 1.0, "coarse R <= 1");
  o.require(exact->R > 1.0, "exact Shapley R > 1");
  o.require(gap > slack, "O_coarse > O_amortized at 95%");
}

void criterion_breakeven(Outcome& o) {
  const ScenarioConfig c = testing::scenario_from_file("breakeven.json");
  const BreakevenMap m = breakeven_sweep(c, {0.0, 0.5, 1.0, 2.0, 4.0}, {0.0, 0.5, 1.0, 2.0}, 20,
                                         std::max(1u, std::thread::hardware_concurrency()));
  o.detail << " labels(pressure rows)=";
  for (std::size_t pi = 0; pi < m.pressures.size(); ++pi) {
    o.detail << (pi ? "|" : "");
    for (std::size_t ci = 0; ci < m.cvs.size(); ++ci) o.detail << to_string(m.at(pi, ci).label)[0];
  }
  o.detail << " epsilon_sys=";
  for (std::size_t pi = 0; pi < m.pressures.size(); ++pi) {
    o.detail << (pi ? "," : "") << num(m.pressures[pi]) << ":" << (m.epsilon_sys[pi] ? num(*m.epsilon_sys[pi]) : "none");
  }
  o.require(m.cells.size() == 20, "5x4 grid");
  o.require(m.epsilon_sys.size() == 4, "epsilon_sys per row");
  o.require(upward_closed_in_cv(m), "upward-closed in CV");
  o.require(downward_closed_in_pressure(m), "downward-closed in pressure");
}

void criterion_accounting(Outcome& o) {
  const SimResult base = simulate(testing::scenario_from_file("default.json"));
  const std::vector<std::uint8_t> bytes = serialize_ledger(base.ledger);
  RngStream s = derive_rng_stream(10, "acceptance-tamper");
  int detected = 0;
  constexpr int kTrials = 1000;
  for (int t = 0; t < kTrials; ++t) {
    std::vector<std::uint8_t> mutated = bytes;
    mutated[s.below(bytes.size())] ^= static_cast<std::uint8_t>(1u << s.below(8));
    try {
      if (verify_chain(parse_ledger(mutated)).has_value()) ++detected;
    } catch (const Error&) {
      ++detected;
    }
  }
  o.detail << " tamper detected=" << detected << "/" << kTrials;
  o.require(detected == kTrials, "100% tamper detection");

  double worst_overhead = 0.0;
  int mismatched = 0;
  const auto files = testing::default_scenario_files();
  for (const std::string& f : files) {
    const SimResult r = simulate(testing::scenario_from_file(f));
    const auto totals = summarize_by_class(r.ledger);
    std::uint64_t sum = 0;
    for (TokenClass cls : kAllTokenClasses) {
      if (totals.at(cls).count != r.metrics.class_counts[index_of(cls)]) ++mismatched;
      sum += totals.at(cls).count;
    }
    if (sum != r.metrics.total_tokens || verify_chain(r.ledger).has_value()) ++mismatched;
    worst_overhead = std::max(worst_overhead, r.metrics.verification_overhead);
  }
  o.detail << " scenarios=" << files.size() << " total mismatches=" << mismatched
           << " max verification_overhead=" << num(worst_overhead);
  o.require(mismatched == 0, "ledger totals equal conservation totals");
  o.require(worst_overhead < kVerificationLimit, "verification overhead < 0.05");
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_determinism(Outcome& o) {
  const fs::path root = fs::temp_directory_path() / "tokenecon_acceptance_determinism";
  fs::remove_all(root);
  const auto files = testing::default_scenario_files();
  int compared = 0, differing = 0, failed_runs = 0;
  for (const std::string& f : files) {
    const std::string path = std::string(TOKENECON_SOURCE_DIR) + "/scenarios/" + f;
    for (const char* sub : {"a", "b"}) {
      if (shell(std::string(TOKENECON_CLI) + " run " + path + " --outdir " + (root / sub).string() +
                " > /dev/null 2>&1") != 0) {
        ++failed_runs;
      }
    }
  }
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), root / "a");
    const bool is_summary = rel.filename() == "summary.json";
    const bool is_trace = rel.parent_path().filename() == "traces";
    if (!is_summary && !is_trace) continue;
    const fs::path other = root / "b" / rel;
    if (!fs::exists(other) || read_text_file(e.path()) != read_text_file(other)) ++differing;
    ++compared;
  }
  fs::remove_all(root);
  o.detail << " scenarios=" << files.size() << " files compared=" << compared << " differing=" << differing;
  o.require(failed_runs == 0, "all runs succeed");
  o.require(compared == static_cast<int>(files.size()) * 4, "summary plus three traces per scenario");
  o.require(differing == 0, "byte-identical artifacts");
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<void(Outcome&)> fn;
};

}  // namespace
}  // namespace tokenecon

int main() {
  using namespace tokenecon;
  const std::vector<Criterion> criteria = {
      {1, "value_bound", 5, criterion_bound},
      {2, "shapley_axioms", 30, criterion_shapley},
      {3, "offline_oracle_equivalence", 60, criterion_offline},
      {4, "regret_sanity", 60, criterion_regret},
      {5, "shadow_price_mechanics", 60, criterion_shadow_price},
      {6, "cache_policy_separation", 60, criterion_cache_policy},
      {7, "speculation_mechanics", 60, criterion_speculation},
      {8, "trilemma_frontier", 600, criterion_frontier},
      {9, "breakeven_map", 900, criterion_breakeven},
      {10, "accounting", 60, criterion_accounting},
      {11, "determinism", 300, criterion_determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.fn(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < c.limit_seconds, "runtime limit");
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ":" << o.detail.str() << " time="
              << num(secs, 3) << "s limit=" << c.limit_seconds << "s" << std::endl;
  }
  std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " FAILED") << std::endl;
  return failed == 0 ? 0 : 1;
}
