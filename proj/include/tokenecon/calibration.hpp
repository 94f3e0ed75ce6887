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

#ifndef TOKENECON_CALIBRATION_HPP_
#define TOKENECON_CALIBRATION_HPP_

// Scoring proxies by the decisions they induce rather than by their
// numerical error, and per-class directional bias of a proxy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tokenecon/allocation.hpp"
#include "tokenecon/core.hpp"
#include "tokenecon/rng.hpp"
#include "tokenecon/utility.hpp"
#include "tokenecon/valuation.hpp"

namespace tokenecon {

enum class DecisionRule : std::uint8_t { kTopKSelection, kEviction, kThresholdAdmission };

constexpr std::string_view to_string(DecisionRule d) {
  switch (d) {
    case DecisionRule::kTopKSelection: return "top_k_selection";
    case DecisionRule::kEviction: return "eviction";
    case DecisionRule::kThresholdAdmission: return "threshold_admission";
  }
  return "unknown";
}

inline DecisionRule decision_rule_from_string(std::string_view s) {
  for (DecisionRule d : {DecisionRule::kTopKSelection, DecisionRule::kEviction,
                         DecisionRule::kThresholdAdmission}) {
    if (to_string(d) == s) return d;
  }
  throw Error("unknown decision rule '" + std::string(s) + "'");
}

// Per-unit scores from an estimator over the whole instance, as seen at the
// end of the stream. Set-valued kinds score against the full ground set.
inline std::vector<double> score_units(const EstimatorSpec& spec, const AllocationInstance& inst,
                                       const StaticPredictorTable* table, RngStream& stream) {
  const std::size_t n = inst.units.size();
  std::vector<double> s(n, 0.0);
  if (n == 0) return s;
  std::uint64_t now = 0;
  for (const TokenUnit& u : inst.units) now = std::max(now, u.arrival_step);
  switch (spec.kind) {
    case Provenance::kOracle: {
      std::vector<UnitId> all(n);
      std::iota(all.begin(), all.end(), UnitId{0});
      const double full = inst.utility(all);
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<UnitId> rest;
        for (UnitId j : all) {
          if (j != i) rest.push_back(j);
        }
        s[i] = inst.utility.is_additive() ? inst.utility.unit_weight(static_cast<UnitId>(i))
                                          : full - inst.utility(rest);
      }
      return s;
    }
    case Provenance::kShapleyExact: return shapley_exact(inst.utility);
    case Provenance::kShapleyMc: return shapley_mc(inst.utility, spec.samples, stream).values;
    case Provenance::kLeaveOneOut: return leave_one_out(inst.utility);
    default: break;
  }
  for (std::size_t i = 0; i < n; ++i) s[i] = proxy_value(spec, inst.units[i], ProxyContext{now, table}).mean;
  return s;
}

namespace detail {

// Walk units in descending net score (score minus exchange cost, ties lowest
// id), keeping each one that fits and stopping at the first non-positive net.
inline std::vector<UnitId> select_top(const AllocationInstance& inst, std::span<const double> score) {
  std::vector<double> net(inst.units.size());
  for (std::size_t i = 0; i < net.size(); ++i) net[i] = score[i] - exchange_cost(inst.units[i].cost, inst.weights);
  std::vector<UnitId> order(inst.units.size());
  std::iota(order.begin(), order.end(), UnitId{0});
  std::stable_sort(order.begin(), order.end(), [&](UnitId a, UnitId b) { return net[a] > net[b]; });
  std::vector<UnitId> chosen;
  double mem = 0.0, lat = 0.0, hw = 0.0;
  for (UnitId i : order) {
    if (!(net[i] > 0.0)) break;
    const CostVector& c = inst.units[i].cost;
    if (mem + static_cast<double>(c.memory) > inst.budgets.memory || lat + c.latency > inst.budgets.latency ||
        hw + c.compute > inst.budgets.hardware) {
      continue;
    }
    mem += static_cast<double>(c.memory);
    lat += c.latency;
    hw += c.compute;
    chosen.push_back(i);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

inline std::vector<UnitId> apply_rule(DecisionRule rule, const EstimatorSpec& spec, const AllocationInstance& inst,
                                      const StaticPredictorTable* table, RngStream& stream) {
  if (rule == DecisionRule::kTopKSelection) {
    const std::vector<double> s = score_units(spec, inst, table, stream);
    return select_top(inst, s);
  }
  PolicySpec p;
  p.kind = rule == DecisionRule::kEviction ? PolicyKind::kGreedy : PolicyKind::kThresholdDynamic;
  p.step_cost = 0.0;
  AllocationInstance unlimited = inst;
  unlimited.budgets.tau = kUnconstrained;
  RunOptions opts;
  opts.table = table;
  return run_policy(p, unlimited, spec, opts, stream).final_action.selected;
}

}  // namespace detail

// Objective of the rule driven by true values minus the objective of the same
// rule driven by the proxy, both under the true utility.
inline double decision_regret_of_proxy(const EstimatorSpec& spec, DecisionRule rule,
                                       const AllocationInstance& inst,
                                       const StaticPredictorTable* table, RngStream& stream) {
  check_instance(inst);
  EstimatorSpec truth;
  truth.kind = Provenance::kOracle;
  const std::vector<UnitId> ideal = detail::apply_rule(rule, truth, inst, table, stream);
  const std::vector<UnitId> proxied = detail::apply_rule(rule, spec, inst, table, stream);
  return objective(inst, ideal) - objective(inst, proxied);
}

struct LabeledInstance {
  std::vector<TokenUnit> units;
  std::vector<double> true_values;  // one per unit
};

struct ClassBias {
  double mean = 0.0;     // positive: the proxy overvalues this class
  double std_error = 0.0;
  std::size_t count = 0;
};

// Per-class mean of rank(proxy) - rank(true value), ranks normalized within
// each instance. Classes with no units are omitted.
inline std::map<TokenClass, ClassBias> bias_profile(const EstimatorSpec& spec,
                                                    std::span<const LabeledInstance> corpus,
                                                    const StaticPredictorTable* table) {
  if (is_set_valued(spec.kind)) throw Error("bias_profile: set-valued estimators need a utility");
  std::map<TokenClass, std::vector<double>> diffs;
  for (const LabeledInstance& li : corpus) {
    if (li.units.size() != li.true_values.size()) throw Error("bias_profile: value count mismatch");
    if (li.units.empty()) continue;
    std::uint64_t now = 0;
    for (const TokenUnit& u : li.units) now = std::max(now, u.arrival_step);
    std::vector<double> proxy(li.units.size());
    for (std::size_t i = 0; i < li.units.size(); ++i) {
      proxy[i] = spec.kind == Provenance::kOracle
                     ? li.true_values[i]
                     : proxy_value(spec, li.units[i], ProxyContext{now, table}).mean;
    }
    const std::vector<double> rp = rank_normalize(proxy);
    const std::vector<double> rt = rank_normalize(li.true_values);
    for (std::size_t i = 0; i < li.units.size(); ++i) diffs[li.units[i].token_class].push_back(rp[i] - rt[i]);
  }
  std::map<TokenClass, ClassBias> out;
  for (const auto& [cls, d] : diffs) {
    ClassBias b;
    b.count = d.size();
    b.mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    if (d.size() > 1) {
      double ss = 0.0;
      for (double x : d) ss += (x - b.mean) * (x - b.mean);
      b.std_error = std::sqrt(ss / static_cast<double>(d.size() - 1) / static_cast<double>(d.size()));
    }
    out[cls] = b;
  }
  return out;
}

}  // namespace tokenecon

#endif  // TOKENECON_CALIBRATION_HPP_
