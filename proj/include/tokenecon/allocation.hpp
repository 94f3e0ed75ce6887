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

#ifndef TOKENECON_ALLOCATION_HPP_
#define TOKENECON_ALLOCATION_HPP_

// Offline optimal allocation (the full-information benchmark), the online
// policy family, and regret accounting against the benchmark.
//
// The objective of a selection S is F(S) - sum_{i in S} lambda_exchange *
// scalarized_cost(c_i), subject to the memory, latency and hardware budgets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tokenecon/core.hpp"
#include "tokenecon/rng.hpp"
#include "tokenecon/utility.hpp"
#include "tokenecon/valuation.hpp"

namespace tokenecon {

struct AllocationInstance {
  std::vector<TokenUnit> units;  // units[i].id == i
  UtilityFunction utility;
  Budgets budgets;
  ObjectiveWeights weights;
};

inline void check_instance(const AllocationInstance& inst) {
  if (inst.utility.ground_size() != inst.units.size()) {
    throw Error("instance: utility ground set size " + std::to_string(inst.utility.ground_size()) +
                " != unit count " + std::to_string(inst.units.size()));
  }
  for (std::size_t i = 0; i < inst.units.size(); ++i) {
    if (inst.units[i].id != i) throw Error("instance: unit ids must be 0..n-1 in order");
    if (!is_valid(inst.units[i].cost)) throw Error("instance: negative cost on unit " + std::to_string(i));
  }
}

struct AllocationAction {
  std::vector<UnitId> selected;  // ascending
  std::map<UnitId, std::int64_t> levels;

  bool operator==(const AllocationAction&) const = default;
};

inline double selection_cost(const AllocationInstance& inst, std::span<const UnitId> selected) {
  double c = 0.0;
  for (UnitId i : selected) c += exchange_cost(inst.units[i].cost, inst.weights);
  return c;
}

// U(a; v) - C(a; c) under the true utility.
inline double objective(const AllocationInstance& inst, std::span<const UnitId> selected) {
  return inst.utility(selected) - selection_cost(inst, selected);
}

inline bool is_feasible(const AllocationInstance& inst, std::span<const UnitId> selected) {
  double mem = 0.0, lat = 0.0, hw = 0.0;
  for (UnitId i : selected) {
    mem += static_cast<double>(inst.units[i].cost.memory);
    lat += inst.units[i].cost.latency;
    hw += inst.units[i].cost.compute;
  }
  return mem <= inst.budgets.memory && lat <= inst.budgets.latency && hw <= inst.budgets.hardware;
}

// ---------------------------------------------------------------------------
// Offline benchmark

inline constexpr std::size_t kExhaustiveCap = 20;

struct OfflineSolution {
  AllocationAction action;
  double objective = 0.0;
};

namespace detail {

inline constexpr double kTieEps = 1e-12;

// Lexicographic order on ascending id sequences, with a proper prefix ranked
// first: {} < {0} < {0,1} < {0,2} < {1}.
inline bool lex_less(std::uint64_t a, std::uint64_t b) {
  if (a == b) return false;
  const std::uint64_t diff = a ^ b;
  const std::uint64_t low = diff & (~diff + 1);
  const std::uint64_t above = ~((low << 1) - 1);
  if (a & low) return (b & above) != 0;  // a continues with the smaller element
  return (a & above) == 0;               // a is the prefix
}

inline OfflineSolution solve_exhaustive(const AllocationInstance& inst) {
  const std::size_t n = inst.units.size();
  const std::uint64_t full = std::uint64_t{1} << n;
  std::vector<double> net(n), mem(n), lat(n), hw(n);
  for (std::size_t i = 0; i < n; ++i) {
    net[i] = exchange_cost(inst.units[i].cost, inst.weights);
    mem[i] = static_cast<double>(inst.units[i].cost.memory);
    lat[i] = inst.units[i].cost.latency;
    hw[i] = inst.units[i].cost.compute;
  }
  std::uint64_t best_mask = 0;
  double best = 0.0;  // empty set
  std::vector<UnitId> members;
  for (std::uint64_t mask = 1; mask < full; ++mask) {
    double m = 0.0, l = 0.0, h = 0.0, c = 0.0;
    members.clear();
    for (std::uint64_t x = mask; x != 0; x &= x - 1) {
      const auto i = static_cast<std::size_t>(__builtin_ctzll(x));
      members.push_back(static_cast<UnitId>(i));
      m += mem[i];
      l += lat[i];
      h += hw[i];
      c += net[i];
    }
    if (m > inst.budgets.memory || l > inst.budgets.latency || h > inst.budgets.hardware) continue;
    const double value = inst.utility(members) - c;
    if (value > best + kTieEps || (value >= best - kTieEps && lex_less(mask, best_mask))) {
      best = value;
      best_mask = mask;
    }
  }
  OfflineSolution sol;
  sol.action.selected = mask_members(best_mask);
  sol.objective = objective(inst, sol.action.selected);
  return sol;
}

// 0/1 knapsack over integer memory. Suffix tables let the forward pass pick
// the lexicographically smallest optimal set.
inline OfflineSolution solve_knapsack(const AllocationInstance& inst) {
  const std::size_t n = inst.units.size();
  std::int64_t total_mem = 0;
  for (const TokenUnit& u : inst.units) total_mem += u.cost.memory;
  std::int64_t cap = total_mem;
  if (std::isfinite(inst.budgets.memory)) {
    cap = std::min<std::int64_t>(cap, static_cast<std::int64_t>(std::floor(inst.budgets.memory)));
  }
  cap = std::max<std::int64_t>(cap, 0);
  const auto width = static_cast<std::size_t>(cap) + 1;
  std::vector<double> net(n);
  for (std::size_t i = 0; i < n; ++i) {
    net[i] = inst.utility.unit_weight(static_cast<UnitId>(i)) -
             exchange_cost(inst.units[i].cost, inst.weights);
  }
  // take[i*width+m]: including unit i is optimal for suffix i at capacity m.
  // zero[i*width+m]: the optimal suffix value is 0, so selecting nothing more is optimal.
  std::vector<std::uint8_t> take(n * width, 0), zero((n + 1) * width, 1);
  std::vector<double> next(width, 0.0), cur(width, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    const std::int64_t w = inst.units[ii].cost.memory;
    for (std::size_t m = 0; m < width; ++m) {
      const double skip = next[m];
      double best = skip;
      bool inc = false;
      if (w <= static_cast<std::int64_t>(m)) {
        const double with = net[ii] + next[m - static_cast<std::size_t>(w)];
        if (with > skip + kTieEps) {
          best = with;
          inc = true;
        } else if (with >= skip - kTieEps) {
          inc = true;  // tie; resolved by the forward pass
        }
      }
      cur[m] = best;
      take[ii * width + m] = inc ? 1 : 0;
      zero[ii * width + m] = best <= kTieEps ? 1 : 0;
    }
    std::swap(cur, next);
  }
  OfflineSolution sol;
  std::size_t m = width - 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (zero[i * width + m]) break;
    if (take[i * width + m]) {
      sol.action.selected.push_back(static_cast<UnitId>(i));
      m -= static_cast<std::size_t>(inst.units[i].cost.memory);
    }
  }
  sol.objective = objective(inst, sol.action.selected);
  return sol;
}

}  // namespace detail

// Exact optimum. Additive utilities use the knapsack DP when only memory can
// bind; everything else is enumerated and capped at kExhaustiveCap units.
inline OfflineSolution solve_offline(const AllocationInstance& inst) {
  check_instance(inst);
  if (inst.units.empty()) return {};
  double total_lat = 0.0, total_hw = 0.0;
  for (const TokenUnit& u : inst.units) {
    total_lat += u.cost.latency;
    total_hw += u.cost.compute;
  }
  const bool only_memory_binds =
      total_lat <= inst.budgets.latency && total_hw <= inst.budgets.hardware;
  if (inst.utility.is_additive() && only_memory_binds) return detail::solve_knapsack(inst);
  if (inst.units.size() > kExhaustiveCap) {
    throw Error("solve_offline: " + std::string(inst.utility.is_additive() ? "multi-budget" : "non-additive") +
                " instance with " + std::to_string(inst.units.size()) + " units exceeds cap of " +
                std::to_string(kExhaustiveCap));
  }
  return detail::solve_exhaustive(inst);
}

// ---------------------------------------------------------------------------
// Online policies

enum class PolicyKind : std::uint8_t { kGreedy, kThresholdDynamic, kPrimalDual, kRecency, kLookahead };

constexpr std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::kGreedy: return "greedy";
    case PolicyKind::kThresholdDynamic: return "threshold_dynamic";
    case PolicyKind::kPrimalDual: return "primal_dual";
    case PolicyKind::kRecency: return "recency";
    case PolicyKind::kLookahead: return "lookahead";
  }
  return "unknown";
}

inline PolicyKind policy_kind_from_string(std::string_view s) {
  for (PolicyKind k : {PolicyKind::kGreedy, PolicyKind::kThresholdDynamic, PolicyKind::kPrimalDual,
                       PolicyKind::kRecency, PolicyKind::kLookahead}) {
    if (to_string(k) == s) return k;
  }
  throw Error("unknown policy kind '" + std::string(s) + "'");
}

inline constexpr std::uint32_t kMaxLookahead = 4;

struct PolicySpec {
  PolicyKind kind = PolicyKind::kGreedy;
  double threshold = 0.0;           // threshold_dynamic: floor theta_0
  double kappa = 0.5;               // threshold_dynamic: adjustment gain
  double target_utilization = 0.9;  // threshold_dynamic
  double eta = 0.05;                // primal_dual step size
  double initial_price = 0.0;       // primal_dual
  std::uint64_t stream_length = 0;  // primal_dual budget share denominator; 0 = arrivals
  std::uint32_t horizon = 2;        // lookahead
  double step_cost = 0.01;          // T_alloc per decision step

  bool operator==(const PolicySpec&) const = default;
};

inline std::vector<std::string> check_policy(const PolicySpec& p) {
  std::vector<std::string> errs;
  if (p.kind == PolicyKind::kPrimalDual && !(p.eta > 0.0)) errs.push_back("policy.params.eta: must be > 0");
  if (p.horizon > kMaxLookahead) errs.push_back("policy.params.horizon: must be <= 4");
  if (!(p.step_cost >= 0.0)) errs.push_back("policy.step_cost: must be >= 0");
  if (!(p.kappa >= 0.0)) errs.push_back("policy.params.kappa: must be >= 0");
  if (!(p.initial_price >= 0.0)) errs.push_back("policy.params.initial_price: must be >= 0");
  return errs;
}

struct StepRecord {
  std::uint64_t step = 0;
  std::uint64_t action_hash = 0;
  double realized_utility = 0.0;  // true F of the retained set after this step
  double realized_cost = 0.0;     // exchange cost of the retained set
  std::int64_t memory_used = 0;
  double latency = 0.0;
  double sensing_cost = 0.0;  // demanded T_value
  double alloc_cost = 0.0;    // demanded T_alloc
  std::uint32_t units_valued = 0;
  std::size_t retained = 0;
  bool admitted = false;
  bool budget_violation = false;
  bool forced_rejection = false;
};

struct Trajectory {
  std::vector<StepRecord> steps;
  AllocationAction final_action;  // token-level ids
  double terminal_objective = 0.0;
  std::uint64_t valuations = 0;       // decision units valued
  std::uint64_t decision_steps = 0;   // steps charged T_alloc
  std::size_t decision_units = 0;     // G
};

// What a policy may observe about an arriving decision unit. No value fields.
struct ObservedUnit {
  std::uint32_t decision_unit = 0;
  std::vector<UnitId> tokens;
  std::int64_t memory = 0;
  double exchange_cost = 0.0;
  std::uint64_t arrival_step = 0;
  std::optional<double> estimate;
};

struct RunOptions {
  // Decision units in arrival order. Empty means one unit per token, ordered
  // by (arrival_step, id).
  std::vector<std::vector<UnitId>> groups;
  const StaticPredictorTable* table = nullptr;
  std::function<void(const ObservedUnit&)> observer;
};

inline std::uint64_t hash_ids(std::span<const std::uint32_t> ids) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint32_t id : ids) {
    for (int b = 0; b < 4; ++b) {
      h ^= (id >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace detail {

// Restriction of a utility to a list of global ids, re-indexed locally.
template <CoalitionUtility F>
class SubsetUtility {
 public:
  SubsetUtility(const F& f, std::span<const UnitId> ids) : f_(&f), ids_(ids.begin(), ids.end()) {}
  std::size_t ground_size() const { return ids_.size(); }
  double operator()(std::span<const UnitId> local) const {
    scratch_.clear();
    for (UnitId l : local) scratch_.push_back(ids_[l]);
    return (*f_)(std::span<const UnitId>(scratch_));
  }

 private:
  const F* f_;
  std::vector<UnitId> ids_;
  mutable std::vector<UnitId> scratch_;
};

struct Held {
  std::uint32_t group = 0;
  std::int64_t memory = 0;
  double latency = 0.0;
  double compute = 0.0;
  double cost = 0.0;      // exchange cost
  double estimate = 0.0;  // gross value estimate
  bool estimated = false;
  std::uint64_t ordinal = 0;
};

}  // namespace detail

// Runs one policy over the arrival stream. At every step the policy sees only
// arrived units, their observable costs and their estimates.
inline Trajectory run_policy(const PolicySpec& policy, const AllocationInstance& inst,
                             const EstimatorSpec& estimator, const RunOptions& options,
                             RngStream& stream) {
  check_instance(inst);
  std::vector<std::vector<UnitId>> groups = options.groups;
  if (groups.empty()) {
    std::vector<UnitId> order(inst.units.size());
    std::iota(order.begin(), order.end(), UnitId{0});
    std::stable_sort(order.begin(), order.end(), [&](UnitId a, UnitId b) {
      return inst.units[a].arrival_step < inst.units[b].arrival_step;
    });
    for (UnitId i : order) groups.push_back({i});
  }
  const std::size_t ng = groups.size();
  const UtilityFunction gutil = group_utility(inst.utility, groups);

  std::vector<std::int64_t> gmem(ng, 0);
  std::vector<double> gcost(ng, 0.0), glat(ng, 0.0), ghw(ng, 0.0);
  std::vector<std::uint64_t> garrival(ng, 0);
  for (std::size_t g = 0; g < ng; ++g) {
    for (UnitId i : groups[g]) {
      gmem[g] += inst.units[i].cost.memory;
      gcost[g] += exchange_cost(inst.units[i].cost, inst.weights);
      glat[g] += inst.units[i].cost.latency;
      ghw[g] += inst.units[i].cost.compute;
      garrival[g] = std::max(garrival[g], inst.units[i].arrival_step);
    }
  }

  const double mem_budget = inst.budgets.memory;
  const double tau = inst.budgets.tau;
  const bool uses_estimates = policy.kind != PolicyKind::kRecency;
  const std::uint64_t stream_len = policy.stream_length > 0 ? policy.stream_length : ng;
  const double share = std::isfinite(mem_budget) ? mem_budget / static_cast<double>(stream_len)
                                                 : kUnconstrained;

  Trajectory traj;
  traj.decision_units = ng;
  std::vector<detail::Held> held;
  std::int64_t occupancy = 0;
  double lat_used = 0.0, hw_used = 0.0;
  double theta = policy.threshold;
  double price = policy.initial_price;
  double mean_net_sum = 0.0, mean_mem_sum = 0.0;
  std::uint64_t seen_estimates = 0;
  std::uint64_t now = 0;

  auto gross_of = [&](const detail::Held& h) {
    if (!h.estimated) return -kUnconstrained;
    if (estimator.kind == Provenance::kRecency) {
      double s = 0.0;
      for (UnitId i : groups[h.group]) {
        s += proxy_value(estimator, inst.units[i], ProxyContext{now, options.table}).mean;
      }
      return s;
    }
    return h.estimate;
  };
  auto score_of = [&](const detail::Held& h) {
    if (!h.estimated) return -kUnconstrained;
    double s = gross_of(h) - h.cost;
    if (policy.kind == PolicyKind::kPrimalDual) s -= price * static_cast<double>(h.memory);
    return s;
  };
  // Unestimated units go first (oldest first), then ascending score, then id.
  auto eviction_order = [&]() {
    std::vector<std::size_t> idx(held.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<double> score(held.size());
    for (std::size_t k = 0; k < held.size(); ++k) score[k] = score_of(held[k]);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const detail::Held& x = held[a];
      const detail::Held& y = held[b];
      if (x.estimated != y.estimated) return !x.estimated;
      if (!x.estimated) return x.ordinal < y.ordinal;
      if (score[a] != score[b]) return score[a] < score[b];
      return x.group < y.group;
    });
    return std::make_pair(idx, score);
  };
  auto retained_groups = [&]() {
    std::vector<UnitId> ids;
    ids.reserve(held.size());
    for (const auto& h : held) ids.push_back(h.group);
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  auto erase_indices = [&](std::vector<std::size_t> victims) {
    std::sort(victims.begin(), victims.end(), std::greater<>());
    for (std::size_t v : victims) {
      occupancy -= held[v].memory;
      lat_used -= held[v].latency;
      hw_used -= held[v].compute;
      held.erase(held.begin() + static_cast<std::ptrdiff_t>(v));
    }
  };
  // Whether the newcomer fits once `freed` (memory, latency, compute) is released.
  struct Usage {
    std::int64_t memory = 0;
    double latency = 0.0, compute = 0.0;
  };
  auto fits = [&](const detail::Held& in, const Usage& freed) {
    return static_cast<double>(occupancy + in.memory - freed.memory) <= mem_budget &&
           lat_used + in.latency - freed.latency <= inst.budgets.latency + 1e-12 &&
           hw_used + in.compute - freed.compute <= inst.budgets.hardware + 1e-12;
  };
  auto add_freed = [&](Usage& u, const detail::Held& h) {
    u.memory += h.memory;
    u.latency += h.latency;
    u.compute += h.compute;
  };
  auto admit = [&](const detail::Held& in) {
    held.push_back(in);
    occupancy += in.memory;
    lat_used += in.latency;
    hw_used += in.compute;
  };

  for (std::size_t step = 0; step < ng; ++step) {
    const auto g = static_cast<std::uint32_t>(step);
    now = std::max(now, garrival[g]);
    StepRecord rec;
    rec.step = step;

    detail::Held incoming;
    incoming.group = g;
    incoming.memory = gmem[g];
    incoming.latency = glat[g];
    incoming.compute = ghw[g];
    incoming.cost = gcost[g];
    incoming.ordinal = step;

    ObservedUnit seen;
    seen.decision_unit = g;
    seen.tokens = groups[g];
    seen.memory = gmem[g];
    seen.exchange_cost = gcost[g];
    seen.arrival_step = garrival[g];

    if (static_cast<double>(gmem[g]) > mem_budget || glat[g] > inst.budgets.latency ||
        ghw[g] > inst.budgets.hardware) {
      rec.forced_rejection = true;
      rec.alloc_cost = policy.step_cost;
      ++traj.decision_steps;
    } else {
      std::uint32_t to_value = 0;
      if (uses_estimates) {
        to_value = is_set_valued(estimator.kind) ? static_cast<std::uint32_t>(held.size() + 1) : 1;
      }
      rec.sensing_cost = estimator.unit_cost * static_cast<double>(to_value);
      rec.alloc_cost = policy.step_cost;
      rec.units_valued = to_value;
      traj.valuations += to_value;
      ++traj.decision_steps;
      rec.budget_violation = rec.sensing_cost + rec.alloc_cost > tau;

      if (!uses_estimates || rec.budget_violation) {
        // Zero-cost default: admit, evict oldest until it fits.
        std::vector<std::size_t> order(held.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return held[a].ordinal < held[b].ordinal; });
        std::vector<std::size_t> victims;
        Usage freed;
        for (std::size_t k = 0; k < order.size() && !fits(incoming, freed); ++k) {
          victims.push_back(order[k]);
          add_freed(freed, held[order[k]]);
        }
        erase_indices(victims);
        admit(incoming);
        rec.admitted = true;
        if (options.observer) options.observer(seen);
      } else {
        // Valuation.
        if (estimator.kind == Provenance::kOracle) {
          std::vector<UnitId> k = retained_groups();
          const double before = gutil(k);
          k.push_back(g);
          incoming.estimate = gutil(k) - before;
        } else if (is_set_valued(estimator.kind)) {
          std::vector<UnitId> ids;
          for (const auto& h : held) ids.push_back(h.group);
          ids.push_back(g);
          detail::SubsetUtility<UtilityFunction> sub(gutil, ids);
          std::vector<double> vals;
          if (estimator.kind == Provenance::kShapleyExact) {
            vals = shapley_exact(sub);
          } else if (estimator.kind == Provenance::kShapleyMc) {
            vals = shapley_mc(sub, estimator.samples, stream).values;
          } else {
            vals = leave_one_out(sub);
          }
          for (std::size_t k = 0; k < held.size(); ++k) {
            held[k].estimate = vals[k];
            held[k].estimated = true;
          }
          incoming.estimate = vals.back();
        } else {
          double s = 0.0;
          for (UnitId i : groups[g]) {
            s += proxy_value(estimator, inst.units[i], ProxyContext{now, options.table}).mean;
          }
          incoming.estimate = s;
        }
        incoming.estimated = true;
        seen.estimate = incoming.estimate;
        if (options.observer) options.observer(seen);

        double in_score = incoming.estimate - incoming.cost;
        if (policy.kind == PolicyKind::kPrimalDual) in_score -= price * static_cast<double>(incoming.memory);
        mean_net_sum += incoming.estimate - incoming.cost;
        mean_mem_sum += static_cast<double>(incoming.memory);
        ++seen_estimates;

        bool want = in_score > 0.0;
        if (policy.kind == PolicyKind::kThresholdDynamic) want = in_score > theta;

        // Victims: lower-scored units, in eviction order, until the newcomer fits.
        auto plan_evictions = [&](double against) -> std::optional<std::vector<std::size_t>> {
          if (fits(incoming, Usage{})) return std::vector<std::size_t>{};
          auto [order, score] = eviction_order();
          std::vector<std::size_t> victims;
          Usage freed;
          for (std::size_t k : order) {
            if (fits(incoming, freed)) break;
            if (held[k].estimated && !(score[k] < against)) break;
            victims.push_back(k);
            add_freed(freed, held[k]);
          }
          if (!fits(incoming, freed)) return std::nullopt;
          return victims;
        };

        if (policy.kind == PolicyKind::kLookahead && want) {
          // Compare admit vs reject over h hypothetical arrivals carrying the
          // running mean net value and memory of what has been observed so far.
          const double hyp_net = mean_net_sum / static_cast<double>(seen_estimates);
          const auto hyp_mem = static_cast<std::int64_t>(
              std::ceil(mean_mem_sum / static_cast<double>(seen_estimates) - 1e-12));
          auto best_future = [&](std::vector<std::pair<double, std::int64_t>> pool, std::int64_t occ) {
            double best = -kUnconstrained;
            const std::uint32_t h = policy.horizon;
            for (std::uint32_t pattern = 0; pattern < (1u << h); ++pattern) {
              auto p = pool;
              std::int64_t o = occ;
              bool ok = true;
              for (std::uint32_t j = 0; j < h && ok; ++j) {
                if (!(pattern & (1u << j))) continue;
                std::sort(p.begin(), p.end());
                while (static_cast<double>(o + hyp_mem) > mem_budget && !p.empty()) {
                  o -= p.front().second;
                  p.erase(p.begin());
                }
                if (static_cast<double>(o + hyp_mem) > mem_budget) {
                  ok = false;
                  break;
                }
                p.emplace_back(hyp_net, hyp_mem);
                o += hyp_mem;
              }
              if (!ok) continue;
              double total = 0.0;
              for (const auto& e : p) total += e.first;
              best = std::max(best, total);
            }
            return best;
          };
          std::vector<std::pair<double, std::int64_t>> pool;
          for (const auto& h : held) pool.emplace_back(score_of(h), h.memory);
          const double reject_value = best_future(pool, occupancy);
          double admit_value = -kUnconstrained;
          if (auto victims = plan_evictions(in_score)) {
            std::vector<std::pair<double, std::int64_t>> after;
            std::int64_t occ = occupancy + incoming.memory;
            for (std::size_t k = 0; k < held.size(); ++k) {
              if (std::find(victims->begin(), victims->end(), k) != victims->end()) {
                occ -= held[k].memory;
              } else {
                after.emplace_back(score_of(held[k]), held[k].memory);
              }
            }
            after.emplace_back(in_score, incoming.memory);
            admit_value = best_future(after, occ);
          }
          want = admit_value > reject_value;
        }

        if (want) {
          if (auto victims = plan_evictions(in_score)) {
            erase_indices(*victims);
            admit(incoming);
            rec.admitted = true;
          }
        }
      }
    }

    if (policy.kind == PolicyKind::kThresholdDynamic) {
      const double util = std::isfinite(mem_budget) && mem_budget > 0.0
                              ? static_cast<double>(occupancy) / mem_budget
                              : 0.0;
      theta = std::max(policy.threshold, theta + policy.kappa * (util - policy.target_utilization));
    }
    if (policy.kind == PolicyKind::kPrimalDual) {
      const double usage = rec.admitted ? static_cast<double>(incoming.memory) : 0.0;
      price = std::max(0.0, price + policy.eta * (usage - share));
    }

    const std::vector<UnitId> ret = retained_groups();
    rec.retained = ret.size();
    rec.memory_used = occupancy;
    rec.realized_utility = gutil(ret);
    for (UnitId k : ret) rec.realized_cost += gcost[k];
    rec.action_hash = hash_ids(ret);
    rec.latency = rec.sensing_cost + rec.alloc_cost + (rec.admitted ? glat[g] : 0.0);
    traj.steps.push_back(rec);
  }

  for (const auto& h : held) {
    for (UnitId i : groups[h.group]) traj.final_action.selected.push_back(i);
  }
  std::sort(traj.final_action.selected.begin(), traj.final_action.selected.end());
  traj.terminal_objective = objective(inst, traj.final_action.selected);
  return traj;
}

// Economic regret of the trajectory's final action against the offline optimum.
inline double compute_regret(const Trajectory& traj, const AllocationInstance& inst) {
  const OfflineSolution best = solve_offline(inst);
  return best.objective - objective(inst, traj.final_action.selected);
}

// Mean over steps of (T_value + T_alloc) / tau; 0 when tau is unconstrained.
inline double real_time_ratio(const Trajectory& traj, double tau) {
  if (!std::isfinite(tau) || traj.steps.empty()) return 0.0;
  double s = 0.0;
  for (const StepRecord& r : traj.steps) s += (r.sensing_cost + r.alloc_cost) / tau;
  return s / static_cast<double>(traj.steps.size());
}

// ---------------------------------------------------------------------------
// Shadow prices, tail constraint, batch resources

inline double per_step_share(double budget, std::uint64_t stream_length) {
  if (stream_length == 0) throw Error("per_step_share: stream length must be > 0");
  return budget / static_cast<double>(stream_length);
}

// price_r <- max(0, price_r + eta * (usage_r - share_r)).
inline std::vector<double> dual_update(std::span<const double> prices, std::span<const double> usage,
                                       std::span<const double> share, double eta) {
  if (!(eta > 0.0)) throw Error("dual_update: eta must be > 0");
  if (prices.size() != usage.size() || prices.size() != share.size()) {
    throw Error("dual_update: resource vectors differ in length");
  }
  std::vector<double> out(prices.size());
  for (std::size_t r = 0; r < prices.size(); ++r) {
    out[r] = std::max(0.0, prices[r] + eta * (usage[r] - share[r]));
  }
  return out;
}

struct TailCheck {
  bool pass = true;
  double exceedance_rate = 0.0;
};

template <class Latencies>
TailCheck check_tail_latencies(const Latencies& latencies, double limit, double delta) {
  if (latencies.empty()) throw Error("check_tail_constraint: empty trajectory");
  std::size_t over = 0;
  for (double l : latencies) {
    if (l > limit) ++over;
  }
  TailCheck out;
  out.exceedance_rate = static_cast<double>(over) / static_cast<double>(latencies.size());
  out.pass = out.exceedance_rate <= delta;
  return out;
}

inline TailCheck check_tail_constraint(const Trajectory& traj, double limit, double delta) {
  std::vector<double> l;
  l.reserve(traj.steps.size());
  for (const StepRecord& r : traj.steps) l.push_back(r.latency);
  return check_tail_latencies(l, limit, delta);
}

struct BatchAllocation {
  std::vector<std::int64_t> levels;
  double objective = 0.0;
};

// max sum_i v_i q_i(r_i) s.t. sum_i r_i <= R, by repeatedly granting one level
// to the unit with the largest positive v_i * (q_i(r_i + 1) - q_i(r_i)).
// curves[i][r] is q_i at level r for r = 0..cap_i.
inline BatchAllocation allocate_batch_resources(std::span<const double> values,
                                                const std::vector<std::vector<double>>& curves,
                                                std::int64_t capacity) {
  if (capacity < 0) throw Error("allocate_batch_resources: negative capacity");
  if (values.size() != curves.size()) throw Error("allocate_batch_resources: size mismatch");
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& q = curves[i];
    if (q.empty()) throw Error("allocate_batch_resources: empty quality curve");
    for (std::size_t r = 1; r < q.size(); ++r) {
      if (q[r] < q[r - 1]) throw Error("allocate_batch_resources: curve " + std::to_string(i) + " decreases");
      if (r >= 2 && q[r] - q[r - 1] > q[r - 1] - q[r - 2] + 1e-12) {
        throw Error("allocate_batch_resources: curve " + std::to_string(i) + " is not concave");
      }
    }
  }
  BatchAllocation out;
  out.levels.assign(values.size(), 0);
  for (std::int64_t unit = 0; unit < capacity; ++unit) {
    double best_gain = 0.0;
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto r = static_cast<std::size_t>(out.levels[i]);
      if (r + 1 >= curves[i].size()) continue;
      const double gain = values[i] * (curves[i][r + 1] - curves[i][r]);
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    if (!best) break;
    ++out.levels[*best];
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.objective += values[i] * curves[i][static_cast<std::size_t>(out.levels[i])];
  }
  return out;
}

}  // namespace tokenecon

#endif  // TOKENECON_ALLOCATION_HPP_
