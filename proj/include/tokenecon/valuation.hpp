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

#ifndef TOKENECON_VALUATION_HPP_
#define TOKENECON_VALUATION_HPP_

// Token valuation: counterfactual marginal values, exact and sampled Shapley
// attribution, leave-one-out, and the cheap proxy family (recency, position,
// synthetic attention, static lookup table).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tokenecon/core.hpp"
#include "tokenecon/rng.hpp"
#include "tokenecon/utility.hpp"

namespace tokenecon {

enum class Provenance : std::uint8_t {
  kOracle,
  kShapleyExact,
  kShapleyMc,
  kLeaveOneOut,
  kRecency,
  kPosition,
  kAttentionSurrogate,
  kStaticPredictor,
};

inline constexpr Provenance kAllProvenances[] = {
    Provenance::kOracle,   Provenance::kShapleyExact,       Provenance::kShapleyMc,
    Provenance::kLeaveOneOut, Provenance::kRecency,         Provenance::kPosition,
    Provenance::kAttentionSurrogate, Provenance::kStaticPredictor};

constexpr std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kOracle: return "oracle";
    case Provenance::kShapleyExact: return "shapley_exact";
    case Provenance::kShapleyMc: return "shapley_mc";
    case Provenance::kLeaveOneOut: return "leave_one_out";
    case Provenance::kRecency: return "recency";
    case Provenance::kPosition: return "position";
    case Provenance::kAttentionSurrogate: return "attention_surrogate";
    case Provenance::kStaticPredictor: return "static_predictor";
  }
  return "unknown";
}

inline Provenance provenance_from_string(std::string_view s) {
  for (Provenance p : kAllProvenances) {
    if (to_string(p) == s) return p;
  }
  throw Error("unknown estimator kind '" + std::string(s) + "'");
}

constexpr bool is_exact(Provenance p) {
  return p == Provenance::kOracle || p == Provenance::kShapleyExact ||
         p == Provenance::kLeaveOneOut;
}

constexpr bool is_proxy(Provenance p) {
  return p == Provenance::kRecency || p == Provenance::kPosition ||
         p == Provenance::kAttentionSurrogate || p == Provenance::kStaticPredictor;
}

// Estimators that value the whole active coalition at once rather than one
// arriving unit.
constexpr bool is_set_valued(Provenance p) {
  return p == Provenance::kShapleyExact || p == Provenance::kShapleyMc ||
         p == Provenance::kLeaveOneOut;
}

struct ValueEstimate {
  UnitId unit_id = 0;
  double mean = 0.0;
  double variance = 0.0;
  Provenance provenance = Provenance::kOracle;
  double sensing_cost_charged = 0.0;

  bool operator==(const ValueEstimate&) const = default;
};

struct EstimatorSpec {
  Provenance kind = Provenance::kOracle;
  std::uint32_t samples = 64;      // shapley_mc permutations
  double decay = 0.1;              // recency
  double position_scale = 8.0;     // position prior
  std::uint32_t bucket_width = 4;  // static_predictor position buckets
  double unit_cost = 1.0;          // cost units charged per decision unit valued
  double offline_charge = 0.0;     // static_predictor calibration, outside the online budget

  bool operator==(const EstimatorSpec&) const = default;
};

inline double default_unit_cost(Provenance p) {
  switch (p) {
    case Provenance::kOracle: return 1.0;
    case Provenance::kShapleyExact: return 1.0;
    case Provenance::kShapleyMc: return 0.5;
    case Provenance::kLeaveOneOut: return 0.5;
    case Provenance::kRecency: return 0.01;
    case Provenance::kPosition: return 0.01;
    case Provenance::kAttentionSurrogate: return 0.02;
    case Provenance::kStaticPredictor: return 0.0;
  }
  return 1.0;
}

// Returns a list of problems; empty means valid.
inline std::vector<std::string> check_estimator(const EstimatorSpec& s) {
  std::vector<std::string> errs;
  if (s.kind == Provenance::kStaticPredictor) {
    if (!(s.unit_cost >= 0.0)) errs.push_back("estimator.unit_cost: must be >= 0");
  } else if (!(s.unit_cost > 0.0)) {
    errs.push_back("estimator.unit_cost: must be > 0 for " + std::string(to_string(s.kind)));
  }
  if (s.kind == Provenance::kShapleyMc && s.samples < 1) {
    errs.push_back("estimator.params.samples: must be >= 1");
  }
  if (!(s.decay >= 0.0)) errs.push_back("estimator.params.decay: must be >= 0");
  if (!(s.position_scale > 0.0)) errs.push_back("estimator.params.position_scale: must be > 0");
  if (s.bucket_width < 1) errs.push_back("estimator.params.bucket_width: must be >= 1");
  if (!(s.offline_charge >= 0.0)) errs.push_back("estimator.params.offline_charge: must be >= 0");
  return errs;
}

// ---------------------------------------------------------------------------
// Objective aggregation and counterfactual marginal value

inline double aggregate_utility(const ValueVector& values, const CostVector& costs,
                                const ObjectiveWeights& w) {
  return weighted_value(values, w) - scalarized_cost(costs, w);
}

// F(S) - F(S \ {i}) - lambda_exchange * scalarized cost. The counterfactual
// state without unit i is the coalition with i removed.
template <CoalitionUtility F>
double marginal_value_oracle(const F& f, std::span<const UnitId> coalition, UnitId i,
                             const ObjectiveWeights& weights, const CostVector& cost) {
  std::vector<UnitId> without;
  without.reserve(coalition.size());
  bool found = false;
  for (UnitId j : coalition) {
    if (j == i) {
      found = true;
    } else {
      without.push_back(j);
    }
  }
  if (!found) throw Error("marginal_value_oracle: unit " + std::to_string(i) + " not in coalition");
  return f(coalition) - f(std::span<const UnitId>(without)) - exchange_cost(cost, weights);
}

// ---------------------------------------------------------------------------
// Shapley attribution

inline constexpr std::size_t kShapleyExactCap = 16;

// Enumerates all 2^n coalitions once, then combines marginals with the
// |S|!(n-|S|-1)!/n! weights.
template <CoalitionUtility F>
std::vector<double> shapley_exact(const F& f) {
  const std::size_t n = f.ground_size();
  if (n > kShapleyExactCap) {
    throw Error("shapley_exact: ground set of " + std::to_string(n) + " exceeds cap of " +
                std::to_string(kShapleyExactCap) + "; use shapley_mc");
  }
  if (n == 0) return {};
  const std::uint64_t full = (std::uint64_t{1} << n);
  std::vector<double> table(full);
  std::vector<UnitId> members;
  members.reserve(n);
  for (std::uint64_t mask = 0; mask < full; ++mask) {
    members.clear();
    for (std::uint64_t m = mask; m != 0; m &= m - 1) {
      members.push_back(static_cast<UnitId>(__builtin_ctzll(m)));
    }
    table[mask] = f(std::span<const UnitId>(members));
  }
  // weight[s] = s! (n-s-1)! / n!
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s) {
    double lw = std::lgamma(static_cast<double>(s) + 1.0) +
                std::lgamma(static_cast<double>(n - s)) -
                std::lgamma(static_cast<double>(n) + 1.0);
    weight[s] = std::exp(lw);
  }
  std::vector<double> phi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    double acc = 0.0;
    for (std::uint64_t mask = 0; mask < full; ++mask) {
      if (mask & bit) continue;
      acc += weight[static_cast<std::size_t>(__builtin_popcountll(mask))] *
             (table[mask | bit] - table[mask]);
    }
    phi[i] = acc;
  }
  return phi;
}

struct ShapleyMcResult {
  std::vector<double> values;
  std::vector<double> std_errors;  // +inf with a single sample
  std::uint32_t samples = 0;
};

// Uniform permutation sampling, one full marginal sweep per permutation.
template <CoalitionUtility F>
ShapleyMcResult shapley_mc(const F& f, std::uint32_t samples, RngStream& stream) {
  if (samples < 1) throw Error("shapley_mc: samples must be >= 1");
  const std::size_t n = f.ground_size();
  std::vector<double> sum(n, 0.0);
  std::vector<double> sumsq(n, 0.0);
  std::vector<UnitId> prefix;
  prefix.reserve(n);
  const double empty_value = f(std::span<const UnitId>());
  for (std::uint32_t s = 0; s < samples; ++s) {
    const std::vector<std::uint32_t> perm = stream.permutation(n);
    prefix.clear();
    double prev = empty_value;
    for (std::uint32_t i : perm) {
      prefix.push_back(i);
      const double cur = f(std::span<const UnitId>(prefix));
      const double marginal = cur - prev;
      sum[i] += marginal;
      sumsq[i] += marginal * marginal;
      prev = cur;
    }
  }
  ShapleyMcResult out;
  out.samples = samples;
  out.values.resize(n);
  out.std_errors.resize(n);
  const double m = static_cast<double>(samples);
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = sum[i] / m;
    out.values[i] = mean;
    if (samples == 1) {
      out.std_errors[i] = std::numeric_limits<double>::infinity();
    } else {
      const double var = std::max(0.0, (sumsq[i] - m * mean * mean) / (m - 1.0));
      out.std_errors[i] = std::sqrt(var / m);
    }
  }
  return out;
}

// v_i = F(N) - F(N \ {i}); exactly n + 1 evaluations.
template <CoalitionUtility F>
std::vector<double> leave_one_out(const F& f) {
  const std::size_t n = f.ground_size();
  std::vector<UnitId> all(n);
  std::iota(all.begin(), all.end(), UnitId{0});
  const double full = f(std::span<const UnitId>(all));
  std::vector<double> out(n);
  std::vector<UnitId> without;
  without.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    without.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) without.push_back(static_cast<UnitId>(j));
    }
    out[i] = full - f(std::span<const UnitId>(without));
  }
  return out;
}

// |F(N) - sum_i v_i| with leave-one-out v_i. Zero for additive utilities.
template <CoalitionUtility F>
double nonadditivity_gap(const F& f) {
  if (f.ground_size() > kShapleyExactCap) {
    throw Error("nonadditivity_gap: ground set exceeds cap of " + std::to_string(kShapleyExactCap));
  }
  std::vector<UnitId> all(f.ground_size());
  std::iota(all.begin(), all.end(), UnitId{0});
  const std::vector<double> loo = leave_one_out(f);
  return std::abs(f(std::span<const UnitId>(all)) - std::accumulate(loo.begin(), loo.end(), 0.0));
}

// ---------------------------------------------------------------------------
// Proxies

// Frozen lookup of mean oracle value per (token class, position bucket),
// built once from a calibration run.
class StaticPredictorTable {
 public:
  StaticPredictorTable() = default;

  static StaticPredictorTable calibrate(std::span<const TokenUnit> units,
                                        std::span<const double> oracle_values,
                                        std::uint32_t bucket_width) {
    if (units.size() != oracle_values.size()) throw Error("calibration size mismatch");
    if (bucket_width < 1) throw Error("bucket_width must be >= 1");
    StaticPredictorTable t;
    t.bucket_width_ = bucket_width;
    std::map<Key, std::pair<double, std::size_t>> acc;
    double total = 0.0;
    for (std::size_t i = 0; i < units.size(); ++i) {
      auto& slot = acc[key_for(units[i], bucket_width)];
      slot.first += oracle_values[i];
      slot.second += 1;
      total += oracle_values[i];
    }
    for (const auto& [k, v] : acc) t.table_[k] = v.first / static_cast<double>(v.second);
    t.fallback_ = units.empty() ? 0.0 : total / static_cast<double>(units.size());
    t.calibration_units_ = units.size();
    return t;
  }

  double lookup(const TokenUnit& u) const {
    auto it = table_.find(key_for(u, bucket_width_));
    return it == table_.end() ? fallback_ : it->second;
  }

  bool empty() const { return calibration_units_ == 0; }
  std::size_t calibration_units() const { return calibration_units_; }
  std::uint32_t bucket_width() const { return bucket_width_; }

 private:
  using Key = std::pair<std::uint8_t, std::uint32_t>;
  static Key key_for(const TokenUnit& u, std::uint32_t width) {
    return {static_cast<std::uint8_t>(u.token_class), u.features.position / width};
  }

  std::map<Key, double> table_;
  double fallback_ = 0.0;
  std::uint32_t bucket_width_ = 1;
  std::size_t calibration_units_ = 0;
};

struct ProxyContext {
  std::uint64_t now_step = 0;
  const StaticPredictorTable* table = nullptr;
};

// Proxy score for one unit. Never reads the unit's value components.
inline ValueEstimate proxy_value(const EstimatorSpec& spec, const TokenUnit& unit,
                                 const ProxyContext& ctx) {
  ValueEstimate est;
  est.unit_id = unit.id;
  est.provenance = spec.kind;
  est.sensing_cost_charged = spec.unit_cost;
  switch (spec.kind) {
    case Provenance::kRecency: {
      const double age =
          ctx.now_step >= unit.arrival_step ? static_cast<double>(ctx.now_step - unit.arrival_step) : 0.0;
      est.mean = std::exp(-spec.decay * age);
      break;
    }
    case Provenance::kPosition:
      est.mean = 1.0 / (1.0 + static_cast<double>(unit.features.position) / spec.position_scale);
      break;
    case Provenance::kAttentionSurrogate:
      est.mean = unit.features.attention_mass;
      break;
    case Provenance::kStaticPredictor:
      if (ctx.table == nullptr || ctx.table->empty()) {
        throw Error("static_predictor: no calibration table loaded");
      }
      est.mean = ctx.table->lookup(unit);
      break;
    default:
      throw Error("proxy_value: '" + std::string(to_string(spec.kind)) + "' is not a proxy");
  }
  return est;
}

// Ranks in [0, 1] (ascending), ties share their average rank. A single
// element maps to 0.5.
inline std::vector<double> rank_normalize(std::span<const double> xs) {
  const std::size_t n = xs.size();
  std::vector<double> out(n, 0.5);
  if (n <= 1) return out;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) out[idx[k]] = avg / static_cast<double>(n - 1);
    i = j + 1;
  }
  return out;
}

}  // namespace tokenecon

#endif  // TOKENECON_VALUATION_HPP_
