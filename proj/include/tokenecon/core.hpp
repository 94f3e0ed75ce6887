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

#ifndef TOKENECON_CORE_HPP_
#define TOKENECON_CORE_HPP_

// Domain types shared by every module: token units, value and cost vectors,
// objective weights and budgets. All budget arithmetic is in abstract cost or
// time units; nothing here reads a clock.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tokenecon {

using UnitId = std::uint32_t;

inline constexpr double kUnconstrained = std::numeric_limits<double>::infinity();

// Base of every error thrown by the library. Validation errors carry the
// dotted field path of the offending entry.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TokenClass : std::uint8_t {
  kInput = 0,
  kOutput = 1,
  kReasoning = 2,
  kRetrieval = 3,
  kTool = 4,
  kSpeculative = 5,
};

inline constexpr std::size_t kNumTokenClasses = 6;

inline constexpr std::array<TokenClass, kNumTokenClasses> kAllTokenClasses = {
    TokenClass::kInput,     TokenClass::kOutput, TokenClass::kReasoning,
    TokenClass::kRetrieval, TokenClass::kTool,   TokenClass::kSpeculative};

constexpr std::string_view to_string(TokenClass c) {
  switch (c) {
    case TokenClass::kInput: return "input";
    case TokenClass::kOutput: return "output";
    case TokenClass::kReasoning: return "reasoning";
    case TokenClass::kRetrieval: return "retrieval";
    case TokenClass::kTool: return "tool";
    case TokenClass::kSpeculative: return "speculative";
  }
  return "unknown";
}

inline TokenClass token_class_from_string(std::string_view s) {
  for (TokenClass c : kAllTokenClasses) {
    if (to_string(c) == s) return c;
  }
  throw Error("unknown token class '" + std::string(s) + "'");
}

constexpr std::size_t index_of(TokenClass c) { return static_cast<std::size_t>(c); }

struct ValueVector {
  double accuracy = 0.0;
  double safety = 0.0;
  double format = 0.0;
  double user = 0.0;

  bool operator==(const ValueVector&) const = default;
};

struct CostVector {
  double compute = 0.0;
  std::int64_t memory = 0;  // integer footprint so the knapsack benchmark is exact
  double latency = 0.0;
  double monetary = 0.0;

  bool operator==(const CostVector&) const = default;
};

struct ObjectiveWeights {
  double alpha_acc = 1.0;
  double alpha_safety = 1.0;
  double alpha_format = 1.0;
  double alpha_user = 1.0;
  double lambda_lat = 0.0;
  double lambda_mem = 0.0;
  double lambda_comp = 0.0;
  double lambda_exchange = 1.0;

  bool operator==(const ObjectiveWeights&) const = default;
};

struct Budgets {
  double memory = kUnconstrained;
  double latency = kUnconstrained;
  double hardware = kUnconstrained;
  double tau = kUnconstrained;
  double tail_latency = kUnconstrained;
  double tail_probability = 1.0;

  bool operator==(const Budgets&) const = default;
};

// Observable features of a token: what a serving system can see without
// knowing the token's economic value.
struct TokenFeatures {
  std::uint32_t request_id = 0;
  std::uint32_t position = 0;  // index within the owning request
  double attention_mass = 0.0;

  bool operator==(const TokenFeatures&) const = default;
};

struct TokenUnit {
  UnitId id = 0;
  TokenClass token_class = TokenClass::kInput;
  ValueVector value;
  CostVector cost;
  std::uint64_t arrival_step = 0;
  std::optional<std::uint32_t> block_id;
  TokenFeatures features;

  bool operator==(const TokenUnit&) const = default;
};

inline bool is_finite(const ValueVector& v) {
  return std::isfinite(v.accuracy) && std::isfinite(v.safety) && std::isfinite(v.format) &&
         std::isfinite(v.user);
}

inline bool is_valid(const CostVector& c) {
  return c.compute >= 0.0 && c.memory >= 0 && c.latency >= 0.0 && c.monetary >= 0.0;
}

// Weighted sum of the value components (the utility half of the aggregation rule).
inline double weighted_value(const ValueVector& v, const ObjectiveWeights& w) {
  return w.alpha_acc * v.accuracy + w.alpha_safety * v.safety + w.alpha_format * v.format +
         w.alpha_user * v.user;
}

// Latency, memory and compute costs weighted by their lambdas. Monetary cost
// carries no weight in the aggregation rule and is reported only.
inline double scalarized_cost(const CostVector& c, const ObjectiveWeights& w) {
  return w.lambda_lat * c.latency + w.lambda_mem * static_cast<double>(c.memory) +
         w.lambda_comp * c.compute;
}

// Cost of a unit in utility terms: lambda_exchange converts resource cost.
inline double exchange_cost(const CostVector& c, const ObjectiveWeights& w) {
  return w.lambda_exchange * scalarized_cost(c, w);
}

// Throws unless ids are unique and all costs are non-negative.
inline void check_units(const std::vector<TokenUnit>& units) {
  std::vector<bool> seen;
  for (const TokenUnit& u : units) {
    if (!is_valid(u.cost)) throw Error("unit " + std::to_string(u.id) + ": negative cost");
    if (!is_finite(u.value)) throw Error("unit " + std::to_string(u.id) + ": non-finite value");
    if (u.id >= seen.size()) seen.resize(static_cast<std::size_t>(u.id) + 1, false);
    if (seen[u.id]) throw Error("duplicate unit id " + std::to_string(u.id));
    seen[u.id] = true;
  }
}

// Rounds a real-valued memory footprint to a multiple of `grid` and returns
// the number of grid cells.
inline std::int64_t quantize_memory(double footprint, double grid = 1.0) {
  if (!(grid > 0.0)) throw Error("memory grid must be positive");
  if (footprint < 0.0 || !std::isfinite(footprint)) throw Error("memory footprint must be >= 0");
  return static_cast<std::int64_t>(std::llround(footprint / grid));
}

}  // namespace tokenecon

#endif  // TOKENECON_CORE_HPP_
