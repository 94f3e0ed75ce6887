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

#ifndef TOKENECON_WORKLOAD_HPP_
#define TOKENECON_WORKLOAD_HPP_

// Synthetic request streams with controlled value heterogeneity.
//
// Token classes: the instruction head of a planted request is `input`, the
// remaining prompt is `retrieval` filler, decoded tokens are `output`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tokenecon/core.hpp"
#include "tokenecon/rng.hpp"

namespace tokenecon {

enum class ValueDist : std::uint8_t { kUniform, kLognormal, kPlantedEarlyInstruction };

constexpr std::string_view to_string(ValueDist d) {
  switch (d) {
    case ValueDist::kUniform: return "uniform";
    case ValueDist::kLognormal: return "lognormal";
    case ValueDist::kPlantedEarlyInstruction: return "planted_early_instruction";
  }
  return "unknown";
}

inline ValueDist value_dist_from_string(std::string_view s) {
  for (ValueDist d : {ValueDist::kUniform, ValueDist::kLognormal, ValueDist::kPlantedEarlyInstruction}) {
    if (to_string(d) == s) return d;
  }
  throw Error("unknown value distribution '" + std::string(s) + "'");
}

struct LengthRange {
  std::uint32_t min = 1;
  std::uint32_t max = 1;

  bool operator==(const LengthRange&) const = default;
};

struct WorkloadParams {
  double rate = 0.25;  // requests per step
  LengthRange prompt{16, 48};
  LengthRange output{16, 48};
  double value_cv = 1.0;
  ValueDist value_dist = ValueDist::kLognormal;
  double attention_bias = 0.5;  // weight of recency in the attention surrogate
  double pressure = 1.0;
  std::uint64_t horizon = 200;  // arrival window in steps
  double mean_value = 1.0;
  double prefill_per_token = 1.0;
  double decode_per_token = 4.0;

  bool operator==(const WorkloadParams&) const = default;
};

inline std::vector<std::string> check_workload(const WorkloadParams& p) {
  std::vector<std::string> errs;
  if (!(p.rate > 0.0) || !std::isfinite(p.rate)) errs.push_back("workload.rate: must be > 0");
  if (!(p.value_cv >= 0.0) || !std::isfinite(p.value_cv)) errs.push_back("workload.value_cv: must be >= 0");
  if (p.value_dist == ValueDist::kUniform && p.value_cv > 0.0) {
    errs.push_back("workload.value_cv: uniform values cannot reach a positive CV; use lognormal");
  }
  if (!(p.attention_bias >= 0.0 && p.attention_bias <= 1.0)) {
    errs.push_back("workload.attention_bias: out of [0,1]");
  }
  if (!(p.pressure >= 0.0 && p.pressure <= 2.0)) errs.push_back("workload.pressure: out of [0,2]");
  if (p.horizon < 1) errs.push_back("workload.horizon: must be >= 1");
  if (p.prompt.min < 1 || p.prompt.max < p.prompt.min) {
    errs.push_back("workload.tokens_per_request.prompt: need 1 <= min <= max");
  }
  if (p.output.min < 1 || p.output.max < p.output.min) {
    errs.push_back("workload.tokens_per_request.output: need 1 <= min <= max");
  }
  if (!(p.prefill_per_token >= 0.0)) errs.push_back("costs.prefill_per_token: must be >= 0");
  if (!(p.decode_per_token >= 0.0)) errs.push_back("costs.decode_per_token: must be >= 0");
  return errs;
}

struct Request {
  std::uint32_t id = 0;
  std::uint64_t arrival_step = 0;
  std::vector<TokenUnit> prompt;  // classes input/retrieval
  std::vector<TokenUnit> output;  // class output, arrival_step filled in when decoded
};

// Value of each token under unit objective weights.
inline double token_value(const TokenUnit& u) {
  return u.value.accuracy + u.value.safety + u.value.format + u.value.user;
}

// Number of instruction tokens at the head of a planted prompt.
inline std::size_t instruction_length(std::size_t prompt_len) { return std::max<std::size_t>(1, prompt_len / 8); }

namespace detail {

inline double draw_value(const WorkloadParams& p, RngStream& s) {
  if (p.value_cv == 0.0 || p.value_dist == ValueDist::kUniform) return p.mean_value;
  const double sigma2 = std::log1p(p.value_cv * p.value_cv);
  const double mu = std::log(p.mean_value) - 0.5 * sigma2;
  return std::exp(mu + std::sqrt(sigma2) * s.normal());
}

inline std::uint32_t draw_length(const LengthRange& r, RngStream& s) {
  return r.min + static_cast<std::uint32_t>(s.below(static_cast<std::uint64_t>(r.max - r.min) + 1));
}

}  // namespace detail

// Draws every request arriving in [0, horizon). Values and sizes use separate
// labeled streams derived from `stream`'s seed so changing one family of
// parameters leaves the other draws untouched.
inline std::vector<Request> generate_workload(const WorkloadParams& p, std::uint64_t horizon, RngStream& stream) {
  const auto errs = check_workload(p);
  if (!errs.empty()) throw Error(errs.front());
  if (horizon < 1) throw Error("generate_workload: horizon must be >= 1");
  const std::uint64_t base = stream.next_u64();
  RngStream arrivals = derive_rng_stream(base, "arrivals");
  RngStream sizes = derive_rng_stream(base, "sizes");
  RngStream values = derive_rng_stream(base, "values");
  RngStream noise = derive_rng_stream(base, "attention");

  std::vector<Request> out;
  for (std::uint64_t t = 0; t < horizon; ++t) {
    const std::uint64_t k = arrivals.poisson(p.rate);
    for (std::uint64_t j = 0; j < k; ++j) {
      Request r;
      r.id = static_cast<std::uint32_t>(out.size());
      r.arrival_step = t;
      const std::uint32_t plen = detail::draw_length(p.prompt, sizes);
      const std::uint32_t olen = detail::draw_length(p.output, sizes);
      const std::size_t total = static_cast<std::size_t>(plen) + olen;
      std::vector<double> v(total);
      std::vector<bool> instruction(total, false);
      if (p.value_dist == ValueDist::kPlantedEarlyInstruction) {
        const std::size_t heads = instruction_length(plen);
        const double v_hi = 20.0 * p.mean_value;
        for (std::size_t i = 0; i < total; ++i) {
          if (i < heads) {
            v[i] = v_hi * (1.0 - 0.01 * static_cast<double>(i));
            instruction[i] = true;
          } else {
            v[i] = std::min(detail::draw_value(p, values), 0.5 * v_hi);
          }
        }
      } else {
        for (std::size_t i = 0; i < total; ++i) v[i] = detail::draw_value(p, values);
      }
      double vmax = 0.0;
      for (std::size_t i = 0; i < total; ++i) {
        if (!instruction[i]) vmax = std::max(vmax, v[i]);
      }
      const double beta = p.attention_bias;
      for (std::size_t i = 0; i < total; ++i) {
        TokenUnit u;
        u.id = static_cast<UnitId>(i);
        const bool is_prompt = i < plen;
        u.token_class = instruction[i] ? TokenClass::kInput
                        : is_prompt    ? (p.value_dist == ValueDist::kPlantedEarlyInstruction
                                              ? TokenClass::kRetrieval
                                              : TokenClass::kInput)
                                       : TokenClass::kOutput;
        if (instruction[i]) {
          u.value.accuracy = 0.5 * v[i];
          u.value.safety = 0.5 * v[i];
        } else {
          u.value.accuracy = v[i];
        }
        const double per = is_prompt ? p.prefill_per_token : p.decode_per_token;
        u.cost.compute = per;
        u.cost.latency = per;
        u.cost.memory = 1;
        u.arrival_step = t;
        u.features.request_id = r.id;
        u.features.position = static_cast<std::uint32_t>(i);
        // Surrogate attention: local coherence favors recent positions and
        // instruction heads carry none of the value signal.
        const double recent = static_cast<double>(i + 1) / static_cast<double>(total);
        const double signal = instruction[i] || vmax <= 0.0 ? 0.0 : v[i] / vmax;
        u.features.attention_mass = ((1.0 - beta) * signal + beta * recent) * std::exp(0.1 * noise.normal());
        (is_prompt ? r.prompt : r.output).push_back(u);
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

// Expected tokens resident in the cache at steady state: arrival rate times
// request duration (one output token per step) times mean footprint.
inline double expected_resident_tokens(const WorkloadParams& p) {
  const double pm = 0.5 * (p.prompt.min + p.prompt.max);
  const double om = 0.5 * (p.output.min + p.output.max);
  return p.rate * om * (pm + 0.5 * om);
}

// Expected generation cost per step from the workload's own requests.
inline double expected_generation_load(const WorkloadParams& p) {
  const double pm = 0.5 * (p.prompt.min + p.prompt.max);
  const double om = 0.5 * (p.output.min + p.output.max);
  return p.rate * (p.prefill_per_token * pm + p.decode_per_token * om);
}

// Flattened prompt stream: tokens of successive requests in arrival order
// with ids renumbered 0..n-1 and arrival_step set to the stream position.
inline std::vector<TokenUnit> prompt_stream(const std::vector<Request>& reqs, std::size_t limit) {
  std::vector<TokenUnit> out;
  for (const Request& r : reqs) {
    for (const TokenUnit& u : r.prompt) {
      if (out.size() >= limit) return out;
      TokenUnit t = u;
      t.id = static_cast<UnitId>(out.size());
      t.arrival_step = out.size();
      out.push_back(t);
    }
  }
  return out;
}

}  // namespace tokenecon

#endif  // TOKENECON_WORKLOAD_HPP_
