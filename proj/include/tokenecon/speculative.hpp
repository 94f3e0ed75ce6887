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

#ifndef TOKENECON_SPECULATIVE_HPP_
#define TOKENECON_SPECULATIVE_HPP_

// Expected net value of a speculative draft,
//
//   ENV = p_acc * v - c_draft - c_verify + I,
//
// where v is the decode cost saved if the draft is accepted.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tokenecon/core.hpp"
#include "tokenecon/rng.hpp"

namespace tokenecon {

struct SpecProposal {
  std::uint32_t draft_length = 1;
  double p_acc = 0.0;
  double v = 0.0;
  double c_draft = 0.0;
  double c_verify = 0.0;
  double info_value = 0.0;

  bool operator==(const SpecProposal&) const = default;
};

inline void check_proposal(const SpecProposal& p) {
  if (!(p.p_acc >= 0.0 && p.p_acc <= 1.0)) throw Error("speculation.p_acc: out of [0,1]");
  if (!(p.c_draft >= 0.0)) throw Error("speculation.c_draft: must be >= 0");
  if (!(p.c_verify >= 0.0)) throw Error("speculation.c_verify: must be >= 0");
}

inline double env(const SpecProposal& p) {
  check_proposal(p);
  return p.p_acc * p.v - p.c_draft - p.c_verify + p.info_value;
}

// Speculate iff ENV is strictly above the threshold.
inline bool decide_speculate(const SpecProposal& p, double threshold = 0.0) { return env(p) > threshold; }

// Per-round draft costs and the saving per accepted token.
struct SpecCostModel {
  double c_draft_per_token = 0.0;
  double c_verify = 0.0;
  double decode_saving_per_token = 4.0;
};

struct SpecOutcome {
  std::uint32_t accepted = 0;
  double realized_cost = 0.0;
  double realized_saving = 0.0;

  double net() const { return realized_saving - realized_cost; }
};

// Accepted prefix = position of the first rejection under independent
// per-position draws. acceptance[j] is the probability position j survives.
inline SpecOutcome simulate_spec_round(std::span<const double> acceptance, const SpecCostModel& cost,
                                       RngStream& stream) {
  if (acceptance.empty()) throw Error("simulate_spec_round: draft_length must be >= 1");
  SpecOutcome out;
  for (double p : acceptance) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error("simulate_spec_round: acceptance probability out of [0,1]");
  }
  for (double p : acceptance) {
    if (!stream.bernoulli(p)) break;
    ++out.accepted;
  }
  out.realized_cost = cost.c_draft_per_token * static_cast<double>(acceptance.size()) + cost.c_verify;
  out.realized_saving = static_cast<double>(out.accepted) * cost.decode_saving_per_token;
  return out;
}

// E[accepted] = sum_{j=1..L} prod_{i<=j} p_i.
inline double expected_accepted(std::span<const double> acceptance) {
  double e = 0.0, run = 1.0;
  for (double p : acceptance) {
    run *= p;
    e += run;
  }
  return e;
}

// Proposal whose aggregate p_acc matches a per-position acceptance model:
// p_acc * v equals the expected saving of one round.
inline SpecProposal proposal_for(std::span<const double> acceptance, const SpecCostModel& cost,
                                 double info_value = 0.0) {
  SpecProposal p;
  p.draft_length = static_cast<std::uint32_t>(acceptance.size());
  p.v = static_cast<double>(acceptance.size()) * cost.decode_saving_per_token;
  p.p_acc = acceptance.empty() ? 0.0 : expected_accepted(acceptance) / static_cast<double>(acceptance.size());
  p.c_draft = cost.c_draft_per_token * static_cast<double>(acceptance.size());
  p.c_verify = cost.c_verify;
  p.info_value = info_value;
  return p;
}

struct SpecTraceRow {
  std::uint64_t round = 0;
  std::uint32_t draft_length = 0;
  double env = 0.0;
  bool decision = false;
  std::uint32_t accepted_length = 0;
  double realized_net = 0.0;
};

}  // namespace tokenecon

#endif  // TOKENECON_SPECULATIVE_HPP_
