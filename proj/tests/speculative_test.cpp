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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "tokenecon/tokenecon.hpp"

namespace tokenecon {
namespace {

constexpr double kEps = 1e-12;

SpecProposal proposal(double p_acc, double v, double c_draft, double c_verify, double info = 0.0) {
  SpecProposal p;
  p.p_acc = p_acc;
  p.v = v;
  p.c_draft = c_draft;
  p.c_verify = c_verify;
  p.info_value = info;
  return p;
}

TEST(EnvTest, Examples) {
  EXPECT_NEAR(env(proposal(0.5, 2.0, 0.4, 0.3)), 0.3, kEps);
  EXPECT_NEAR(env(proposal(0.0, 2.0, 0.4, 0.3, 0.1)), -0.6, kEps);
  EXPECT_NEAR(env(proposal(1.0, 0.7, 0.4, 0.3)), 0.0, kEps);
}

TEST(EnvTest, RejectsInvalidProposals) {
  EXPECT_THROW(env(proposal(1.5, 1, 0, 0)), Error);
  EXPECT_THROW(env(proposal(0.5, 1, -0.1, 0)), Error);
  EXPECT_THROW(env(proposal(0.5, 1, 0, -0.1)), Error);
}

TEST(EnvTest, LinearInAcceptanceAndValueMonotoneInCosts) {
  RngStream s = derive_rng_stream(1, "env");
  for (int t = 0; t < 200; ++t) {
    const SpecProposal p = proposal(s.uniform(), s.uniform(0, 5), s.uniform(), s.uniform(), s.uniform(-1, 1));
    SpecProposal q = p;
    q.p_acc = std::min(1.0, p.p_acc + 0.1 * (1 - p.p_acc));
    const SpecProposal mid = proposal(0.5 * (p.p_acc + q.p_acc), p.v, p.c_draft, p.c_verify, p.info_value);
    EXPECT_NEAR(env(mid), 0.5 * (env(p) + env(q)), 1e-12);
    SpecProposal v2 = p;
    v2.v *= 2;
    EXPECT_NEAR(env(v2) - env(p), p.p_acc * p.v, 1e-12);
    SpecProposal dc = p;
    dc.c_draft += 0.01;
    EXPECT_LT(env(dc), env(p));
    SpecProposal vc = p;
    vc.c_verify += 0.01;
    EXPECT_LT(env(vc), env(p));
  }
}

TEST(DecideTest, Examples) {
  EXPECT_TRUE(decide_speculate(proposal(0.5, 2.0, 0.4, 0.3)));
  EXPECT_FALSE(decide_speculate(proposal(1.0, 0.7, 0.4, 0.3)));
  EXPECT_FALSE(decide_speculate(proposal(1.0, 100.0, 0.0, 0.0), kUnconstrained));
}

TEST(DecideTest, MatchesEnumeratedOptimumOnGrid) {
  const double ps[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  const double vs[] = {0.0, 0.5, 1.0, 2.0, 4.0};
  const double cs[] = {0.0, 0.1, 0.3, 0.6, 1.0};
  int cells = 0;
  for (double p : ps) {
    for (double v : vs) {
      for (double c : cs) {
        const SpecProposal prop = proposal(p, v, c, 0.2);
        // Options: skip (net 0) or speculate (accept w.p. p, full cost either way).
        const double speculate = p * (v - c - 0.2) + (1 - p) * (-c - 0.2);
        const bool best = speculate > 0.0;
        EXPECT_EQ(decide_speculate(prop), best) << p << " " << v << " " << c;
        ++cells;
      }
    }
  }
  EXPECT_EQ(cells, 125);
}

TEST(SpecRoundTest, CertainAndImpossibleAcceptance) {
  RngStream s = derive_rng_stream(2, "spec");
  SpecCostModel cost;
  cost.c_draft_per_token = 0.5;
  cost.c_verify = 1.0;
  const std::vector<double> ones(4, 1.0), zeros(4, 0.0);
  SpecOutcome o = simulate_spec_round(ones, cost, s);
  EXPECT_EQ(o.accepted, 4u);
  EXPECT_NEAR(o.realized_cost, 3.0, kEps);
  EXPECT_NEAR(o.realized_saving, 16.0, kEps);
  o = simulate_spec_round(zeros, cost, s);
  EXPECT_EQ(o.accepted, 0u);
  EXPECT_NEAR(o.net(), -3.0, kEps);
  EXPECT_THROW(simulate_spec_round(std::vector<double>{}, cost, s), Error);
  EXPECT_THROW(simulate_spec_round(std::vector<double>{1.2}, cost, s), Error);
}

TEST(SpecRoundTest, MeanAcceptedMatchesClosedForm) {
  RngStream s = derive_rng_stream(3, "spec");
  const std::vector<double> acc(4, 0.8);
  constexpr int kRounds = 100000;
  std::vector<double> xs;
  xs.reserve(kRounds);
  for (int r = 0; r < kRounds; ++r) xs.push_back(simulate_spec_round(acc, SpecCostModel{}, s).accepted);
  const MeanCi m = mean_ci(xs);
  const double expected = 0.8 + 0.64 + 0.512 + 0.4096;
  EXPECT_NEAR(expected_accepted(acc), expected, kEps);
  EXPECT_NEAR(m.mean, expected, 3 * m.sd / std::sqrt(static_cast<double>(kRounds)));
}

TEST(SpecRoundTest, LongRunNetConvergesToEnv) {
  RngStream s = derive_rng_stream(4, "spec");
  const std::vector<double> acc{0.9, 0.8, 0.7};
  SpecCostModel cost;
  cost.c_draft_per_token = 0.3;
  cost.c_verify = 0.5;
  cost.decode_saving_per_token = 1.0;
  const SpecProposal p = proposal_for(acc, cost);
  constexpr int kRounds = 100000;
  std::vector<double> xs;
  xs.reserve(kRounds);
  for (int r = 0; r < kRounds; ++r) xs.push_back(simulate_spec_round(acc, cost, s).net());
  const MeanCi m = mean_ci(xs);
  EXPECT_NEAR(m.mean, env(p), 3 * m.sd / std::sqrt(static_cast<double>(kRounds)));
}

TEST(SpecRoundTest, ProposalForAggregatesAcceptance) {
  SpecCostModel cost;
  cost.c_draft_per_token = 0.1;
  cost.c_verify = 0.2;
  const std::vector<double> acc{0.5, 0.5};
  const SpecProposal p = proposal_for(acc, cost, 0.05);
  EXPECT_EQ(p.draft_length, 2u);
  EXPECT_NEAR(p.p_acc * p.v, 0.75 * 4.0, kEps);
  EXPECT_NEAR(p.c_draft, 0.2, kEps);
  EXPECT_NEAR(env(p), 3.0 - 0.2 - 0.2 + 0.05, kEps);
}

}  // namespace
}  // namespace tokenecon
