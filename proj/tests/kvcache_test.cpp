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
#include <map>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "test_support.hpp"
#include "tokenecon/tokenecon.hpp"

namespace tokenecon {
namespace {

constexpr double kEps = 1e-12;

CacheEvent append(TokenKey token, double estimate, std::optional<BlockId> block = std::nullopt,
                  std::uint64_t step = 0) {
  CacheEvent e;
  e.kind = CacheEventKind::kTokenAppended;
  e.token = token;
  e.estimate = estimate;
  e.block = block;
  e.step = step;
  return e;
}

TEST(BlockPackingTest, Examples) {
  const std::vector<TokenKey> five{10, 11, 12, 13, 14};
  const auto blocks = assign_tokens_to_blocks(five, 2);
  ASSERT_EQ(blocks.size(), 3u);
  EXPECT_EQ(blocks[0].size, 2);
  EXPECT_EQ(blocks[1].size, 2);
  EXPECT_EQ(blocks[2].size, 1);
  EXPECT_EQ(blocks[2].token_ids, std::vector<TokenKey>{14});
  EXPECT_EQ(blocks[1].block_id, 1u);
  EXPECT_EQ(assign_tokens_to_blocks(five, 8).size(), 1u);
  EXPECT_TRUE(assign_tokens_to_blocks({}, 4).empty());
  EXPECT_THROW(assign_tokens_to_blocks(five, 0), Error);
}

TEST(ShadowPriceTest, Examples) {
  KvBlock b;
  b.token_ids = {1, 2};
  b.size = 2;
  std::map<TokenKey, double> est{{1, 0.5}, {2, 0.3}};
  EXPECT_NEAR(block_shadow_price(b, est, 1.0, 0.1), 0.3, kEps);
  EXPECT_NEAR(block_shadow_price(b, est, 1.0, 0.0), 0.4, kEps);
  std::map<TokenKey, double> zero{{1, 0.0}, {2, 0.0}};
  EXPECT_NEAR(block_shadow_price(b, zero, 1.0, 0.2), -0.2, kEps);
  EXPECT_EQ(block_shadow_price(KvBlock{}, est, 1.0, 0.0), kEmptyBlockPrice);
  std::map<TokenKey, double> missing{{1, 0.5}};
  EXPECT_THROW(block_shadow_price(b, missing, 1.0, 0.0), Error);
}

TEST(CacheStateTest, PressureIsOccupancyOverCapacity) {
  CacheState c(10, 1.0, 0.01);
  const BlockId b = c.incremental_update(append(1, 0.5));
  c.incremental_update(append(2, 0.3, b));
  EXPECT_NEAR(c.pressure(c.block(b)), 0.2, kEps);
  EXPECT_NEAR(c.lambda(b), 0.4 - 0.2, kEps);
  c.set_contended(b, true);
  EXPECT_NEAR(c.pressure(c.block(b)), 1.2, kEps);
}

TEST(CacheStateTest, AppendEqualDensityKeepsLambda) {
  CacheState c(8, 0.0, 0.01);
  const BlockId b = c.incremental_update(append(1, 0.4));
  EXPECT_NEAR(c.lambda(b), 0.4, kEps);
  c.incremental_update(append(2, 0.4, b));
  EXPECT_NEAR(c.lambda(b), 0.4, kEps);
  EXPECT_EQ(c.block(b).size, 2);
}

TEST(CacheStateTest, EstimateRevisionRaisesLambda) {
  CacheState c(8, 0.0, 0.01);
  const BlockId b = c.incremental_update(append(1, 0.5));
  c.incremental_update(append(2, 0.1, b));
  const double before = c.lambda(b);
  CacheEvent rev;
  rev.kind = CacheEventKind::kEstimateRevised;
  rev.token = 1;
  rev.estimate = 0.9;
  c.incremental_update(rev);
  EXPECT_NEAR(c.lambda(b) - before, 0.2, kEps);
  EXPECT_EQ(c.metadata_units(), 3u);
}

CacheState three_blocks(const std::vector<double>& values, const std::vector<std::uint64_t>& steps) {
  CacheState c(static_cast<std::int64_t>(values.size()), 0.0, 0.01);
  for (std::size_t i = 0; i < values.size(); ++i) {
    c.incremental_update(append(i, values[i], std::nullopt, steps[i]));
  }
  return c;
}

TEST(EvictionTest, ValueAwareEvictsLowestLambda) {
  CacheState c = three_blocks({0.3, -0.2, 0.7}, {0, 1, 2});
  RngStream s = derive_rng_stream(1, "evict");
  EXPECT_EQ(c.evict(1, EvictionPolicy::kValueAware, s), std::vector<BlockId>{1});
  EXPECT_TRUE(c.was_evicted(1));
  EXPECT_EQ(c.occupancy(), 2);
}

TEST(EvictionTest, LruEvictsOldestAccess) {
  CacheState c = three_blocks({1.0, 1.0}, {5, 2});
  RngStream s = derive_rng_stream(1, "evict");
  EXPECT_EQ(c.evict(1, EvictionPolicy::kLru, s), std::vector<BlockId>{1});
}

TEST(EvictionTest, AccessRefreshesRecency) {
  CacheState c = three_blocks({1.0, 1.0}, {1, 2});
  CacheEvent acc;
  acc.kind = CacheEventKind::kAccess;
  acc.block = 0;
  acc.step = 9;
  c.incremental_update(acc);
  RngStream s = derive_rng_stream(1, "evict");
  EXPECT_EQ(c.evict(1, EvictionPolicy::kLru, s), std::vector<BlockId>{1});
}

TEST(EvictionTest, HeavyHitterEvictsLowestAttention) {
  CacheState c(3, 0.0, 0.01);
  for (TokenKey t = 0; t < 3; ++t) {
    CacheEvent e = append(t, 1.0);
    e.attention = t == 1 ? 0.9 : t == 2 ? 0.1 : 0.5;
    c.incremental_update(e);
  }
  RngStream s = derive_rng_stream(1, "evict");
  EXPECT_EQ(c.evict(2, EvictionPolicy::kHeavyHitter, s), (std::vector<BlockId>{2, 0}));
}

TEST(EvictionTest, TiesBreakByLowestId) {
  CacheState c = three_blocks({0.5, 0.5, 0.5}, {3, 3, 3});
  RngStream s = derive_rng_stream(1, "evict");
  EXPECT_EQ(c.evict(1, EvictionPolicy::kValueAware, s), std::vector<BlockId>{0});
  EXPECT_EQ(c.evict(2, EvictionPolicy::kLru, s), std::vector<BlockId>{1});
}

TEST(EvictionTest, NothingNeededAndOverCapacity) {
  CacheState c = three_blocks({0.1, 0.2, 0.3}, {0, 1, 2});
  RngStream s = derive_rng_stream(1, "evict");
  EXPECT_TRUE(c.evict(0, EvictionPolicy::kValueAware, s).empty());
  EXPECT_THROW(c.evict(4, EvictionPolicy::kValueAware, s), Error);
}

TEST(EvictionTest, UniformRandomIsSeeded) {
  auto run = [](std::uint64_t seed) {
    CacheState c(20, 0.0, 0.01);
    for (TokenKey t = 0; t < 20; ++t) c.incremental_update(append(t, 1.0));
    RngStream s = derive_rng_stream(seed, "evict");
    return c.evict(5, EvictionPolicy::kUniformRandom, s);
  };
  EXPECT_EQ(run(4), run(4));
  EXPECT_EQ(run(4).size(), 5u);
}

TEST(EvictionTest, EventsOnEvictedBlocksRejected) {
  CacheState c = three_blocks({0.1, 0.2, 0.3}, {0, 1, 2});
  RngStream s = derive_rng_stream(1, "evict");
  c.evict(1, EvictionPolicy::kValueAware, s);
  EXPECT_THROW(c.incremental_update(append(9, 1.0, BlockId{0})), Error);
  CacheEvent acc;
  acc.kind = CacheEventKind::kAccess;
  acc.block = 0;
  EXPECT_THROW(c.incremental_update(acc), Error);
  c.incremental_update(append(9, 1.0));
  EXPECT_THROW(c.incremental_update(append(10, 1.0)), Error);  // full
}

TEST(CacheTraceTest, RowsCarryLambdaAndOccupancy) {
  std::vector<CacheTraceRow> rows;
  CacheState c(2, 0.0, 0.01);
  c.enable_trace(&rows);
  c.incremental_update(append(1, 0.6, std::nullopt, 0));
  c.incremental_update(append(2, 0.2, std::nullopt, 1));
  RngStream s = derive_rng_stream(1, "evict");
  c.evict(1, EvictionPolicy::kValueAware, s, 2);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].event, "token_appended");
  EXPECT_NEAR(rows[0].lambda_after, 0.6, kEps);
  EXPECT_EQ(rows[2].event, "evict");
  EXPECT_EQ(rows[2].block, 1u);
  EXPECT_EQ(rows[2].occupancy, 1);
  EXPECT_EQ(rows[2].step, 2u);
}

TEST(MetadataOverheadTest, Examples) {
  OverheadCheck a = metadata_overhead(1, 200, 0.01);
  EXPECT_NEAR(a.ratio, 0.005, kEps);
  EXPECT_TRUE(a.pass);
  a = metadata_overhead(5, 200, 0.01);
  EXPECT_NEAR(a.ratio, 0.025, kEps);
  EXPECT_FALSE(a.pass);
  EXPECT_TRUE(metadata_overhead(0, 200, 0.01).pass);
  EXPECT_THROW(metadata_overhead(1, 0, 0.01), Error);
}

// Random operation sequence; checks capacity after every call and returns the
// number of events applied.
std::uint64_t random_sequence(CacheState& c, std::size_t events, RngStream& s, bool check_each) {
  std::vector<TokenKey> live;
  TokenKey next = 0;
  std::optional<BlockId> tail;
  std::uint64_t applied = 0;
  for (std::size_t step = 0; step < events; ++step) {
    const double r = s.uniform();
    if (r < 0.5 || c.blocks().empty()) {
      const std::int64_t mem = 1 + static_cast<std::int64_t>(s.below(2));
      if (c.occupancy() + mem > c.capacity()) {
        const auto policy = static_cast<EvictionPolicy>(s.below(4));
        c.evict(mem, policy, s, step);
      }
      CacheEvent e = append(next, s.uniform(-1.0, 2.0), std::nullopt, step);
      e.memory = mem;
      e.attention = s.uniform();
      if (tail && c.contains(*tail) && c.block(*tail).token_ids.size() < 4 && s.bernoulli(0.7)) e.block = tail;
      tail = c.incremental_update(e);
      ++applied;
      live.push_back(next++);
    } else if (r < 0.7) {
      auto it = c.blocks().begin();
      std::advance(it, static_cast<std::ptrdiff_t>(s.below(c.blocks().size())));
      CacheEvent e;
      e.kind = CacheEventKind::kAccess;
      e.block = it->first;
      e.step = step;
      c.incremental_update(e);
      ++applied;
    } else if (r < 0.95) {
      const auto& est = c.estimates();
      auto it = est.begin();
      std::advance(it, static_cast<std::ptrdiff_t>(s.below(est.size())));
      CacheEvent e;
      e.kind = CacheEventKind::kEstimateRevised;
      e.token = it->first;
      e.estimate = s.uniform(-1.0, 2.0);
      e.step = step;
      c.incremental_update(e);
      ++applied;
    } else if (s.bernoulli(0.5)) {
      c.set_contended(c.blocks().begin()->first, s.bernoulli(0.5));
    } else {
      c.release(c.blocks().begin()->first);
    }
    if (check_each) {
      std::int64_t sum = 0;
      for (const auto& [id, b] : c.blocks()) sum += b.size;
      EXPECT_EQ(sum, c.occupancy());
      EXPECT_LE(c.occupancy(), c.capacity());
    }
  }
  return applied;
}

TEST(CachePropertyTest, OccupancyBoundedAndMetadataCounted) {
  RngStream s = derive_rng_stream(2, "cache-prop");
  CacheState c(40, 1.0, 0.01);
  const std::uint64_t applied = random_sequence(c, 10000, s, true);
  EXPECT_EQ(c.metadata_units(), applied);
}

TEST(CachePropertyTest, IncrementalLambdaEqualsRecompute) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RngStream s = derive_rng_stream(seed, "cache-prop");
    CacheState c(64, 0.7, 0.01);
    for (int round = 0; round < 10; ++round) {
      random_sequence(c, 1000, s, false);
      const auto inc = c.lambda_map();
      const auto full = c.recompute_lambda_map();
      ASSERT_EQ(inc.size(), full.size());
      for (const auto& [id, lam] : inc) EXPECT_NEAR(lam, full.at(id), kEps) << id;
    }
  }
}

std::vector<TokenUnit> request_tokens(ValueDist dist, double cv, std::uint64_t seed) {
  WorkloadParams p;
  p.value_dist = dist;
  p.value_cv = cv;
  p.horizon = 400;
  RngStream s = derive_rng_stream(seed, "workload");
  return prompt_stream(generate_workload(p, p.horizon, s), 64);
}

TEST(CachePropertyTest, ValueAwareDominatesLruOnPlanted) {
  std::vector<double> diffs;
  ObjectiveWeights w;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto tokens = request_tokens(ValueDist::kPlantedEarlyInstruction, 1.0, seed);
    const double va = testing::replay_retained_utility(tokens, w, 4, 16, EvictionPolicy::kValueAware, seed);
    const double lru = testing::replay_retained_utility(tokens, w, 4, 16, EvictionPolicy::kLru, seed);
    diffs.push_back(va - lru);
  }
  const MeanCi m = mean_ci(diffs);
  EXPECT_GT(m.mean - m.ci95, 0.0);
}

TEST(CachePropertyTest, TiedOnUniformValues) {
  std::vector<double> diffs;
  ObjectiveWeights w;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto tokens = request_tokens(ValueDist::kUniform, 0.0, seed);
    const double va = testing::replay_retained_utility(tokens, w, 4, 16, EvictionPolicy::kValueAware, seed);
    const double lru = testing::replay_retained_utility(tokens, w, 4, 16, EvictionPolicy::kLru, seed);
    diffs.push_back(va - lru);
  }
  const MeanCi m = mean_ci(diffs);
  EXPECT_LE(std::abs(m.mean), 2.0 * m.sd / std::sqrt(100.0) + 1e-12);
}

}  // namespace
}  // namespace tokenecon
