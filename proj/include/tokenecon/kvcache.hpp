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

#ifndef TOKENECON_KVCACHE_HPP_
#define TOKENECON_KVCACHE_HPP_

// Paged KV cache with per-block shadow prices
//
//   lambda_b = sum_{i in b} vhat_i / size(b) - mu * pressure_b
//
// and baseline eviction orders. Pressure is occupancy / capacity, uniform
// across blocks, plus an optional per-block contention flag.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tokenecon/core.hpp"
#include "tokenecon/rng.hpp"

namespace tokenecon {

using BlockId = std::uint32_t;
using TokenKey = std::uint64_t;  // cache-wide token key, e.g. (request << 32) | position

// Ordering sentinel for empty blocks: below every finite shadow price.
inline constexpr double kEmptyBlockPrice = -std::numeric_limits<double>::infinity();

struct KvBlock {
  BlockId block_id = 0;
  std::vector<TokenKey> token_ids;
  std::int64_t size = 0;  // memory units
  std::uint64_t last_access_step = 0;
  double attention_mass = 0.0;
  double value_sum = 0.0;  // sum of vhat over tokens, maintained with the block
  std::uint32_t owner = 0;
  bool contended = false;
  bool pinned = false;  // still being written; evicted only after every unpinned block

  bool operator==(const KvBlock&) const = default;
};

// Packs tokens in arrival order into blocks of at most block_size tokens.
inline std::vector<KvBlock> assign_tokens_to_blocks(std::span<const TokenKey> tokens, std::size_t block_size,
                                                    BlockId first_id = 0) {
  if (block_size < 1) throw Error("assign_tokens_to_blocks: block size must be >= 1");
  std::vector<KvBlock> out;
  for (std::size_t i = 0; i < tokens.size(); i += block_size) {
    KvBlock b;
    b.block_id = first_id + static_cast<BlockId>(out.size());
    const std::size_t end = std::min(tokens.size(), i + block_size);
    b.token_ids.assign(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                       tokens.begin() + static_cast<std::ptrdiff_t>(end));
    b.size = static_cast<std::int64_t>(end - i);
    out.push_back(std::move(b));
  }
  return out;
}

template <class Estimates>
double block_shadow_price(const KvBlock& block, const Estimates& estimates, double mu, double pressure) {
  if (block.token_ids.empty()) return kEmptyBlockPrice;
  if (block.size <= 0) throw Error("block_shadow_price: non-empty block with size 0");
  double s = 0.0;
  for (TokenKey t : block.token_ids) {
    auto it = estimates.find(t);
    if (it == estimates.end()) {
      throw Error("block_shadow_price: missing estimate for token " + std::to_string(t) + " in block " +
                  std::to_string(block.block_id));
    }
    s += it->second;
  }
  return s / static_cast<double>(block.size) - mu * pressure;
}

enum class EvictionPolicy : std::uint8_t { kValueAware, kLru, kHeavyHitter, kUniformRandom };

constexpr std::string_view to_string(EvictionPolicy p) {
  switch (p) {
    case EvictionPolicy::kValueAware: return "value_aware";
    case EvictionPolicy::kLru: return "lru";
    case EvictionPolicy::kHeavyHitter: return "heavy_hitter";
    case EvictionPolicy::kUniformRandom: return "uniform_random";
  }
  return "unknown";
}

inline EvictionPolicy eviction_policy_from_string(std::string_view s) {
  for (EvictionPolicy p : {EvictionPolicy::kValueAware, EvictionPolicy::kLru, EvictionPolicy::kHeavyHitter,
                           EvictionPolicy::kUniformRandom}) {
    if (to_string(p) == s) return p;
  }
  throw Error("unknown eviction policy '" + std::string(s) + "'");
}

enum class CacheEventKind : std::uint8_t { kTokenAppended, kAccess, kEstimateRevised };

constexpr std::string_view to_string(CacheEventKind k) {
  switch (k) {
    case CacheEventKind::kTokenAppended: return "token_appended";
    case CacheEventKind::kAccess: return "access";
    case CacheEventKind::kEstimateRevised: return "estimate_revised";
  }
  return "unknown";
}

struct CacheEvent {
  CacheEventKind kind = CacheEventKind::kAccess;
  // token_appended: target block, or none to open a new tail block.
  std::optional<BlockId> block;
  TokenKey token = 0;
  double estimate = 0.0;  // token_appended, estimate_revised
  std::int64_t memory = 1;
  double attention = 0.0;
  std::uint64_t step = 0;
  std::uint32_t owner = 0;
};

struct CacheTraceRow {
  std::uint64_t step = 0;
  std::string event;  // event kind, or "evict"
  BlockId block = 0;
  double lambda_after = 0.0;
  std::int64_t occupancy = 0;
};

class CacheState {
 public:
  CacheState(std::int64_t capacity, double mu, double gamma) : capacity_(capacity), mu_(mu), gamma_(gamma) {
    if (capacity < 0) throw Error("cache.capacity: must be >= 0");
    if (!(mu >= 0.0)) throw Error("cache.mu: must be >= 0");
    if (!(gamma >= 0.0)) throw Error("cache.gamma: must be >= 0");
  }

  std::int64_t capacity() const { return capacity_; }
  std::int64_t occupancy() const { return occupancy_; }
  double mu() const { return mu_; }
  double gamma() const { return gamma_; }
  std::uint64_t metadata_units() const { return metadata_units_; }
  const std::map<BlockId, KvBlock>& blocks() const { return blocks_; }
  const std::unordered_map<TokenKey, double>& estimates() const { return estimates_; }
  bool contains(BlockId b) const { return blocks_.count(b) != 0; }
  const KvBlock& block(BlockId b) const {
    auto it = blocks_.find(b);
    if (it == blocks_.end()) throw Error("cache: unknown block " + std::to_string(b));
    return it->second;
  }

  // Uniform scarcity term; the single place to change the pressure model.
  double pressure(const KvBlock& b) const {
    const double base = capacity_ > 0 ? static_cast<double>(occupancy_) / static_cast<double>(capacity_) : 1.0;
    return base + (b.contended ? 1.0 : 0.0);
  }

  // Shadow price from the maintained per-block value sum.
  double lambda(BlockId id) const {
    const KvBlock& b = block(id);
    if (b.token_ids.empty()) return kEmptyBlockPrice;
    return b.value_sum / static_cast<double>(b.size) - mu_ * pressure(b);
  }

  std::map<BlockId, double> lambda_map() const {
    std::map<BlockId, double> out;
    for (const auto& [id, b] : blocks_) out[id] = lambda(id);
    return out;
  }

  // Shadow prices recomputed from the token estimate table.
  std::map<BlockId, double> recompute_lambda_map() const {
    std::map<BlockId, double> out;
    for (const auto& [id, b] : blocks_) out[id] = block_shadow_price(b, estimates_, mu_, pressure(b));
    return out;
  }

  void set_contended(BlockId id, bool flag) { mutable_block(id).contended = flag; }
  void set_pinned(BlockId id, bool flag) { mutable_block(id).pinned = flag; }

  // Applies one event; charges one metadata unit. Returns the touched block.
  BlockId incremental_update(const CacheEvent& e) {
    BlockId id = 0;
    switch (e.kind) {
      case CacheEventKind::kTokenAppended: {
        if (e.memory < 0) throw Error("cache: negative token memory");
        if (occupancy_ + e.memory > capacity_) throw Error("cache: append exceeds capacity; evict first");
        if (e.block) {
          if (evicted_.count(*e.block)) throw Error("cache: event on evicted block " + std::to_string(*e.block));
          id = *e.block;
        } else {
          id = next_block_++;
          KvBlock b;
          b.block_id = id;
          b.owner = e.owner;
          b.last_access_step = e.step;
          blocks_[id] = b;
        }
        KvBlock& b = mutable_block(id);
        b.token_ids.push_back(e.token);
        b.size += e.memory;
        b.attention_mass += e.attention;
        b.last_access_step = std::max(b.last_access_step, e.step);
        estimates_[e.token] = e.estimate;
        token_block_[e.token] = id;
        occupancy_ += e.memory;
        refresh(b);
        break;
      }
      case CacheEventKind::kAccess: {
        if (!e.block) throw Error("cache: access event needs a block");
        id = *e.block;
        if (evicted_.count(id)) throw Error("cache: event on evicted block " + std::to_string(id));
        KvBlock& b = mutable_block(id);
        b.last_access_step = std::max(b.last_access_step, e.step);
        break;
      }
      case CacheEventKind::kEstimateRevised: {
        auto it = token_block_.find(e.token);
        if (it == token_block_.end()) throw Error("cache: revision of token not in cache");
        id = it->second;
        estimates_[e.token] = e.estimate;
        refresh(mutable_block(id));
        break;
      }
    }
    ++metadata_units_;
    log(e.step, std::string(to_string(e.kind)), id);
    return id;
  }

  // Evicts blocks until occupancy + needed <= capacity. Returns evicted ids in
  // eviction order. Pinned blocks go last whatever the policy.
  std::vector<BlockId> evict(std::int64_t needed, EvictionPolicy policy, RngStream& stream,
                             std::uint64_t step = 0) {
    if (needed > capacity_) {
      throw Error("evict: need " + std::to_string(needed) + " exceeds capacity " + std::to_string(capacity_));
    }
    std::vector<BlockId> out;
    if (occupancy_ + needed <= capacity_) return out;
    std::vector<BlockId> order;
    order.reserve(blocks_.size());
    for (const auto& [id, b] : blocks_) order.push_back(id);
    if (policy == EvictionPolicy::kUniformRandom) {
      stream.shuffle(order);
    } else {
      std::map<BlockId, double> key;
      for (BlockId id : order) {
        const KvBlock& b = blocks_.at(id);
        double k = 0.0;
        if (b.token_ids.empty()) {
          k = kEmptyBlockPrice;
        } else if (policy == EvictionPolicy::kValueAware) {
          k = lambda(id);
        } else if (policy == EvictionPolicy::kLru) {
          k = static_cast<double>(b.last_access_step);
        } else {
          k = b.attention_mass;
        }
        key[id] = k;
      }
      std::stable_sort(order.begin(), order.end(), [&](BlockId a, BlockId b) { return key[a] < key[b]; });
    }
    std::stable_partition(order.begin(), order.end(), [&](BlockId id) { return !blocks_.at(id).pinned; });
    for (BlockId id : order) {
      if (occupancy_ + needed <= capacity_) break;
      const double lam = lambda(id);
      remove_block(id);
      evicted_.insert(id);
      out.push_back(id);
      if (trace_) trace_->push_back({step, "evict", id, lam, occupancy_});
    }
    return out;
  }

  // Drops a block without counting it as an eviction (request completion).
  void release(BlockId id) { remove_block(id); }

  bool was_evicted(BlockId id) const { return evicted_.count(id) != 0; }

  void enable_trace(std::vector<CacheTraceRow>* sink) { trace_ = sink; }

 private:
  KvBlock& mutable_block(BlockId id) {
    auto it = blocks_.find(id);
    if (it == blocks_.end()) {
      if (evicted_.count(id)) throw Error("cache: event on evicted block " + std::to_string(id));
      throw Error("cache: unknown block " + std::to_string(id));
    }
    return it->second;
  }

  // Recomputes only the touched block's value sum, in token order.
  void refresh(KvBlock& b) {
    double s = 0.0;
    for (TokenKey t : b.token_ids) s += estimates_.at(t);
    b.value_sum = s;
  }

  void remove_block(BlockId id) {
    auto it = blocks_.find(id);
    if (it == blocks_.end()) throw Error("cache: unknown block " + std::to_string(id));
    for (TokenKey t : it->second.token_ids) {
      estimates_.erase(t);
      token_block_.erase(t);
    }
    occupancy_ -= it->second.size;
    blocks_.erase(it);
  }

  void log(std::uint64_t step, std::string kind, BlockId id) {
    if (trace_) trace_->push_back({step, std::move(kind), id, lambda(id), occupancy_});
  }

  std::int64_t capacity_;
  double mu_;
  double gamma_;
  std::int64_t occupancy_ = 0;
  std::uint64_t metadata_units_ = 0;
  BlockId next_block_ = 0;
  std::map<BlockId, KvBlock> blocks_;
  std::unordered_map<TokenKey, double> estimates_;
  std::unordered_map<TokenKey, BlockId> token_block_;
  std::unordered_set<BlockId> evicted_;
  std::vector<CacheTraceRow>* trace_ = nullptr;
};

struct OverheadCheck {
  double ratio = 0.0;
  bool pass = true;
};

// metadata / base, passing strictly below gamma.
inline OverheadCheck metadata_overhead(double metadata_cost, double base_cost, double gamma) {
  if (!(base_cost > 0.0)) throw Error("metadata_overhead: base cost must be > 0");
  OverheadCheck out;
  out.ratio = metadata_cost / base_cost;
  out.pass = out.ratio < gamma;
  return out;
}

}  // namespace tokenecon

#endif  // TOKENECON_KVCACHE_HPP_
