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

#ifndef TOKENECON_UTILITY_HPP_
#define TOKENECON_UTILITY_HPP_

// Coalition utilities F(S) over a ground set {0, ..., n-1}. Every kind is
// normalized (F of the empty set is 0) and pure.

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tokenecon/core.hpp"

namespace tokenecon {

enum class UtilityKind : std::uint8_t { kAdditive, kPlantedSubset, kPairwiseInteraction, kCoverage };

constexpr std::string_view to_string(UtilityKind k) {
  switch (k) {
    case UtilityKind::kAdditive: return "additive";
    case UtilityKind::kPlantedSubset: return "planted_subset";
    case UtilityKind::kPairwiseInteraction: return "pairwise_interaction";
    case UtilityKind::kCoverage: return "coverage";
  }
  return "unknown";
}

inline UtilityKind utility_kind_from_string(std::string_view s) {
  for (UtilityKind k : {UtilityKind::kAdditive, UtilityKind::kPlantedSubset,
                        UtilityKind::kPairwiseInteraction, UtilityKind::kCoverage}) {
    if (to_string(k) == s) return k;
  }
  throw Error("unknown utility kind '" + std::string(s) + "'");
}

// Anything that maps a set of unit ids to a utility. Members are distinct ids
// below ground_size(); order is irrelevant.
template <class F>
concept CoalitionUtility = requires(const F& f, std::span<const UnitId> members) {
  { f.ground_size() } -> std::convertible_to<std::size_t>;
  { f(members) } -> std::convertible_to<double>;
};

class UtilityFunction {
 public:
  UtilityFunction() = default;

  static UtilityFunction additive(std::vector<double> weights) {
    UtilityFunction f;
    f.kind_ = UtilityKind::kAdditive;
    f.n_ = weights.size();
    f.weights_ = std::move(weights);
    return f;
  }

  static UtilityFunction planted_subset(std::size_t n, std::vector<UnitId> planted,
                                        double payoff = 1.0) {
    UtilityFunction f;
    f.kind_ = UtilityKind::kPlantedSubset;
    f.n_ = n;
    f.payoff_ = payoff;
    f.planted_flag_.assign(n, false);
    for (UnitId id : planted) {
      if (id >= n) throw Error("planted id " + std::to_string(id) + " outside ground set");
      f.planted_flag_[id] = true;
    }
    std::sort(planted.begin(), planted.end());
    planted.erase(std::unique(planted.begin(), planted.end()), planted.end());
    f.planted_ = std::move(planted);
    return f;
  }

  // synergy is a dense row-major n x n matrix; only entries (i, j) with i < j
  // are read, so callers may leave the rest zero.
  static UtilityFunction pairwise(std::vector<double> weights, std::vector<double> synergy) {
    const std::size_t n = weights.size();
    if (synergy.size() != n * n) throw Error("pairwise synergy must be n*n");
    UtilityFunction f;
    f.kind_ = UtilityKind::kPairwiseInteraction;
    f.n_ = n;
    f.weights_ = std::move(weights);
    // Symmetrize from the upper triangle so lookups need no ordering.
    for (std::size_t i = 0; i < n; ++i) {
      synergy[i * n + i] = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) synergy[j * n + i] = synergy[i * n + j];
    }
    f.synergy_ = std::move(synergy);
    return f;
  }

  // covers[i] lists the element indices unit i covers.
  static UtilityFunction coverage(std::vector<std::vector<std::uint32_t>> covers,
                                  std::vector<double> element_weights) {
    for (const auto& c : covers) {
      for (std::uint32_t e : c) {
        if (e >= element_weights.size()) throw Error("coverage element out of range");
      }
    }
    UtilityFunction f;
    f.kind_ = UtilityKind::kCoverage;
    f.n_ = covers.size();
    f.covers_ = std::move(covers);
    f.element_weights_ = std::move(element_weights);
    return f;
  }

  UtilityKind kind() const { return kind_; }
  std::size_t ground_size() const { return n_; }

  // True when F(S) is a sum of per-unit weights.
  bool is_additive() const {
    return kind_ == UtilityKind::kAdditive || kind_ == UtilityKind::kPlantedSubset;
  }

  // Per-unit weight of an additive kind.
  double unit_weight(UnitId i) const {
    check_member(i);
    if (kind_ == UtilityKind::kAdditive) return weights_[i];
    if (kind_ == UtilityKind::kPlantedSubset) return planted_flag_[i] ? payoff_ : 0.0;
    throw Error("unit_weight requires an additive utility");
  }

  double operator()(std::span<const UnitId> members) const {
    for (UnitId i : members) check_member(i);
    switch (kind_) {
      case UtilityKind::kAdditive: {
        double s = 0.0;
        for (UnitId i : members) s += weights_[i];
        return s;
      }
      case UtilityKind::kPlantedSubset: {
        double s = 0.0;
        for (UnitId i : members) {
          if (planted_flag_[i]) s += payoff_;
        }
        return s;
      }
      case UtilityKind::kPairwiseInteraction: {
        double s = 0.0;
        for (std::size_t a = 0; a < members.size(); ++a) {
          const UnitId i = members[a];
          s += weights_[i];
          for (std::size_t b = a + 1; b < members.size(); ++b) s += synergy_[i * n_ + members[b]];
        }
        return s;
      }
      case UtilityKind::kCoverage: {
        std::vector<bool> covered(element_weights_.size(), false);
        double s = 0.0;
        for (UnitId i : members) {
          for (std::uint32_t e : covers_[i]) {
            if (!covered[e]) {
              covered[e] = true;
              s += element_weights_[e];
            }
          }
        }
        return s;
      }
    }
    return 0.0;
  }

  double operator()(std::initializer_list<UnitId> members) const {
    return (*this)(std::span<const UnitId>(members.begin(), members.size()));
  }

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<UnitId>& planted() const { return planted_; }
  double payoff() const { return payoff_; }
  const std::vector<double>& synergy() const { return synergy_; }
  double synergy(UnitId i, UnitId j) const { return synergy_[i * n_ + j]; }
  const std::vector<std::vector<std::uint32_t>>& covers() const { return covers_; }
  const std::vector<double>& element_weights() const { return element_weights_; }

  bool operator==(const UtilityFunction&) const = default;

 private:
  void check_member(UnitId i) const {
    if (i >= n_) {
      throw Error("unit id " + std::to_string(i) + " outside ground set of size " +
                  std::to_string(n_));
    }
  }

  UtilityKind kind_ = UtilityKind::kAdditive;
  std::size_t n_ = 0;
  std::vector<double> weights_;
  std::vector<UnitId> planted_;
  std::vector<bool> planted_flag_;
  double payoff_ = 1.0;
  std::vector<double> synergy_;
  std::vector<std::vector<std::uint32_t>> covers_;
  std::vector<double> element_weights_;
};

static_assert(CoalitionUtility<UtilityFunction>);

inline double eval_utility(const UtilityFunction& f, std::span<const UnitId> members) {
  return f(members);
}

// Wraps a utility and counts evaluations.
template <CoalitionUtility F>
class CountingUtility {
 public:
  explicit CountingUtility(const F& f) : f_(&f) {}
  std::size_t ground_size() const { return f_->ground_size(); }
  double operator()(std::span<const UnitId> members) const {
    ++count_;
    return (*f_)(members);
  }
  std::size_t count() const { return count_; }
  void reset() { count_ = 0; }

 private:
  const F* f_;
  mutable std::size_t count_ = 0;
};

// Ids of the set bits of `mask`, ascending.
inline std::vector<UnitId> mask_members(std::uint64_t mask) {
  std::vector<UnitId> out;
  while (mask != 0) {
    out.push_back(static_cast<UnitId>(__builtin_ctzll(mask)));
    mask &= mask - 1;
  }
  return out;
}

// Utility over groups of units: group g stands for the union of groups[g].
// Every kind is closed under this grouping, so the result is again a
// UtilityFunction. Planted utilities become additive over groups.
inline UtilityFunction group_utility(const UtilityFunction& f,
                                     const std::vector<std::vector<UnitId>>& groups) {
  const std::size_t g = groups.size();
  switch (f.kind()) {
    case UtilityKind::kAdditive:
    case UtilityKind::kPlantedSubset: {
      std::vector<double> w(g, 0.0);
      for (std::size_t k = 0; k < g; ++k) {
        for (UnitId i : groups[k]) w[k] += f.unit_weight(i);
      }
      return UtilityFunction::additive(std::move(w));
    }
    case UtilityKind::kPairwiseInteraction: {
      std::vector<double> w(g, 0.0);
      std::vector<double> syn(g * g, 0.0);
      for (std::size_t a = 0; a < g; ++a) {
        w[a] = f(groups[a]);
        for (std::size_t b = a + 1; b < g; ++b) {
          double s = 0.0;
          for (UnitId i : groups[a]) {
            for (UnitId j : groups[b]) s += f.synergy(i, j);
          }
          syn[a * g + b] = s;
        }
      }
      return UtilityFunction::pairwise(std::move(w), std::move(syn));
    }
    case UtilityKind::kCoverage: {
      std::vector<std::vector<std::uint32_t>> covers(g);
      for (std::size_t k = 0; k < g; ++k) {
        for (UnitId i : groups[k]) {
          const auto& c = f.covers()[i];
          covers[k].insert(covers[k].end(), c.begin(), c.end());
        }
        std::sort(covers[k].begin(), covers[k].end());
        covers[k].erase(std::unique(covers[k].begin(), covers[k].end()), covers[k].end());
      }
      return UtilityFunction::coverage(std::move(covers), f.element_weights());
    }
  }
  return {};
}

}  // namespace tokenecon

#endif  // TOKENECON_UTILITY_HPP_
