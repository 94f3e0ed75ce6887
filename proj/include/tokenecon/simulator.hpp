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

#ifndef TOKENECON_SIMULATOR_HPP_
#define TOKENECON_SIMULATOR_HPP_

// Discrete-step serving loop. Each step: arrivals and admission, prefill of
// admitted prompts, one decode token per running request (plus accepted
// speculative tokens), cache admission with eviction, sensing and allocation
// charges against the step's sensing budget, completions.
//
// The per-step sensing budget is tau_t = min(tau, max(0, tail_L - L_gen_t)),
// where L_gen_t is the step's generation latency including background load.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "tokenecon/accounting.hpp"
#include "tokenecon/core.hpp"
#include "tokenecon/io.hpp"
#include "tokenecon/kvcache.hpp"
#include "tokenecon/rng.hpp"
#include "tokenecon/scenario.hpp"
#include "tokenecon/speculative.hpp"
#include "tokenecon/valuation.hpp"
#include "tokenecon/workload.hpp"

namespace tokenecon {

struct SimOptions {
  bool disable_sensing = false;  // control run: no valuation, no allocation charges
  bool record_traces = true;
};

struct StepTrace {
  std::uint64_t step = 0;
  std::uint32_t arrivals = 0;
  std::uint32_t active = 0;
  std::uint32_t appended = 0;
  double l_gen = 0.0;
  double sensing_cost = 0.0;  // demanded
  double alloc_cost = 0.0;    // demanded
  double tau_t = 0.0;
  bool flagged = false;
  double metadata_cost = 0.0;
  double latency = 0.0;
  std::int64_t occupancy = 0;
  std::uint32_t evictions = 0;
};

struct SimMetrics {
  double goodput = 0.0;
  double total_utility = 0.0;
  double total_cost = 0.0;
  double base_cost = 0.0;  // prefill + decode + speculation
  double sensing_cost = 0.0;
  double alloc_cost = 0.0;
  double metadata_cost = 0.0;
  double speculation_cost = 0.0;
  double mean_latency = 0.0;
  double p99_latency = 0.0;
  double l_gen_mean = 0.0;
  double l_gen_p99 = 0.0;
  double demand_mean = 0.0;  // mean demanded T_value + T_alloc per step
  std::int64_t memory_high_water = 0;
  std::int64_t capacity = 0;
  std::optional<double> regret;
  std::array<std::uint64_t, kNumTokenClasses> class_counts{};
  std::uint64_t total_tokens = 0;
  double R = 0.0;
  std::uint64_t steps = 0;
  std::uint64_t requests_arrived = 0;
  std::uint64_t requests_admitted = 0;
  std::uint64_t requests_rejected = 0;
  std::uint64_t requests_completed = 0;
  std::uint64_t budget_violations = 0;
  double tail_exceedance_rate = 0.0;
  bool tail_pass = true;
  std::uint64_t evictions = 0;
  std::uint64_t metadata_units = 0;
  double metadata_overhead = 0.0;
  bool metadata_pass = true;
  double verification_cost = 0.0;
  double verification_overhead = 0.0;
  std::uint64_t spec_rounds = 0;
  std::uint64_t spec_speculated = 0;
  std::uint64_t spec_accepted = 0;
  double spec_net = 0.0;
  double offline_charge = 0.0;
  std::string ledger_head;
};

struct SimResult {
  SimMetrics metrics;
  std::vector<StepTrace> steps;
  std::vector<CacheTraceRow> cache_events;
  std::vector<SpecTraceRow> spec_rounds;
  Ledger ledger;
};

inline std::int64_t effective_capacity(const ScenarioConfig& c) {
  std::int64_t cap = 0;
  if (c.cache.capacity) {
    cap = *c.cache.capacity;
  } else {
    cap = static_cast<std::int64_t>(std::ceil(expected_resident_tokens(c.workload) / (1.0 + c.workload.pressure)));
  }
  if (std::isfinite(c.budgets.memory)) cap = std::min<std::int64_t>(cap, static_cast<std::int64_t>(c.budgets.memory));
  return std::max<std::int64_t>(cap, 0);
}

// Latency contributed by other tenants: pressure times this workload's own
// expected generation load.
inline double background_load(const ScenarioConfig& c) {
  return c.workload.pressure * expected_generation_load(c.workload);
}

inline EvictionPolicy eviction_for(const ScenarioConfig& c) {
  if (c.eviction) return *c.eviction;
  return c.policy.kind == PolicyKind::kRecency ? EvictionPolicy::kLru : EvictionPolicy::kValueAware;
}

inline std::string policy_id(const ScenarioConfig& c) {
  return std::string(to_string(c.policy.kind)) + "/" + std::string(to_string(c.estimator.kind)) + "/" +
         std::string(to_string(eviction_for(c)));
}

inline double percentile_nearest_rank(std::vector<double> xs, double q) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(xs.size())));
  return xs[std::min(xs.size(), std::max<std::size_t>(rank, 1)) - 1];
}

namespace detail {

struct Running {
  const Request* req = nullptr;
  std::size_t produced = 0;
  bool decoding = false;
  std::optional<BlockId> tail;
  std::size_t tail_fill = 0;
  std::size_t resident = 0;
  std::array<std::uint64_t, kNumTokenClasses> counts{};
  std::array<double, kNumTokenClasses> costs{};
};

inline TokenKey token_key(const Request& r, std::size_t position) {
  return (static_cast<TokenKey>(r.id) << 32) | static_cast<TokenKey>(position);
}

}  // namespace detail

inline SimResult simulate(const ScenarioConfig& c, const SimOptions& opt = {}) {
  {
    const auto errs = check_scenario(c);
    if (!errs.empty()) throw ValidationError(errs);
  }
  SimResult res;
  SimMetrics& m = res.metrics;
  RngStream wl_stream = derive_rng_stream(c.seed, "workload");
  const std::vector<Request> requests = generate_workload(c.workload, c.workload.horizon, wl_stream);
  RngStream evict_stream = derive_rng_stream(c.seed, "eviction");
  RngStream spec_stream = derive_rng_stream(c.seed, "speculation");

  const std::int64_t capacity = effective_capacity(c);
  m.capacity = capacity;
  m.requests_arrived = requests.size();
  if (requests.empty()) return res;

  const EvictionPolicy eviction = eviction_for(c);
  const bool senses = eviction == EvictionPolicy::kValueAware && !opt.disable_sensing;
  const bool charges_alloc = c.policy.kind != PolicyKind::kRecency && !opt.disable_sensing;
  const double background = background_load(c);
  const double a = c.workload.prefill_per_token;
  const double b = c.workload.decode_per_token;
  const std::string pid = policy_id(c);

  StaticPredictorTable table;
  if (senses && c.estimator.kind == Provenance::kStaticPredictor) {
    RngStream cal = derive_rng_stream(c.seed, "calibration");
    const auto cal_reqs = generate_workload(c.workload, c.workload.horizon, cal);
    std::vector<TokenUnit> units;
    std::vector<double> vals;
    for (const Request& r : cal_reqs) {
      for (const auto* part : {&r.prompt, &r.output}) {
        for (const TokenUnit& u : *part) {
          units.push_back(u);
          vals.push_back(weighted_value(u.value, c.weights));
        }
      }
    }
    table = StaticPredictorTable::calibrate(units, vals, c.estimator.bucket_width);
    m.offline_charge = c.estimator.offline_charge;
  }

  CacheState cache(capacity, c.cache.mu, c.cache.gamma);
  if (opt.record_traces) cache.enable_trace(&res.cache_events);

  std::vector<double> spec_acc(c.speculation.draft_length, c.speculation.p_acc);
  const SpecCostModel spec_cost{c.speculation.c_draft, c.speculation.c_verify, b};
  const SpecProposal proposal = proposal_for(spec_acc, spec_cost, c.speculation.info_value);

  std::vector<detail::Running> running;
  std::vector<double> latencies, lgens;
  std::size_t next_req = 0;
  std::size_t max_concurrent = 0;
  double regret_sum = 0.0;
  std::uint64_t spec_round = 0;
  double demand_sum = 0.0;
  double r_sum = 0.0;

  for (std::uint64_t t = 0; next_req < requests.size() || !running.empty(); ++t) {
    StepTrace st;
    st.step = t;
    double base_t = 0.0;
    const std::uint64_t meta_before = cache.metadata_units();

    struct Append {
      std::size_t run_index;
      std::size_t position;
      const TokenUnit* unit;
    };
    std::vector<Append> appends;

    // Decode for requests admitted in earlier steps.
    for (std::size_t ri = 0; ri < running.size(); ++ri) {
      detail::Running& run = running[ri];
      if (!run.decoding) continue;
      const Request& r = *run.req;
      const std::size_t remaining = r.output.size() - run.produced;
      std::size_t n_new = 1;
      base_t += b;
      run.costs[index_of(TokenClass::kOutput)] += b;
      if (c.speculation.enabled && remaining > 1) {
        SpecTraceRow row;
        row.round = spec_round++;
        row.draft_length = c.speculation.draft_length;
        row.env = env(proposal);
        row.decision = decide_speculate(proposal, c.speculation.threshold);
        ++m.spec_rounds;
        if (row.decision) {
          const SpecOutcome out = simulate_spec_round(spec_acc, spec_cost, spec_stream);
          const std::size_t extra = std::min<std::size_t>(out.accepted, remaining - 1);
          n_new += extra;
          row.accepted_length = out.accepted;
          row.realized_net = out.net();
          ++m.spec_speculated;
          m.spec_accepted += out.accepted;
          m.spec_net += out.net();
          m.speculation_cost += out.realized_cost;
          base_t += out.realized_cost;
          run.counts[index_of(TokenClass::kSpeculative)] += c.speculation.draft_length - extra;
          run.costs[index_of(TokenClass::kSpeculative)] += out.realized_cost;
        }
        if (opt.record_traces) res.spec_rounds.push_back(row);
      }
      for (std::size_t k = 0; k < n_new; ++k) {
        appends.push_back({ri, r.prompt.size() + run.produced + k, &r.output[run.produced + k]});
      }
      run.produced += n_new;
    }

    // Arrivals and admission; prefill happens in the arrival step.
    while (next_req < requests.size() && requests[next_req].arrival_step == t) {
      const Request& r = requests[next_req++];
      ++st.arrivals;
      const auto footprint = static_cast<std::int64_t>(r.prompt.size() + r.output.size());
      if (footprint > capacity) {
        ++m.requests_rejected;
        continue;
      }
      ++m.requests_admitted;
      detail::Running run;
      run.req = &r;
      running.push_back(run);
      const std::size_t ri = running.size() - 1;
      for (std::size_t p = 0; p < r.prompt.size(); ++p) {
        appends.push_back({ri, p, &r.prompt[p]});
        base_t += a;
        running[ri].costs[index_of(r.prompt[p].token_class)] += a;
      }
    }
    max_concurrent = std::max(max_concurrent, running.size());

    // Sensing and allocation demand for this step, against tau_t.
    double t_value = 0.0;
    if (senses) {
      for (const Append& ap : appends) {
        const double k = is_set_valued(c.estimator.kind)
                             ? static_cast<double>(running[ap.run_index].resident + 1)
                             : 1.0;
        t_value += c.estimator.unit_cost * k;
      }
    }
    const double t_alloc = charges_alloc ? c.policy.step_cost * static_cast<double>(appends.size()) : 0.0;
    const double l_gen = base_t + background;
    const double slack = std::isfinite(c.budgets.tail_latency) ? std::max(0.0, c.budgets.tail_latency - l_gen)
                                                               : kUnconstrained;
    const double tau_t = std::min(c.budgets.tau, slack);
    const double demand = t_value + t_alloc;
    const bool flagged = demand > 0.0 && demand > tau_t;
    st.sensing_cost = t_value;
    st.alloc_cost = t_alloc;
    st.tau_t = tau_t;
    st.flagged = flagged;
    st.l_gen = l_gen;
    demand_sum += demand;
    if (std::isfinite(c.budgets.tau) && c.budgets.tau > 0.0) r_sum += demand / c.budgets.tau;
    if (flagged) ++m.budget_violations;
    const bool estimate_now = senses && !flagged;
    if (!flagged) {
      m.sensing_cost += t_value;
      m.alloc_cost += t_alloc;
    }
    const EvictionPolicy step_eviction = flagged ? EvictionPolicy::kLru : eviction;
    const std::uint64_t now = t;

    for (const Append& ap : appends) {
      detail::Running& run = running[ap.run_index];
      const Request& r = *run.req;
      double vhat = 0.0;
      if (estimate_now) {
        switch (c.estimator.kind) {
          case Provenance::kOracle:
          case Provenance::kShapleyExact:
          case Provenance::kShapleyMc:
          case Provenance::kLeaveOneOut:
            // Per-request utility is additive, so these all equal the true weight.
            vhat = weighted_value(ap.unit->value, c.weights);
            break;
          default: {
            TokenUnit u = *ap.unit;
            u.arrival_step = now;
            vhat = proxy_value(c.estimator, u, ProxyContext{now, &table}).mean;
          }
        }
      }
      if (cache.occupancy() + 1 > capacity) {
        const auto ev = cache.evict(1, step_eviction, evict_stream, t);
        st.evictions += static_cast<std::uint32_t>(ev.size());
        for (BlockId id : ev) {
          for (detail::Running& other : running) {
            if (other.tail && *other.tail == id) other.tail.reset();
          }
        }
      }
      CacheEvent e;
      e.kind = CacheEventKind::kTokenAppended;
      if (run.tail && run.tail_fill < c.block_size) {
        e.block = run.tail;
      }
      e.token = detail::token_key(r, ap.position);
      e.estimate = vhat;
      e.memory = 1;
      e.attention = ap.unit->features.attention_mass;
      e.step = t;
      e.owner = r.id;
      const BlockId id = cache.incremental_update(e);
      if (!e.block) {
        run.tail = id;
        run.tail_fill = 0;
        cache.set_pinned(id, true);
      }
      if (++run.tail_fill == c.block_size) cache.set_pinned(id, false);
      ++run.resident;
      ++run.counts[index_of(ap.unit->token_class)];
    }
    st.appended = static_cast<std::uint32_t>(appends.size());
    m.evictions += st.evictions;

    // Decode reads every resident block of the request.
    std::map<std::uint32_t, std::vector<BlockId>> owned;
    for (const auto& [id, blk] : cache.blocks()) owned[blk.owner].push_back(id);
    for (detail::Running& run : running) {
      if (!run.decoding) continue;
      for (BlockId id : owned[run.req->id]) {
        CacheEvent e;
        e.kind = CacheEventKind::kAccess;
        e.block = id;
        e.step = t;
        cache.incremental_update(e);
      }
    }

    // Completions.
    std::vector<detail::Running> still;
    for (detail::Running& run : running) {
      const Request& r = *run.req;
      if (run.decoding && run.produced >= r.output.size()) {
        double retained = 0.0;
        std::vector<double> all_values;
        for (std::size_t p = 0; p < r.prompt.size() + r.output.size(); ++p) {
          const TokenUnit& u = p < r.prompt.size() ? r.prompt[p] : r.output[p - r.prompt.size()];
          const double v = weighted_value(u.value, c.weights);
          all_values.push_back(v);
          if (cache.estimates().count(detail::token_key(r, p))) retained += v;
        }
        m.total_utility += retained;
        std::sort(all_values.begin(), all_values.end(), std::greater<>());
        double best = 0.0;
        for (std::size_t k = 0; k < all_values.size() && static_cast<std::int64_t>(k) < capacity; ++k) {
          if (all_values[k] > 0.0) best += all_values[k];
        }
        regret_sum += best - retained;
        for (BlockId id : owned[r.id]) {
          if (cache.contains(id)) cache.release(id);
        }
        for (TokenClass cls : kAllTokenClasses) {
          const std::size_t k = index_of(cls);
          if (run.counts[k] == 0 && run.costs[k] == 0.0) continue;
          res.ledger.record(t, cls, run.counts[k], run.costs[k], pid);
          m.class_counts[k] += run.counts[k];
        }
        ++m.requests_completed;
      } else {
        run.decoding = true;
        still.push_back(run);
      }
    }
    running.swap(still);

    const double meta_cost = static_cast<double>(cache.metadata_units() - meta_before) * c.cache.metadata_unit_cost;
    m.metadata_cost += meta_cost;
    m.base_cost += base_t;
    st.metadata_cost = meta_cost;
    st.latency = l_gen + (flagged ? 0.0 : demand) + meta_cost;
    st.occupancy = cache.occupancy();
    st.active = static_cast<std::uint32_t>(running.size());
    m.memory_high_water = std::max(m.memory_high_water, cache.occupancy());
    latencies.push_back(st.latency);
    lgens.push_back(l_gen);
    if (opt.record_traces) res.steps.push_back(st);
  }

  m.steps = latencies.size();
  m.metadata_units = cache.metadata_units();
  m.total_cost = m.base_cost + m.sensing_cost + m.alloc_cost + m.metadata_cost;
  m.goodput = m.total_cost > 0.0 ? m.total_utility / m.total_cost : 0.0;
  double lsum = 0.0, gsum = 0.0;
  for (double l : latencies) lsum += l;
  for (double l : lgens) gsum += l;
  m.mean_latency = lsum / static_cast<double>(m.steps);
  m.l_gen_mean = gsum / static_cast<double>(m.steps);
  m.p99_latency = percentile_nearest_rank(latencies, 0.99);
  m.l_gen_p99 = percentile_nearest_rank(lgens, 0.99);
  m.demand_mean = demand_sum / static_cast<double>(m.steps);
  m.R = r_sum / static_cast<double>(m.steps);
  for (std::uint64_t n : m.class_counts) m.total_tokens += n;
  if (max_concurrent <= 1) m.regret = regret_sum;
  const TailCheck tail = check_tail_latencies(latencies, c.budgets.tail_latency, c.budgets.tail_probability);
  m.tail_exceedance_rate = tail.exceedance_rate;
  m.tail_pass = tail.pass;
  if (m.base_cost > 0.0) {
    const OverheadCheck oc = metadata_overhead(m.metadata_cost, m.base_cost, c.cache.gamma);
    m.metadata_overhead = oc.ratio;
    m.metadata_pass = oc.pass;
    m.verification_cost = static_cast<double>(res.ledger.size());  // one cost unit per hashed record
    m.verification_overhead = verification_overhead(m.verification_cost, m.base_cost);
  }
  m.ledger_head = to_hex(res.ledger.head());
  return res;
}

// ---------------------------------------------------------------------------
// Artifacts

inline nlohmann::json metrics_json(const SimMetrics& m, const ScenarioConfig& c) {
  using nlohmann::json;
  json counts;
  for (TokenClass cls : kAllTokenClasses) counts[std::string(to_string(cls))] = m.class_counts[index_of(cls)];
  json mj = {
      {"goodput", json_num(m.goodput)},
      {"total_utility", json_num(m.total_utility)},
      {"total_cost", json_num(m.total_cost)},
      {"base_cost", json_num(m.base_cost)},
      {"sensing_cost", json_num(m.sensing_cost)},
      {"alloc_cost", json_num(m.alloc_cost)},
      {"metadata_cost", json_num(m.metadata_cost)},
      {"speculation_cost", json_num(m.speculation_cost)},
      {"mean_latency", json_num(m.mean_latency)},
      {"p99_latency", json_num(m.p99_latency)},
      {"l_gen_mean", json_num(m.l_gen_mean)},
      {"l_gen_p99", json_num(m.l_gen_p99)},
      {"demand_mean", json_num(m.demand_mean)},
      {"memory_high_water", m.memory_high_water},
      {"capacity", m.capacity},
      {"regret", m.regret ? json_num(*m.regret) : json(nullptr)},
      {"class_counts", counts},
      {"total_tokens", m.total_tokens},
      {"R", json_num(m.R)},
      {"steps", m.steps},
      {"requests",
       {{"arrived", m.requests_arrived},
        {"admitted", m.requests_admitted},
        {"rejected", m.requests_rejected},
        {"completed", m.requests_completed}}},
      {"budget_violations", m.budget_violations},
      {"tail",
       {{"limit", json_num(c.budgets.tail_latency)},
        {"delta", c.budgets.tail_probability},
        {"exceedance_rate", json_num(m.tail_exceedance_rate)},
        {"pass", m.tail_pass}}},
      {"evictions", m.evictions},
      {"metadata_units", m.metadata_units},
      {"metadata_overhead", {{"ratio", json_num(m.metadata_overhead)}, {"gamma", c.cache.gamma}, {"pass", m.metadata_pass}}},
      {"verification_cost", json_num(m.verification_cost)},
      {"verification_overhead", json_num(m.verification_overhead)},
      {"speculation",
       {{"rounds", m.spec_rounds},
        {"speculated", m.spec_speculated},
        {"accepted", m.spec_accepted},
        {"net", json_num(m.spec_net)}}},
      {"offline_charge", json_num(m.offline_charge)},
      {"ledger_head", m.ledger_head}};
  return {{"schema_version", kArtifactSchemaVersion},
          {"seed", c.seed},
          {"config", serialize_scenario(c)},
          {"metrics", mj}};
}

inline std::string steps_csv(const SimResult& r, const ScenarioConfig& c) {
  CsvWriter w(c.seed, serialize_scenario(c),
              {"step", "arrivals", "active", "appended", "l_gen", "sensing_cost", "alloc_cost", "tau_t", "flagged",
               "metadata_cost", "latency", "occupancy", "evictions"});
  for (const StepTrace& s : r.steps) {
    w.row({std::to_string(s.step), std::to_string(s.arrivals), std::to_string(s.active), std::to_string(s.appended),
           fmt_num(s.l_gen), fmt_num(s.sensing_cost), fmt_num(s.alloc_cost), fmt_num(s.tau_t),
           s.flagged ? "1" : "0", fmt_num(s.metadata_cost), fmt_num(s.latency), std::to_string(s.occupancy),
           std::to_string(s.evictions)});
  }
  return w.str();
}

inline std::string cache_csv(const SimResult& r, const ScenarioConfig& c) {
  CsvWriter w(c.seed, serialize_scenario(c), {"step", "event", "block_id", "lambda_after", "occupancy"});
  for (const CacheTraceRow& e : r.cache_events) {
    w.row({std::to_string(e.step), e.event, std::to_string(e.block), fmt_num(e.lambda_after),
           std::to_string(e.occupancy)});
  }
  return w.str();
}

inline std::string speculation_csv(const SimResult& r, const ScenarioConfig& c) {
  CsvWriter w(c.seed, serialize_scenario(c),
              {"round", "draft_length", "env", "decision", "accepted_length", "realized_net"});
  for (const SpecTraceRow& s : r.spec_rounds) {
    w.row({std::to_string(s.round), std::to_string(s.draft_length), fmt_num(s.env), s.decision ? "1" : "0",
           std::to_string(s.accepted_length), fmt_num(s.realized_net)});
  }
  return w.str();
}

// <outdir>/<name>/<seed>/{summary.json, traces/*.csv, ledger.bin, ledger.txt}.
// Returns the run directory.
inline std::filesystem::path write_run_artifacts(const SimResult& r, const ScenarioConfig& c,
                                                 const std::filesystem::path& outdir) {
  const std::filesystem::path dir = outdir / c.name / std::to_string(c.seed);
  std::filesystem::create_directories(dir / "traces");
  write_text_file(dir / "summary.json", metrics_json(r.metrics, c).dump(2) + "\n");
  write_text_file(dir / "traces" / "steps.csv", steps_csv(r, c));
  write_text_file(dir / "traces" / "cache_events.csv", cache_csv(r, c));
  write_text_file(dir / "traces" / "speculation.csv", speculation_csv(r, c));
  write_ledger_file(r.ledger, (dir / "ledger.bin").string());
  write_text_file(dir / "ledger.txt", csv_metadata(c.seed, serialize_scenario(c)) + ledger_text(r.ledger));
  return dir;
}

// ---------------------------------------------------------------------------
// Break-even sweep

enum class RegimeLabel : std::uint8_t { kFine, kCoarse, kTie };

constexpr std::string_view to_string(RegimeLabel l) {
  switch (l) {
    case RegimeLabel::kFine: return "fine";
    case RegimeLabel::kCoarse: return "coarse";
    case RegimeLabel::kTie: return "tie";
  }
  return "unknown";
}

struct BreakevenCell {
  double cv = 0.0;
  double pressure = 0.0;
  MeanCi fine;
  MeanCi coarse;
  MeanCi advantage;  // paired fine - coarse goodput
  double demand_mean = 0.0;
  double tail_target = 0.0;
  double l_gen_p99 = 0.0;  // from the control run
  bool latency_floor = false;
  RegimeLabel label = RegimeLabel::kTie;
};

struct BreakevenMap {
  std::vector<double> cvs;
  std::vector<double> pressures;
  std::vector<BreakevenCell> cells;  // row-major: pressure outer, cv inner
  std::vector<std::optional<double>> epsilon_sys;  // per pressure row

  const BreakevenCell& at(std::size_t pi, std::size_t ci) const { return cells[pi * cvs.size() + ci]; }
};

// Fine-grained arm: value-aware eviction on measured values. The scenario's
// estimator is kept if it measures value (oracle, Shapley, leave-one-out);
// proxies are replaced by the oracle at its default unit cost. Coarse arm:
// LRU with no sensing or allocation charges.
inline ScenarioConfig fine_arm(ScenarioConfig c) {
  if (c.policy.kind == PolicyKind::kRecency) c.policy.kind = PolicyKind::kGreedy;
  switch (c.estimator.kind) {
    case Provenance::kOracle:
    case Provenance::kShapleyExact:
    case Provenance::kShapleyMc:
    case Provenance::kLeaveOneOut:
      break;
    default:
      c.estimator.kind = Provenance::kOracle;
      c.estimator.unit_cost = default_unit_cost(c.estimator.kind);
  }
  c.eviction = EvictionPolicy::kValueAware;
  return c;
}

inline ScenarioConfig coarse_arm(ScenarioConfig c) {
  c.policy.kind = PolicyKind::kRecency;
  c.estimator.kind = Provenance::kRecency;
  c.estimator.unit_cost = default_unit_cost(c.estimator.kind);
  c.eviction = EvictionPolicy::kLru;
  return c;
}

template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (err) std::rethrow_exception(err);
}

inline BreakevenMap breakeven_sweep(const ScenarioConfig& base, const std::vector<double>& cvs,
                                    const std::vector<double>& pressures, std::uint32_t seeds, unsigned jobs = 1) {
  if (cvs.empty() || pressures.empty()) throw Error("breakeven_sweep: grids must be non-empty");
  if (seeds < 2) throw Error("breakeven_sweep: need at least 2 seeds");
  BreakevenMap map;
  map.cvs = cvs;
  map.pressures = pressures;
  const std::size_t ncell = cvs.size() * pressures.size();
  struct Sample {
    double fine = 0.0, coarse = 0.0, demand = 0.0, lgen_p99 = 0.0;
  };
  std::vector<Sample> samples(ncell * seeds);
  parallel_for(samples.size(), jobs, [&](std::size_t idx) {
    const std::size_t cell = idx / seeds;
    const std::uint32_t s = static_cast<std::uint32_t>(idx % seeds);
    ScenarioConfig c = base;
    c.workload.value_cv = cvs[cell % cvs.size()];
    c.workload.pressure = pressures[cell / cvs.size()];
    if (c.workload.value_cv == 0.0 && c.workload.value_dist == ValueDist::kUniform) {
      // fine as is
    } else if (c.workload.value_dist == ValueDist::kUniform) {
      c.workload.value_dist = ValueDist::kLognormal;
    }
    c.seed = base.seed + s;
    SimOptions o;
    o.record_traces = false;
    const SimResult f = simulate(fine_arm(c), o);
    const SimResult k = simulate(coarse_arm(c), o);
    SimOptions ctl = o;
    ctl.disable_sensing = true;
    const SimResult g = simulate(fine_arm(c), ctl);
    samples[idx] = {f.metrics.goodput, k.metrics.goodput, f.metrics.demand_mean, g.metrics.l_gen_p99};
  });
  for (std::size_t cell = 0; cell < ncell; ++cell) {
    BreakevenCell bc;
    bc.cv = cvs[cell % cvs.size()];
    bc.pressure = pressures[cell / cvs.size()];
    std::vector<double> fv, kv, dv, dem, lg;
    for (std::uint32_t s = 0; s < seeds; ++s) {
      const Sample& x = samples[cell * seeds + s];
      fv.push_back(x.fine);
      kv.push_back(x.coarse);
      dv.push_back(x.fine - x.coarse);
      dem.push_back(x.demand);
      lg.push_back(x.lgen_p99);
    }
    bc.fine = mean_ci(fv);
    bc.coarse = mean_ci(kv);
    bc.advantage = mean_ci(dv);
    bc.demand_mean = mean_ci(dem).mean;
    bc.l_gen_p99 = mean_ci(lg).mean;
    bc.tail_target = base.budgets.tail_latency;
    bc.latency_floor = bc.demand_mean > bc.tail_target - bc.l_gen_p99;
    if (bc.latency_floor) {
      bc.label = RegimeLabel::kCoarse;
    } else if (bc.advantage.mean - bc.advantage.ci95 > 0.0) {
      bc.label = RegimeLabel::kFine;
    } else if (bc.advantage.mean + bc.advantage.ci95 < 0.0) {
      bc.label = RegimeLabel::kCoarse;
    } else {
      bc.label = RegimeLabel::kTie;
    }
    map.cells.push_back(bc);
  }
  for (std::size_t pi = 0; pi < pressures.size(); ++pi) {
    std::optional<double> eps;
    for (std::size_t ci = 0; ci < cvs.size(); ++ci) {
      if (map.at(pi, ci).label == RegimeLabel::kFine && (!eps || cvs[ci] < *eps)) eps = cvs[ci];
    }
    map.epsilon_sys.push_back(eps);
  }
  return map;
}

// Fine-wins region is upward-closed in CV: along each pressure row (CV
// ascending), once fine wins no larger CV is labeled coarse.
inline bool upward_closed_in_cv(const BreakevenMap& m) {
  std::vector<std::size_t> order(m.cvs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return m.cvs[x] < m.cvs[y]; });
  for (std::size_t pi = 0; pi < m.pressures.size(); ++pi) {
    bool seen = false;
    for (std::size_t ci : order) {
      const RegimeLabel l = m.at(pi, ci).label;
      if (seen && l == RegimeLabel::kCoarse) return false;
      seen = seen || l == RegimeLabel::kFine;
    }
  }
  return true;
}

// Downward-closed in pressure: along each CV column, if fine wins at some
// pressure, no lower pressure is labeled coarse.
inline bool downward_closed_in_pressure(const BreakevenMap& m) {
  std::vector<std::size_t> order(m.pressures.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return m.pressures[x] > m.pressures[y]; });
  for (std::size_t ci = 0; ci < m.cvs.size(); ++ci) {
    bool seen = false;
    for (std::size_t pi : order) {
      const RegimeLabel l = m.at(pi, ci).label;
      if (seen && l == RegimeLabel::kCoarse) return false;
      seen = seen || l == RegimeLabel::kFine;
    }
  }
  return true;
}

inline std::string regime_csv(const BreakevenMap& m, std::uint64_t seed, const nlohmann::json& config) {
  CsvWriter w(seed, config, {"cv", "pressure", "policy", "goodput_mean", "goodput_ci", "label"});
  for (const BreakevenCell& c : m.cells) {
    const std::string label(to_string(c.label));
    w.row({fmt_num(c.cv), fmt_num(c.pressure), "fine", fmt_num(c.fine.mean), fmt_num(c.fine.ci95), label});
    w.row({fmt_num(c.cv), fmt_num(c.pressure), "coarse", fmt_num(c.coarse.mean), fmt_num(c.coarse.ci95), label});
  }
  return w.str();
}

inline std::string breakeven_cells_csv(const BreakevenMap& m, std::uint64_t seed, const nlohmann::json& config) {
  CsvWriter w(seed, config,
              {"cv", "pressure", "advantage_mean", "advantage_ci", "demand_mean", "tail_target", "l_gen_p99",
               "latency_floor", "label"});
  for (const BreakevenCell& c : m.cells) {
    w.row({fmt_num(c.cv), fmt_num(c.pressure), fmt_num(c.advantage.mean), fmt_num(c.advantage.ci95),
           fmt_num(c.demand_mean), fmt_num(c.tail_target), fmt_num(c.l_gen_p99), c.latency_floor ? "1" : "0",
           std::string(to_string(c.label))});
  }
  return w.str();
}

inline std::string epsilon_csv(const BreakevenMap& m, std::uint64_t seed, const nlohmann::json& config) {
  CsvWriter w(seed, config, {"pressure", "epsilon_sys"});
  for (std::size_t pi = 0; pi < m.pressures.size(); ++pi) {
    w.row({fmt_num(m.pressures[pi]), m.epsilon_sys[pi] ? fmt_num(*m.epsilon_sys[pi]) : "none"});
  }
  return w.str();
}

}  // namespace tokenecon

#endif  // TOKENECON_SIMULATOR_HPP_
