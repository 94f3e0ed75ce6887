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

#ifndef TOKENECON_SCENARIO_HPP_
#define TOKENECON_SCENARIO_HPP_

// Scenario files (JSON, schema_version 1). Unknown keys are errors; omitted
// optional fields are filled with defaults; unconstrained budgets are +inf
// and serialize as the string "inf".

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tokenecon/allocation.hpp"
#include "tokenecon/core.hpp"
#include "tokenecon/kvcache.hpp"
#include "tokenecon/valuation.hpp"
#include "tokenecon/workload.hpp"

namespace tokenecon {

inline constexpr int kSchemaVersion = 1;

struct CacheConfig {
  std::optional<std::int64_t> capacity;  // none: derived from workload pressure
  double mu = 1.0;
  double gamma = 0.01;
  double metadata_unit_cost = 0.001;  // cost units per metadata unit

  bool operator==(const CacheConfig&) const = default;
};

struct SpeculationConfig {
  bool enabled = false;
  std::uint32_t draft_length = 4;
  double p_acc = 0.7;    // per-position acceptance probability
  double c_draft = 0.5;  // per draft token
  double c_verify = 1.0;
  double info_value = 0.0;
  double threshold = 0.0;

  bool operator==(const SpeculationConfig&) const = default;
};

struct ScenarioConfig {
  int schema_version = kSchemaVersion;
  std::string name = "scenario";
  std::uint64_t seed = 0;
  WorkloadParams workload;
  EstimatorSpec estimator;
  PolicySpec policy;
  std::optional<EvictionPolicy> eviction;  // policy.params.eviction
  Budgets budgets;
  std::uint32_t block_size = 16;
  ObjectiveWeights weights;
  CacheConfig cache;
  SpeculationConfig speculation;

  bool operator==(const ScenarioConfig&) const = default;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> errors)
      : Error(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& e) {
    std::string s;
    for (const auto& x : e) s += (s.empty() ? "" : "; ") + x;
    return s;
  }
  std::vector<std::string> errors_;
};

namespace detail {

using nlohmann::json;

// Collects errors while walking a parsed document.
class Reader {
 public:
  std::vector<std::string> errors;

  void keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
      errors.push_back((path.empty() ? "<root>" : path) + ": expected an object");
      return;
    }
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!ok.count(it.key())) errors.push_back(join(path, it.key()) + ": unknown key");
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  const json* child(const json& obj, const char* key) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
  }

  void number(const json& obj, const std::string& path, const char* key, double& out, bool allow_inf = false) {
    const json* v = child(obj, key);
    if (!v) return;
    if (v->is_number()) {
      out = v->get<double>();
    } else if (allow_inf && v->is_string() && v->get<std::string>() == "inf") {
      out = kUnconstrained;
    } else {
      errors.push_back(join(path, key) + (allow_inf ? ": expected a number or \"inf\"" : ": expected a number"));
    }
  }

  template <class Int>
  void integer(const json& obj, const std::string& path, const char* key, Int& out) {
    const json* v = child(obj, key);
    if (!v) return;
    if (v->is_number_unsigned() ||
        (v->is_number_integer() && (std::is_signed_v<Int> || v->get<std::int64_t>() >= 0))) {
      out = v->get<Int>();
    } else {
      errors.push_back(join(path, key) + ": expected a non-negative integer");
    }
  }

  void boolean(const json& obj, const std::string& path, const char* key, bool& out) {
    const json* v = child(obj, key);
    if (!v) return;
    if (v->is_boolean()) {
      out = v->get<bool>();
    } else {
      errors.push_back(join(path, key) + ": expected a boolean");
    }
  }

  template <class F>
  void string(const json& obj, const std::string& path, const char* key, F&& assign) {
    const json* v = child(obj, key);
    if (!v) return;
    if (!v->is_string()) {
      errors.push_back(join(path, key) + ": expected a string");
      return;
    }
    try {
      assign(v->get<std::string>());
    } catch (const Error& e) {
      errors.push_back(join(path, key) + ": " + e.what());
    }
  }

  void range(const json& obj, const std::string& path, const char* key, LengthRange& out) {
    const json* v = child(obj, key);
    if (!v) return;
    if (v->is_number_integer() && v->get<std::int64_t>() >= 1) {
      out.min = out.max = v->get<std::uint32_t>();
    } else if (v->is_array() && v->size() == 2 && (*v)[0].is_number_integer() && (*v)[1].is_number_integer() &&
               (*v)[0].get<std::int64_t>() >= 0 && (*v)[1].get<std::int64_t>() >= 0) {
      out.min = (*v)[0].get<std::uint32_t>();
      out.max = (*v)[1].get<std::uint32_t>();
    } else {
      errors.push_back(join(path, key) + ": expected a positive integer or [min, max]");
    }
  }
};

inline json num_or_inf(double x) {
  if (std::isinf(x) && x > 0) return "inf";
  return x;
}

}  // namespace detail

// Structural and semantic checks on a materialized config.
inline std::vector<std::string> check_scenario(const ScenarioConfig& c) {
  std::vector<std::string> errs;
  auto add = [&](const std::vector<std::string>& more) { errs.insert(errs.end(), more.begin(), more.end()); };
  if (c.schema_version != kSchemaVersion) errs.push_back("schema_version: unsupported (expected 1)");
  add(check_workload(c.workload));
  add(check_estimator(c.estimator));
  add(check_policy(c.policy));
  const Budgets& b = c.budgets;
  if (!(b.memory >= 0.0)) errs.push_back("budgets.memory: must be >= 0");
  if (!(b.latency >= 0.0)) errs.push_back("budgets.latency: must be >= 0");
  if (!(b.hardware >= 0.0)) errs.push_back("budgets.hardware: must be >= 0");
  if (!(b.tau >= 0.0)) errs.push_back("budgets.tau: must be >= 0");
  if (!(b.tail_latency >= 0.0)) errs.push_back("budgets.tail_L: must be >= 0");
  if (!(b.tail_probability >= 0.0 && b.tail_probability <= 1.0)) {
    errs.push_back("budgets.tail_delta: tail_probability out of [0,1]");
  }
  if (c.block_size < 1) errs.push_back("granularity.block_size: must be >= 1");
  const ObjectiveWeights& w = c.weights;
  const double all[] = {w.alpha_acc,  w.alpha_safety, w.alpha_format, w.alpha_user,     w.lambda_lat,
                        w.lambda_mem, w.lambda_comp,  w.lambda_exchange};
  for (double x : all) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      errs.push_back("weights: all weights must be finite and >= 0");
      break;
    }
  }
  if (!(w.alpha_acc > 0.0 || w.alpha_safety > 0.0 || w.alpha_format > 0.0 || w.alpha_user > 0.0)) {
    errs.push_back("weights: at least one alpha must be > 0");
  }
  if (c.cache.capacity && *c.cache.capacity < 0) errs.push_back("cache.capacity: must be >= 0");
  if (!(c.cache.mu >= 0.0)) errs.push_back("cache.mu: must be >= 0");
  if (!(c.cache.gamma >= 0.0)) errs.push_back("cache.gamma: must be >= 0");
  if (!(c.cache.metadata_unit_cost >= 0.0)) errs.push_back("cache.metadata_unit_cost: must be >= 0");
  const SpeculationConfig& s = c.speculation;
  if (s.draft_length < 1) errs.push_back("speculation.draft_length: must be >= 1");
  if (!(s.p_acc >= 0.0 && s.p_acc <= 1.0)) errs.push_back("speculation.p_acc: out of [0,1]");
  if (!(s.c_draft >= 0.0)) errs.push_back("speculation.c_draft: must be >= 0");
  if (!(s.c_verify >= 0.0)) errs.push_back("speculation.c_verify: must be >= 0");
  return errs;
}

// Parses and validates a scenario document. Throws ValidationError listing
// every problem with its field path.
inline ScenarioConfig validate_scenario(const nlohmann::json& doc) {
  using detail::json;
  detail::Reader r;
  ScenarioConfig c;
  r.keys(doc, "", {"schema_version", "name", "seed", "workload", "estimator", "policy", "budgets", "granularity",
                   "weights", "costs", "cache", "speculation"});
  if (!doc.is_object()) throw ValidationError(r.errors);
  if (const json* v = r.child(doc, "schema_version")) {
    if (v->is_number_integer()) {
      c.schema_version = v->get<int>();
    } else {
      r.errors.push_back("schema_version: expected an integer");
    }
  } else {
    r.errors.push_back("schema_version: required");
  }
  r.string(doc, "", "name", [&](const std::string& s) { c.name = s; });
  r.integer(doc, "", "seed", c.seed);

  if (const json* w = r.child(doc, "workload")) {
    r.keys(*w, "workload",
           {"rate", "tokens_per_request", "value_cv", "value_dist", "attention_bias", "pressure", "horizon"});
    r.number(*w, "workload", "rate", c.workload.rate);
    if (const json* t = r.child(*w, "tokens_per_request")) {
      r.keys(*t, "workload.tokens_per_request", {"prompt", "output"});
      r.range(*t, "workload.tokens_per_request", "prompt", c.workload.prompt);
      r.range(*t, "workload.tokens_per_request", "output", c.workload.output);
    }
    r.number(*w, "workload", "value_cv", c.workload.value_cv);
    r.string(*w, "workload", "value_dist", [&](const std::string& s) { c.workload.value_dist = value_dist_from_string(s); });
    r.number(*w, "workload", "attention_bias", c.workload.attention_bias);
    r.number(*w, "workload", "pressure", c.workload.pressure);
    r.integer(*w, "workload", "horizon", c.workload.horizon);
  }

  bool unit_cost_set = false;
  if (const json* e = r.child(doc, "estimator")) {
    r.keys(*e, "estimator", {"kind", "params", "unit_cost"});
    r.string(*e, "estimator", "kind", [&](const std::string& s) { c.estimator.kind = provenance_from_string(s); });
    if (const json* p = r.child(*e, "params")) {
      r.keys(*p, "estimator.params", {"samples", "decay", "position_scale", "bucket_width", "offline_charge"});
      r.integer(*p, "estimator.params", "samples", c.estimator.samples);
      r.number(*p, "estimator.params", "decay", c.estimator.decay);
      r.number(*p, "estimator.params", "position_scale", c.estimator.position_scale);
      r.integer(*p, "estimator.params", "bucket_width", c.estimator.bucket_width);
      r.number(*p, "estimator.params", "offline_charge", c.estimator.offline_charge);
    }
    if (r.child(*e, "unit_cost")) {
      unit_cost_set = true;
      r.number(*e, "estimator", "unit_cost", c.estimator.unit_cost);
    }
  }
  if (!unit_cost_set) c.estimator.unit_cost = default_unit_cost(c.estimator.kind);

  if (const json* p = r.child(doc, "policy")) {
    r.keys(*p, "policy", {"kind", "params", "step_cost"});
    r.string(*p, "policy", "kind", [&](const std::string& s) { c.policy.kind = policy_kind_from_string(s); });
    if (const json* q = r.child(*p, "params")) {
      const std::string path = "policy.params";
      r.keys(*q, path, {"threshold", "kappa", "target_utilization", "eta", "initial_price", "stream_length",
                        "horizon", "eviction"});
      r.number(*q, path, "threshold", c.policy.threshold);
      r.number(*q, path, "kappa", c.policy.kappa);
      r.number(*q, path, "target_utilization", c.policy.target_utilization);
      r.number(*q, path, "eta", c.policy.eta);
      r.number(*q, path, "initial_price", c.policy.initial_price);
      r.integer(*q, path, "stream_length", c.policy.stream_length);
      r.integer(*q, path, "horizon", c.policy.horizon);
      r.string(*q, path, "eviction", [&](const std::string& s) { c.eviction = eviction_policy_from_string(s); });
    }
    r.number(*p, "policy", "step_cost", c.policy.step_cost);
  }

  if (const json* b = r.child(doc, "budgets")) {
    r.keys(*b, "budgets", {"memory", "latency", "hardware", "tau", "tail_L", "tail_delta"});
    r.number(*b, "budgets", "memory", c.budgets.memory, true);
    r.number(*b, "budgets", "latency", c.budgets.latency, true);
    r.number(*b, "budgets", "hardware", c.budgets.hardware, true);
    r.number(*b, "budgets", "tau", c.budgets.tau, true);
    r.number(*b, "budgets", "tail_L", c.budgets.tail_latency, true);
    r.number(*b, "budgets", "tail_delta", c.budgets.tail_probability);
  }
  if (const json* g = r.child(doc, "granularity")) {
    r.keys(*g, "granularity", {"block_size"});
    r.integer(*g, "granularity", "block_size", c.block_size);
  }
  if (const json* w = r.child(doc, "weights")) {
    r.keys(*w, "weights", {"alpha_acc", "alpha_safety", "alpha_format", "alpha_user", "lambda_lat", "lambda_mem",
                           "lambda_comp", "lambda_exchange"});
    r.number(*w, "weights", "alpha_acc", c.weights.alpha_acc);
    r.number(*w, "weights", "alpha_safety", c.weights.alpha_safety);
    r.number(*w, "weights", "alpha_format", c.weights.alpha_format);
    r.number(*w, "weights", "alpha_user", c.weights.alpha_user);
    r.number(*w, "weights", "lambda_lat", c.weights.lambda_lat);
    r.number(*w, "weights", "lambda_mem", c.weights.lambda_mem);
    r.number(*w, "weights", "lambda_comp", c.weights.lambda_comp);
    r.number(*w, "weights", "lambda_exchange", c.weights.lambda_exchange);
  }
  if (const json* k = r.child(doc, "costs")) {
    r.keys(*k, "costs", {"prefill_per_token", "decode_per_token"});
    r.number(*k, "costs", "prefill_per_token", c.workload.prefill_per_token);
    r.number(*k, "costs", "decode_per_token", c.workload.decode_per_token);
  }
  if (const json* k = r.child(doc, "cache")) {
    r.keys(*k, "cache", {"capacity", "mu", "gamma", "metadata_unit_cost"});
    if (const json* cap = r.child(*k, "capacity")) {
      if (cap->is_null()) {
        c.cache.capacity.reset();
      } else if (cap->is_number_integer()) {
        c.cache.capacity = cap->get<std::int64_t>();
      } else {
        r.errors.push_back("cache.capacity: expected an integer or null");
      }
    }
    r.number(*k, "cache", "mu", c.cache.mu);
    r.number(*k, "cache", "gamma", c.cache.gamma);
    r.number(*k, "cache", "metadata_unit_cost", c.cache.metadata_unit_cost);
  }
  if (const json* s = r.child(doc, "speculation")) {
    const std::string path = "speculation";
    r.keys(*s, path, {"enabled", "draft_length", "p_acc", "c_draft", "c_verify", "info_value", "threshold"});
    r.boolean(*s, path, "enabled", c.speculation.enabled);
    r.integer(*s, path, "draft_length", c.speculation.draft_length);
    r.number(*s, path, "p_acc", c.speculation.p_acc);
    r.number(*s, path, "c_draft", c.speculation.c_draft);
    r.number(*s, path, "c_verify", c.speculation.c_verify);
    r.number(*s, path, "info_value", c.speculation.info_value);
    r.number(*s, path, "threshold", c.speculation.threshold, true);
  }
  std::vector<std::string> errs = std::move(r.errors);
  for (std::string& e : check_scenario(c)) errs.push_back(std::move(e));
  if (!errs.empty()) throw ValidationError(std::move(errs));
  return c;
}

// Full materialized document; parse(serialize(c)) == c.
inline nlohmann::json serialize_scenario(const ScenarioConfig& c) {
  using detail::json;
  using detail::num_or_inf;
  json doc;
  doc["schema_version"] = c.schema_version;
  doc["name"] = c.name;
  doc["seed"] = c.seed;
  doc["workload"] = {
      {"rate", c.workload.rate},
      {"tokens_per_request",
       {{"prompt", {c.workload.prompt.min, c.workload.prompt.max}},
        {"output", {c.workload.output.min, c.workload.output.max}}}},
      {"value_cv", c.workload.value_cv},
      {"value_dist", std::string(to_string(c.workload.value_dist))},
      {"attention_bias", c.workload.attention_bias},
      {"pressure", c.workload.pressure},
      {"horizon", c.workload.horizon}};
  doc["estimator"] = {{"kind", std::string(to_string(c.estimator.kind))},
                      {"params",
                       {{"samples", c.estimator.samples},
                        {"decay", c.estimator.decay},
                        {"position_scale", c.estimator.position_scale},
                        {"bucket_width", c.estimator.bucket_width},
                        {"offline_charge", c.estimator.offline_charge}}},
                      {"unit_cost", c.estimator.unit_cost}};
  json pp = {{"threshold", c.policy.threshold},
             {"kappa", c.policy.kappa},
             {"target_utilization", c.policy.target_utilization},
             {"eta", c.policy.eta},
             {"initial_price", c.policy.initial_price},
             {"stream_length", c.policy.stream_length},
             {"horizon", c.policy.horizon}};
  if (c.eviction) pp["eviction"] = std::string(to_string(*c.eviction));
  doc["policy"] = {{"kind", std::string(to_string(c.policy.kind))}, {"params", pp}, {"step_cost", c.policy.step_cost}};
  doc["budgets"] = {{"memory", num_or_inf(c.budgets.memory)},
                    {"latency", num_or_inf(c.budgets.latency)},
                    {"hardware", num_or_inf(c.budgets.hardware)},
                    {"tau", num_or_inf(c.budgets.tau)},
                    {"tail_L", num_or_inf(c.budgets.tail_latency)},
                    {"tail_delta", c.budgets.tail_probability}};
  doc["granularity"] = {{"block_size", c.block_size}};
  doc["weights"] = {{"alpha_acc", c.weights.alpha_acc},       {"alpha_safety", c.weights.alpha_safety},
                    {"alpha_format", c.weights.alpha_format}, {"alpha_user", c.weights.alpha_user},
                    {"lambda_lat", c.weights.lambda_lat},     {"lambda_mem", c.weights.lambda_mem},
                    {"lambda_comp", c.weights.lambda_comp},   {"lambda_exchange", c.weights.lambda_exchange}};
  doc["costs"] = {{"prefill_per_token", c.workload.prefill_per_token},
                  {"decode_per_token", c.workload.decode_per_token}};
  doc["cache"] = {{"capacity", c.cache.capacity ? json(*c.cache.capacity) : json(nullptr)},
                  {"mu", c.cache.mu},
                  {"gamma", c.cache.gamma},
                  {"metadata_unit_cost", c.cache.metadata_unit_cost}};
  doc["speculation"] = {{"enabled", c.speculation.enabled},       {"draft_length", c.speculation.draft_length},
                        {"p_acc", c.speculation.p_acc},           {"c_draft", c.speculation.c_draft},
                        {"c_verify", c.speculation.c_verify},     {"info_value", c.speculation.info_value},
                        {"threshold", num_or_inf(c.speculation.threshold)}};
  return doc;
}

inline ScenarioConfig parse_scenario_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError({std::string("<root>: malformed JSON: ") + e.what()});
  }
  return validate_scenario(doc);
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError({path + ": cannot open scenario file"});
  std::stringstream ss;
  ss << f.rdbuf();
  ScenarioConfig c = parse_scenario_text(ss.str());
  if (!nlohmann::json::parse(ss.str()).contains("name")) {
    const std::size_t slash = path.find_last_of('/');
    std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
    const std::size_t dot = stem.find_last_of('.');
    if (dot != std::string::npos && dot > 0) stem = stem.substr(0, dot);
    c.name = stem;
  }
  return c;
}

}  // namespace tokenecon

#endif  // TOKENECON_SCENARIO_HPP_
