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

#ifndef TOKENECON_INSTANCE_HPP_
#define TOKENECON_INSTANCE_HPP_

// JSON allocation-instance files:
//
//   {"schema_version": 1,
//    "units": [{"class": "input", "value": {"accuracy": 1}, "cost": {"memory": 1},
//               "arrival_step": 0, "request_id": 0, "position": 0, "attention": 0.1}, ...],
//    "utility": {"kind": "additive" | "planted_subset" | "pairwise_interaction" | "coverage", ...},
//    "budgets": {...}, "weights": {...}}
//
// Unit ids are implicit (array index). An additive utility without explicit
// "weights" uses each unit's weighted value.

#include <string>
#include <vector>

#include "json.hpp"
#include "tokenecon/allocation.hpp"
#include "tokenecon/core.hpp"
#include "tokenecon/io.hpp"
#include "tokenecon/scenario.hpp"
#include "tokenecon/utility.hpp"

namespace tokenecon {

inline AllocationInstance parse_instance(const nlohmann::json& doc) {
  using nlohmann::json;
  std::vector<std::string> errs;
  AllocationInstance inst;
  try {
    if (doc.value("schema_version", 1) != 1) errs.push_back("schema_version: unsupported (expected 1)");
    if (const auto it = doc.find("weights"); it != doc.end()) {
      ObjectiveWeights& w = inst.weights;
      w.alpha_acc = it->value("alpha_acc", w.alpha_acc);
      w.alpha_safety = it->value("alpha_safety", w.alpha_safety);
      w.alpha_format = it->value("alpha_format", w.alpha_format);
      w.alpha_user = it->value("alpha_user", w.alpha_user);
      w.lambda_lat = it->value("lambda_lat", w.lambda_lat);
      w.lambda_mem = it->value("lambda_mem", w.lambda_mem);
      w.lambda_comp = it->value("lambda_comp", w.lambda_comp);
      w.lambda_exchange = it->value("lambda_exchange", w.lambda_exchange);
    }
    if (const auto it = doc.find("budgets"); it != doc.end()) {
      auto num = [&](const char* key, double& out) {
        if (const auto v = it->find(key); v != it->end()) out = v->is_string() && *v == "inf" ? kUnconstrained : v->get<double>();
      };
      num("memory", inst.budgets.memory);
      num("latency", inst.budgets.latency);
      num("hardware", inst.budgets.hardware);
      num("tau", inst.budgets.tau);
      num("tail_L", inst.budgets.tail_latency);
      num("tail_delta", inst.budgets.tail_probability);
    }
    const json& units = doc.at("units");
    for (std::size_t i = 0; i < units.size(); ++i) {
      const json& u = units[i];
      TokenUnit t;
      t.id = static_cast<UnitId>(i);
      t.token_class = token_class_from_string(u.value("class", std::string("input")));
      if (const auto v = u.find("value"); v != u.end()) {
        t.value.accuracy = v->value("accuracy", 0.0);
        t.value.safety = v->value("safety", 0.0);
        t.value.format = v->value("format", 0.0);
        t.value.user = v->value("user", 0.0);
      }
      if (const auto c = u.find("cost"); c != u.end()) {
        t.cost.compute = c->value("compute", 0.0);
        t.cost.memory = c->value("memory", std::int64_t{0});
        t.cost.latency = c->value("latency", 0.0);
        t.cost.monetary = c->value("monetary", 0.0);
      }
      t.arrival_step = u.value("arrival_step", std::uint64_t{i});
      t.features.request_id = u.value("request_id", 0u);
      t.features.position = u.value("position", static_cast<std::uint32_t>(i));
      t.features.attention_mass = u.value("attention", 0.0);
      inst.units.push_back(t);
    }
    const std::size_t n = inst.units.size();
    const json util = doc.value("utility", json{{"kind", "additive"}});
    const std::string kind = util.value("kind", std::string("additive"));
    if (kind == "additive") {
      std::vector<double> w;
      if (util.contains("weights")) {
        w = util.at("weights").get<std::vector<double>>();
      } else {
        for (const TokenUnit& t : inst.units) w.push_back(weighted_value(t.value, inst.weights));
      }
      inst.utility = UtilityFunction::additive(std::move(w));
    } else if (kind == "planted_subset") {
      inst.utility = UtilityFunction::planted_subset(n, util.at("planted").get<std::vector<UnitId>>(),
                                                     util.value("payoff", 1.0));
    } else if (kind == "pairwise_interaction") {
      std::vector<double> syn(n * n, 0.0);
      for (const json& e : util.value("synergy", json::array())) {
        const auto i = e.at(0).get<std::size_t>(), j = e.at(1).get<std::size_t>();
        if (i >= n || j >= n) throw Error("utility.synergy: index out of range");
        syn[std::min(i, j) * n + std::max(i, j)] = e.at(2).get<double>();
      }
      inst.utility = UtilityFunction::pairwise(util.at("weights").get<std::vector<double>>(), std::move(syn));
    } else if (kind == "coverage") {
      inst.utility = UtilityFunction::coverage(util.at("covers").get<std::vector<std::vector<std::uint32_t>>>(),
                                               util.at("element_weights").get<std::vector<double>>());
    } else {
      errs.push_back("utility.kind: unknown kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    errs.push_back(std::string("instance: ") + e.what());
  } catch (const Error& e) {
    errs.push_back(std::string("instance: ") + e.what());
  }
  if (errs.empty()) {
    try {
      check_instance(inst);
    } catch (const Error& e) {
      errs.push_back(e.what());
    }
  }
  if (!errs.empty()) throw ValidationError(errs);
  return inst;
}

inline AllocationInstance load_instance(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError({path.string() + ": " + e.what()});
  }
  return parse_instance(doc);
}

}  // namespace tokenecon

#endif  // TOKENECON_INSTANCE_HPP_
