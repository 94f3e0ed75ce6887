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

#ifndef TOKENECON_TOKENECON_HPP_
#define TOKENECON_TOKENECON_HPP_

#include "tokenecon/accounting.hpp"
#include "tokenecon/allocation.hpp"
#include "tokenecon/calibration.hpp"
#include "tokenecon/core.hpp"
#include "tokenecon/instance.hpp"
#include "tokenecon/io.hpp"
#include "tokenecon/kvcache.hpp"
#include "tokenecon/rng.hpp"
#include "tokenecon/scenario.hpp"
#include "tokenecon/simulator.hpp"
#include "tokenecon/speculative.hpp"
#include "tokenecon/trilemma.hpp"
#include "tokenecon/utility.hpp"
#include "tokenecon/valuation.hpp"
#include "tokenecon/workload.hpp"

#endif  // TOKENECON_TOKENECON_HPP_
