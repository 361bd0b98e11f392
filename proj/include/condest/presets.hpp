// Copyright 2026 the condest authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Named model presets and experiment helpers: the single-compartment
// sodium/potassium squid-axon model ("hh") and the two-neuron mutually
// inhibiting bursting circuit ("hco").

#ifndef CONDEST_PRESETS_HPP_
#define CONDEST_PRESETS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "condest/integrator.hpp"
#include "condest/model.hpp"

namespace condest {

struct Preset {
  NetworkSpec net;
  Parametrization par;  // default parametrization
};

/// Known names: "hh", "hco".
Preset preset(const std::string& name);
std::vector<std::string> preset_names();

/// Slow logistic rise of the calcium conductance used by the neuromodulation
/// experiment: 0.11 + 0.07 / (1 + exp(-(t - T_f/2)/1250)), t in ms.
double calcium_schedule(double t, double t_final_ms);
/// The same schedule as a ScheduleEntry targeting every "Ca" current.
ScheduleEntry calcium_schedule_entry(double t_final_ms);

/// Perturbs every internal-dynamics constant (gate and synapse kinetics) by
/// an independent uniform factor in [1-percent, 1+percent]. Voltage-equation
/// constants are untouched. Draw order is fixed: per neuron, per current
/// (activation then inactivation kinetics, fields in declaration order),
/// then per synapse.
NetworkSpec apply_mismatch(const NetworkSpec& net, double percent,
                           std::uint64_t seed);

}  // namespace condest

#endif  // CONDEST_PRESETS_HPP_
