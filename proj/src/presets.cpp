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

#include "condest/presets.hpp"

#include <cmath>
#include <random>

namespace condest {

namespace {

NeuronSpec hh_neuron() {
  NeuronSpec n;
  n.c = 1.0;
  n.mu_leak = 0.3;
  n.nu_leak = -54.4;
  IonicCurrentSpec na;
  na.name = "Na";
  na.mu = 120.0;
  na.nu = 55.0;
  na.p_exp = 3;
  na.q_exp = 1;
  na.m_kin = {-40.0, 9.0, 0.04, 0.50, -38.0, 30.0};
  na.h_kin = {-62.0, -7.0, 1.2, 8.6, -67.0, 20.0};
  IonicCurrentSpec k;
  k.name = "K";
  k.mu = 36.0;
  k.nu = -77.0;
  k.p_exp = 4;
  k.q_exp = 0;
  k.m_kin = {-53.0, 15.0, 1.1, 5.8, -79.0, 50.0};
  n.currents = {na, k};
  return n;
}

NeuronSpec hco_neuron(int self, int other) {
  NeuronSpec n;
  n.c = 1.0;
  n.mu_leak = 0.035;
  n.nu_leak = -49.0;
  IonicCurrentSpec na;
  na.name = "Na";
  na.mu = 60.0;
  na.nu = 50.0;
  na.p_exp = 3;
  na.q_exp = 1;
  na.m_kin = {-35.5, 5.29, 0.06, 42.37, -387.92, 133.78};
  na.h_kin = {-48.9, -5.18, 1.50, 2.50, -62.90, 10.00};
  IonicCurrentSpec k;
  k.name = "K";
  k.mu = 40.0;
  k.nu = -80.0;
  k.p_exp = 4;
  k.q_exp = 0;
  k.m_kin = {-12.3, 11.8, 0.80, 6.65, -76.62, 61.42};
  IonicCurrentSpec ca;
  ca.name = "Ca";
  ca.mu = 0.11;  // time-varying in the neuromodulation experiment
  ca.nu = 120.0;
  ca.p_exp = 3;
  ca.q_exp = 1;
  ca.m_kin = {-67.1, 7.20, 1.01, 40.03, -117.58, 62.87};
  ca.h_kin = {-82.1, -5.5, 40.49, 126.51, -92.48, -50.24};
  n.currents = {na, k, ca};
  SynapseSpec g;
  g.pre = other;
  g.mu = 4.0;
  g.nu = -80.0;
  g.kin = {-45.0, 2.0, 2.0, 0.1};
  n.synapses = {g};
  (void)self;
  return n;
}

}  // namespace

Preset preset(const std::string& name) {
  Preset p;
  if (name == "hh") {
    p.net.neurons = {hh_neuron()};
    p.par.layout = ThetaLayout::ScaledConductances;
    GateTable gates(p.net);
    p.par.eta = {{gates.find("m_Na", 0), EtaField::Rho},
                 {gates.find("h_Na", 0), EtaField::Rho},
                 {gates.find("m_K", 0), EtaField::Rho}};
    return p;
  }
  if (name == "hco") {
    p.net.neurons = {hco_neuron(0, 1), hco_neuron(1, 0)};
    p.par.layout = ThetaLayout::Conductances;
    return p;
  }
  throw ConfigError("unknown preset '" + name + "' (known: hh, hco)");
}

std::vector<std::string> preset_names() { return {"hh", "hco"}; }

double calcium_schedule(double t, double t_final_ms) {
  return 0.11 + 0.07 / (1.0 + std::exp(-(t - 0.5 * t_final_ms) / 1250.0));
}

ScheduleEntry calcium_schedule_entry(double t_final_ms) {
  ScheduleEntry e;
  e.neuron = -1;
  e.current_name = "Ca";
  e.field = ScheduleEntry::Field::Mu;
  e.kind = ScheduleEntry::Kind::Logistic;
  e.p0 = 0.11;
  e.p1 = 0.07;
  e.p2 = 0.5 * t_final_ms;
  e.p3 = 1250.0;
  return e;
}

NetworkSpec apply_mismatch(const NetworkSpec& net, double percent,
                           std::uint64_t seed) {
  if (percent < 0.0) throw ConfigError("apply_mismatch: percent must be >= 0");
  NetworkSpec out = net;
  if (percent == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-percent, percent);
  auto perturb = [&](double& x) { x *= 1.0 + uni(rng); };
  for (NeuronSpec& nrn : out.neurons) {
    for (IonicCurrentSpec& cur : nrn.currents) {
      if (cur.p_exp > 0) {
        perturb(cur.m_kin.rho);
        perturb(cur.m_kin.kappa);
        perturb(cur.m_kin.tau_min);
        perturb(cur.m_kin.tau_max);
        perturb(cur.m_kin.zeta);
        perturb(cur.m_kin.chi);
      }
      if (cur.q_exp > 0) {
        perturb(cur.h_kin.rho);
        perturb(cur.h_kin.kappa);
        perturb(cur.h_kin.tau_min);
        perturb(cur.h_kin.tau_max);
        perturb(cur.h_kin.zeta);
        perturb(cur.h_kin.chi);
      }
    }
    for (SynapseSpec& syn : nrn.synapses) {
      perturb(syn.kin.rho);
      perturb(syn.kin.kappa);
      perturb(syn.kin.a_rate);
      perturb(syn.kin.b_rate);
    }
  }
  return out;
}

}  // namespace condest
