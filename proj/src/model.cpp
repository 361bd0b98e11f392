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

#include "condest/model.hpp"

#include <algorithm>
#include <cmath>

namespace condest {

// ---------------------------------------------------------------------------
// Kinetics

void GatingKinetics::validate(const std::string& where) const {
  if (kappa == 0.0)
    throw InvalidKineticsError(where + ": sigmoid slope kappa must be nonzero");
  if (!(tau_min > 0.0))
    throw InvalidKineticsError(where + ": tau_min must be positive");
  if (!(tau_max >= tau_min))
    throw InvalidKineticsError(where + ": tau_max must be >= tau_min");
  if (chi == 0.0)
    throw InvalidKineticsError(where + ": bell width chi must be nonzero");
}

void SynapticKinetics::validate(const std::string& where) const {
  if (!(kappa > 0.0))
    throw InvalidKineticsError(where + ": synaptic kappa must be positive");
  if (!(a_rate > 0.0) || !(b_rate > 0.0))
    throw InvalidKineticsError(where + ": synaptic rates must be positive");
}

double sigmoid_eval(double v, double rho, double kappa) {
  if (kappa == 0.0)
    throw InvalidKineticsError("sigmoid_eval: kappa must be nonzero");
  return 1.0 / (1.0 + std::exp(-(v - rho) / kappa));
}

double sigmoid_dv(double v, double rho, double kappa) {
  const double s = sigmoid_eval(v, rho, kappa);
  return s * (1.0 - s) / kappa;
}

double bell_tau_eval(double v, const GatingKinetics& kin) {
  const double z = (v - kin.zeta) / kin.chi;
  return kin.tau_min + (kin.tau_max - kin.tau_min) * std::exp(-z * z);
}

double gating_rate(double x, double v, const GatingKinetics& kin) {
  return (-x + sigmoid_eval(v, kin.rho, kin.kappa)) / bell_tau_eval(v, kin);
}

double synaptic_tau(double v_pre, const SynapticKinetics& kin) {
  return 1.0 / (kin.a_rate * sigmoid_eval(v_pre, kin.rho, kin.kappa) +
                kin.b_rate);
}

double synaptic_gating_rate(double s, double v_pre,
                            const SynapticKinetics& kin) {
  const double sigma = sigmoid_eval(v_pre, kin.rho, kin.kappa);
  // tau*ds/dt = -s + a*tau*sigma  with  tau = 1/(a*sigma + b)
  return -s * (kin.a_rate * sigma + kin.b_rate) + kin.a_rate * sigma;
}

// ---------------------------------------------------------------------------
// Spec validation and gate table

void NetworkSpec::validate() const {
  if (neurons.empty()) throw ConfigError("network has no neurons");
  for (size_t i = 0; i < neurons.size(); ++i) {
    const NeuronSpec& nrn = neurons[i];
    const std::string where = "neuron " + std::to_string(i);
    if (!(nrn.c > 0.0)) throw ConfigError(where + ": capacitance must be > 0");
    if (!(nrn.mu_leak > 0.0))
      throw ConfigError(where + ": leak conductance must be > 0");
    for (const IonicCurrentSpec& cur : nrn.currents) {
      if (!(cur.mu > 0.0))
        throw ConfigError(where + " current " + cur.name + ": mu must be > 0");
      if (cur.p_exp < 0 || cur.q_exp < 0)
        throw ConfigError(where + " current " + cur.name +
                          ": exponents must be >= 0");
      if (cur.p_exp > 0) cur.m_kin.validate(where + " m_" + cur.name);
      if (cur.q_exp > 0) cur.h_kin.validate(where + " h_" + cur.name);
    }
    int last_pre = -1;
    for (const SynapseSpec& syn : nrn.synapses) {
      if (syn.pre < 0 || syn.pre >= static_cast<int>(neurons.size()))
        throw ConfigError(where + ": synapse presynaptic index out of range");
      if (syn.pre <= last_pre)
        throw ConfigError(where +
                          ": synapses must be in increasing presynaptic order");
      last_pre = syn.pre;
      syn.kin.validate(where + " synapse from " + std::to_string(syn.pre));
    }
  }
}

GateTable::GateTable(const NetworkSpec& net) {
  offsets_.push_back(0);
  for (int i = 0; i < net.n_v(); ++i) {
    const NeuronSpec& nrn = net.neurons[i];
    for (size_t c = 0; c < nrn.currents.size(); ++c) {
      const IonicCurrentSpec& cur = nrn.currents[c];
      if (cur.p_exp > 0)
        gates_.push_back({i, GateKind::Activation, static_cast<int>(c), i,
                          "m_" + cur.name});
      if (cur.q_exp > 0)
        gates_.push_back({i, GateKind::Inactivation, static_cast<int>(c), i,
                          "h_" + cur.name});
    }
    for (size_t s = 0; s < nrn.synapses.size(); ++s) {
      const SynapseSpec& syn = nrn.synapses[s];
      gates_.push_back({i, GateKind::Synaptic, static_cast<int>(s), syn.pre,
                        "s_" + std::to_string(i) + "<-" +
                            std::to_string(syn.pre)});
    }
    offsets_.push_back(static_cast<int>(gates_.size()));
  }
}

int GateTable::find(const std::string& label, int neuron) const {
  for (int k = offsets_[neuron]; k < offsets_[neuron + 1]; ++k)
    if (gates_[k].label == label) return k;
  throw ConfigError("unknown gate '" + label + "' on neuron " +
                    std::to_string(neuron));
}

// ---------------------------------------------------------------------------
// ModelOps

ModelOps::ModelOps(const NetworkSpec& net, const Parametrization& par)
    : net_(&net), par_(&par), gates_(net), n_v_(net.n_v()) {
  net.validate();
  theta_offsets_.push_back(0);
  for (int i = 0; i < n_v_; ++i) {
    const NeuronSpec& nrn = net.neurons[i];
    const int n_cond = static_cast<int>(nrn.currents.size()) +
                       static_cast<int>(nrn.synapses.size()) + 1;  // + leak
    int block = 0;
    switch (par.layout) {
      case ThetaLayout::Conductances:
        block = n_cond;
        break;
      case ThetaLayout::ScaledConductances:
        block = 1 + n_cond;
        break;
      case ThetaLayout::ScaledConductancesReversals:
        block = 1 + 2 * n_cond;
        break;
    }
    theta_offsets_.push_back(theta_offsets_.back() + block);
  }

  gate_eta_.resize(gates_.n_w());
  for (int j = 0; j < par.n_eta(); ++j) {
    const EtaConstant& e = par.eta[j];
    if (e.gate < 0 || e.gate >= gates_.n_w())
      throw ConfigError("eta_map gate index out of range");
    const GateRef& g = gates_.gate(e.gate);
    if (g.kind == GateKind::Synaptic &&
        (e.field == EtaField::Zeta || e.field == EtaField::Chi))
      throw ConfigError("synaptic gates have no zeta/chi constants");
    gate_eta_[e.gate].push_back({j, e.field});
  }
}

void ModelOps::check_output_dims(const ConstVec& v, const ConstVec& w,
                                  const ConstVec& u) const {
  if (v.size() != n_v_ || u.size() != n_v_ || w.size() != n_w())
    throw DimensionError("state/input dimensions do not match the network");
}

VectorXd ModelOps::theta_true() const {
  VectorXd th(n_theta());
  for (int i = 0; i < n_v_; ++i) {
    const NeuronSpec& nrn = net_->neurons[i];
    int k = theta_offsets_[i];
    const double inv_c = 1.0 / nrn.c;
    switch (par_->layout) {
      case ThetaLayout::Conductances:
        for (const IonicCurrentSpec& cur : nrn.currents) th(k++) = cur.mu;
        for (const SynapseSpec& syn : nrn.synapses) th(k++) = syn.mu;
        th(k++) = nrn.mu_leak;
        break;
      case ThetaLayout::ScaledConductances:
        th(k++) = inv_c;
        for (const IonicCurrentSpec& cur : nrn.currents)
          th(k++) = cur.mu * inv_c;
        for (const SynapseSpec& syn : nrn.synapses) th(k++) = syn.mu * inv_c;
        th(k++) = nrn.mu_leak * inv_c;
        break;
      case ThetaLayout::ScaledConductancesReversals:
        th(k++) = inv_c;
        for (const IonicCurrentSpec& cur : nrn.currents)
          th(k++) = cur.mu * inv_c;
        for (const SynapseSpec& syn : nrn.synapses) th(k++) = syn.mu * inv_c;
        th(k++) = nrn.mu_leak * inv_c;
        for (const IonicCurrentSpec& cur : nrn.currents)
          th(k++) = cur.mu * cur.nu * inv_c;
        for (const SynapseSpec& syn : nrn.synapses)
          th(k++) = syn.mu * syn.nu * inv_c;
        th(k++) = nrn.mu_leak * nrn.nu_leak * inv_c;
        break;
    }
  }
  return th;
}

VectorXd ModelOps::eta_true() const {
  VectorXd eta(n_eta());
  for (int j = 0; j < par_->n_eta(); ++j) {
    const EtaConstant& e = par_->eta[j];
    const GateRef& g = gates_.gate(e.gate);
    const NeuronSpec& nrn = net_->neurons[g.neuron];
    if (g.kind == GateKind::Synaptic) {
      const SynapticKinetics& kin = nrn.synapses[g.index].kin;
      eta(j) = (e.field == EtaField::Rho) ? kin.rho : kin.kappa;
    } else {
      const IonicCurrentSpec& cur = nrn.currents[g.index];
      const GatingKinetics& kin =
          (g.kind == GateKind::Activation) ? cur.m_kin : cur.h_kin;
      switch (e.field) {
        case EtaField::Rho: eta(j) = kin.rho; break;
        case EtaField::Kappa: eta(j) = kin.kappa; break;
        case EtaField::Zeta: eta(j) = kin.zeta; break;
        case EtaField::Chi: eta(j) = kin.chi; break;
      }
    }
  }
  return eta;
}

GatingKinetics ModelOps::effective_kinetics(int gate,
                                            const ConstVec& eta) const {
  const GateRef& g = gates_.gate(gate);
  const IonicCurrentSpec& cur = net_->neurons[g.neuron].currents[g.index];
  GatingKinetics kin = (g.kind == GateKind::Activation) ? cur.m_kin : cur.h_kin;
  for (const EtaOverride& ov : gate_eta_[gate]) {
    const double value = eta(ov.eta_index);
    switch (ov.field) {
      case EtaField::Rho: kin.rho = value; break;
      case EtaField::Kappa: kin.kappa = value; break;
      case EtaField::Zeta: kin.zeta = value; break;
      case EtaField::Chi: kin.chi = value; break;
    }
  }
  return kin;
}

SynapticKinetics ModelOps::effective_syn_kinetics(int gate,
                                                  const ConstVec& eta) const {
  const GateRef& g = gates_.gate(gate);
  SynapticKinetics kin = net_->neurons[g.neuron].synapses[g.index].kin;
  for (const EtaOverride& ov : gate_eta_[gate]) {
    const double value = eta(ov.eta_index);
    if (ov.field == EtaField::Rho) kin.rho = value;
    if (ov.field == EtaField::Kappa) kin.kappa = value;
  }
  return kin;
}

namespace {

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

// Gate product m^p * h^q of one current, given the neuron's gate block layout.
// Returns the product and the indices of the m/h gates (-1 when absent).
struct GateProduct {
  double value = 1.0;
  int m_gate = -1;
  int h_gate = -1;
  double m = 1.0, h = 1.0;
};

}  // namespace

// Locates the gates of current `c` of neuron `i`. Gates are laid out (m,h)
// per current in declaration order, so a linear scan over the block is fine
// for the sizes at hand.
static GateProduct gate_product(const GateTable& gates,
                                const Eigen::Ref<const VectorXd>& w,
                                int neuron, int current,
                                const IonicCurrentSpec& cur) {
  GateProduct gp;
  for (int k = gates.neuron_offset(neuron);
       k < gates.neuron_offset(neuron) + gates.neuron_gate_count(neuron); ++k) {
    const GateRef& g = gates.gate(k);
    if (g.index != current || g.kind == GateKind::Synaptic) continue;
    if (g.kind == GateKind::Activation) {
      gp.m_gate = k;
      gp.m = w(k);
    } else {
      gp.h_gate = k;
      gp.h = w(k);
    }
  }
  gp.value = ipow(gp.m, cur.p_exp) * ipow(gp.h, cur.q_exp);
  return gp;
}

static int synaptic_gate_index(const GateTable& gates, int neuron, int syn) {
  for (int k = gates.neuron_offset(neuron);
       k < gates.neuron_offset(neuron) + gates.neuron_gate_count(neuron); ++k) {
    const GateRef& g = gates.gate(k);
    if (g.kind == GateKind::Synaptic && g.index == syn) return k;
  }
  throw DimensionError("synaptic gate not found");
}

MatrixXd ModelOps::regressor_phi(const ConstVec& v, const ConstVec& w,
                                 const ConstVec& u) const {
  MatrixXd phi(n_v_, n_theta());
  regressor_phi_into(v, w, u, phi);
  return phi;
}

void ModelOps::regressor_phi_into(const ConstVec& v, const ConstVec& w,
                                  const ConstVec& u, MatrixXd& phi) const {
  check_output_dims(v, w, u);
  phi.setZero(n_v_, n_theta());
  for (int i = 0; i < n_v_; ++i) {
    const NeuronSpec& nrn = net_->neurons[i];
    const double inv_c = 1.0 / nrn.c;
    const int n_cur = static_cast<int>(nrn.currents.size());
    const int n_syn = static_cast<int>(nrn.synapses.size());
    int k = theta_offsets_[i];
    const bool scaled = par_->layout != ThetaLayout::Conductances;
    const double cond_scale = scaled ? 1.0 : inv_c;

    if (scaled) phi(i, k++) = u(i);  // column of the 1/c entry
    if (par_->layout == ThetaLayout::ScaledConductancesReversals) {
      // mu columns multiply -gate_product * v, mu*nu columns +gate_product
      for (int c = 0; c < n_cur; ++c) {
        const GateProduct gp =
            gate_product(gates_, w, i, c, nrn.currents[c]);
        phi(i, k + c) = -gp.value * v(i);
        phi(i, k + (n_cur + n_syn + 1) + c) = gp.value;
      }
      for (int s = 0; s < n_syn; ++s) {
        const double sg = w(synaptic_gate_index(gates_, i, s));
        phi(i, k + n_cur + s) = -sg * v(i);
        phi(i, k + (n_cur + n_syn + 1) + n_cur + s) = sg;
      }
      phi(i, k + n_cur + n_syn) = -v(i);
      phi(i, k + 2 * (n_cur + n_syn) + 1) = 1.0;
    } else {
      for (int c = 0; c < n_cur; ++c) {
        const IonicCurrentSpec& cur = nrn.currents[c];
        const GateProduct gp = gate_product(gates_, w, i, c, cur);
        phi(i, k + c) = -gp.value * (v(i) - cur.nu) * cond_scale;
      }
      for (int s = 0; s < n_syn; ++s) {
        const SynapseSpec& syn = nrn.synapses[s];
        const double sg = w(synaptic_gate_index(gates_, i, s));
        phi(i, k + n_cur + s) = -sg * (v(i) - syn.nu) * cond_scale;
      }
      phi(i, k + n_cur + n_syn) = -(v(i) - nrn.nu_leak) * cond_scale;
    }
  }
}

VectorXd ModelOps::drift_a(const ConstVec& v, const ConstVec& w,
                           const ConstVec& u) const {
  VectorXd a(n_v_);
  drift_a_into(v, w, u, a);
  return a;
}

void ModelOps::drift_a_into(const ConstVec& v, const ConstVec& w,
                            const ConstVec& u, Eigen::Ref<VectorXd> a) const {
  check_output_dims(v, w, u);
  a.setZero();
  if (par_->layout == ThetaLayout::Conductances)
    for (int i = 0; i < n_v_; ++i) a(i) = u(i) / net_->neurons[i].c;
}

void ModelOps::internal_dynamics(const ConstVec& v, const ConstVec& eta,
                                 Eigen::Ref<VectorXd> a_diag,
                                 Eigen::Ref<VectorXd> b) const {
  if (v.size() != n_v_)
    throw DimensionError("internal_dynamics: voltage dimension mismatch");
  if (eta.size() != n_eta())
    throw DimensionError("internal_dynamics: eta dimension mismatch");
  for (int k = 0; k < n_w(); ++k) {
    const GateRef& g = gates_.gate(k);
    const double v_rel = v(g.v_source);
    if (g.kind == GateKind::Synaptic) {
      const SynapticKinetics kin = effective_syn_kinetics(k, eta);
      const double sigma = sigmoid_eval(v_rel, kin.rho, kin.kappa);
      a_diag(k) = -(kin.a_rate * sigma + kin.b_rate);
      b(k) = kin.a_rate * sigma;
    } else {
      const GatingKinetics kin = effective_kinetics(k, eta);
      const double tau = bell_tau_eval(v_rel, kin);
      a_diag(k) = -1.0 / tau;
      b(k) = sigmoid_eval(v_rel, kin.rho, kin.kappa) / tau;
    }
  }
}

VectorXd ModelOps::membrane_rhs(const ConstVec& v, const ConstVec& w,
                                const ConstVec& u) const {
  VectorXd dv(n_v_);
  membrane_rhs_into(v, w, u, dv);
  return dv;
}

void ModelOps::membrane_rhs_into(const ConstVec& v, const ConstVec& w,
                                 const ConstVec& u,
                                 Eigen::Ref<VectorXd> dv) const {
  check_output_dims(v, w, u);
  for (int i = 0; i < n_v_; ++i) {
    const NeuronSpec& nrn = net_->neurons[i];
    double current_sum = -nrn.mu_leak * (v(i) - nrn.nu_leak) + u(i);
    for (size_t c = 0; c < nrn.currents.size(); ++c) {
      const IonicCurrentSpec& cur = nrn.currents[c];
      const GateProduct gp =
          gate_product(gates_, w, i, static_cast<int>(c), cur);
      current_sum -= cur.mu * gp.value * (v(i) - cur.nu);
    }
    for (size_t s = 0; s < nrn.synapses.size(); ++s) {
      const SynapseSpec& syn = nrn.synapses[s];
      const double sg = w(synaptic_gate_index(gates_, i, static_cast<int>(s)));
      current_sum -= syn.mu * sg * (v(i) - syn.nu);
    }
    dv(i) = current_sum / nrn.c;
  }
}

VectorXd ModelOps::gating_rhs(const ConstVec& v, const ConstVec& w) const {
  VectorXd dw(n_w());
  gating_rhs_into(v, w, dw);
  return dw;
}

void ModelOps::gating_rhs_into(const ConstVec& v, const ConstVec& w,
                               Eigen::Ref<VectorXd> dw) const {
  for (int k = 0; k < n_w(); ++k) {
    const GateRef& g = gates_.gate(k);
    const double v_rel = v(g.v_source);
    if (g.kind == GateKind::Synaptic) {
      const SynapticKinetics& kin = net_->neurons[g.neuron].synapses[g.index].kin;
      dw(k) = synaptic_gating_rate(w(k), v_rel, kin);
    } else {
      const IonicCurrentSpec& cur = net_->neurons[g.neuron].currents[g.index];
      const GatingKinetics& kin =
          (g.kind == GateKind::Activation) ? cur.m_kin : cur.h_kin;
      dw(k) = gating_rate(w(k), v_rel, kin);
    }
  }
}

MatrixXd ModelOps::jacobian_output_v(const ConstVec& v, const ConstVec& w,
                                     const ConstVec& u,
                                     const ConstVec& theta) const {
  MatrixXd jac(n_v_, n_v_);
  jacobian_output_v_into(v, w, u, theta, jac);
  return jac;
}

void ModelOps::jacobian_output_v_into(const ConstVec& v, const ConstVec& w,
                                      const ConstVec& u, const ConstVec& theta,
                                      MatrixXd& jac) const {
  check_output_dims(v, w, u);
  if (theta.size() != n_theta())
    throw DimensionError("jacobian_output_v: theta dimension mismatch");
  jac.setZero(n_v_, n_v_);
  for (int i = 0; i < n_v_; ++i) {
    const NeuronSpec& nrn = net_->neurons[i];
    const int n_cur = static_cast<int>(nrn.currents.size());
    const int n_syn = static_cast<int>(nrn.synapses.size());
    const int k0 = theta_offsets_[i];
    const bool scaled = par_->layout != ThetaLayout::Conductances;
    const double cond_scale = scaled ? 1.0 : 1.0 / nrn.c;
    const int mu0 = k0 + (scaled ? 1 : 0);
    double d = 0.0;
    for (int c = 0; c < n_cur; ++c) {
      const GateProduct gp = gate_product(gates_, w, i, c, nrn.currents[c]);
      d -= gp.value * cond_scale * theta(mu0 + c);
    }
    for (int s = 0; s < n_syn; ++s) {
      const double sg = w(synaptic_gate_index(gates_, i, s));
      d -= sg * cond_scale * theta(mu0 + n_cur + s);
    }
    d -= cond_scale * theta(mu0 + n_cur + n_syn);
    // The mu*nu columns of the third layout do not depend on v.
    jac(i, i) = d;
  }
}

MatrixXd ModelOps::jacobian_output_w(const ConstVec& v, const ConstVec& w,
                                     const ConstVec& u,
                                     const ConstVec& theta) const {
  MatrixXd jac(n_v_, n_w());
  jacobian_output_w_into(v, w, u, theta, jac);
  return jac;
}

void ModelOps::jacobian_output_w_into(const ConstVec& v, const ConstVec& w,
                                      const ConstVec& u, const ConstVec& theta,
                                      MatrixXd& jac) const {
  check_output_dims(v, w, u);
  if (theta.size() != n_theta())
    throw DimensionError("jacobian_output_w: theta dimension mismatch");
  jac.setZero(n_v_, n_w());
  const bool rev = par_->layout == ThetaLayout::ScaledConductancesReversals;
  for (int i = 0; i < n_v_; ++i) {
    const NeuronSpec& nrn = net_->neurons[i];
    const int n_cur = static_cast<int>(nrn.currents.size());
    const int n_syn = static_cast<int>(nrn.synapses.size());
    const int k0 = theta_offsets_[i];
    const bool scaled = par_->layout != ThetaLayout::Conductances;
    const double cond_scale = scaled ? 1.0 : 1.0 / nrn.c;
    const int mu0 = k0 + (scaled ? 1 : 0);
    for (int c = 0; c < n_cur; ++c) {
      const IonicCurrentSpec& cur = nrn.currents[c];
      const GateProduct gp = gate_product(gates_, w, i, c, cur);
      // Effective driving term of this current under the layout.
      double drive;
      if (rev) {
        const double th_mu = theta(mu0 + c);
        const double th_munu = theta(mu0 + (n_cur + n_syn + 1) + c);
        drive = -th_mu * v(i) + th_munu;
      } else {
        drive = -theta(mu0 + c) * (v(i) - cur.nu) * cond_scale;
      }
      if (gp.m_gate >= 0 && cur.p_exp > 0) {
        const double dm = cur.p_exp * ipow(gp.m, cur.p_exp - 1) *
                          ipow(gp.h, cur.q_exp);
        jac(i, gp.m_gate) += dm * drive;
      }
      if (gp.h_gate >= 0 && cur.q_exp > 0) {
        const double dh = cur.q_exp * ipow(gp.h, cur.q_exp - 1) *
                          ipow(gp.m, cur.p_exp);
        jac(i, gp.h_gate) += dh * drive;
      }
    }
    for (int s = 0; s < n_syn; ++s) {
      const SynapseSpec& syn = nrn.synapses[s];
      const int sk = synaptic_gate_index(gates_, i, s);
      double drive;
      if (rev) {
        const double th_mu = theta(mu0 + n_cur + s);
        const double th_munu = theta(mu0 + (n_cur + n_syn + 1) + n_cur + s);
        drive = -th_mu * v(i) + th_munu;
      } else {
        drive = -theta(mu0 + n_cur + s) * (v(i) - syn.nu) * cond_scale;
      }
      jac(i, sk) += drive;
    }
  }
}

MatrixXd ModelOps::jacobian_internal_eta(const ConstVec& v,
                                         const ConstVec& eta,
                                         const ConstVec& w_sat) const {
  MatrixXd jac(n_w(), n_eta());
  jacobian_internal_eta_into(v, eta, w_sat, jac);
  return jac;
}

void ModelOps::jacobian_internal_eta_into(const ConstVec& v,
                                          const ConstVec& eta,
                                          const ConstVec& w_sat,
                                          MatrixXd& jac) const {
  if (v.size() != n_v_ || w_sat.size() != n_w() || eta.size() != n_eta())
    throw DimensionError("jacobian_internal_eta: dimension mismatch");
  jac.setZero(n_w(), n_eta());
  for (int k = 0; k < n_w(); ++k) {
    if (gate_eta_[k].empty()) continue;
    const GateRef& g = gates_.gate(k);
    const double v_rel = v(g.v_source);
    const double x = w_sat(k);
    if (g.kind == GateKind::Synaptic) {
      const SynapticKinetics kin = effective_syn_kinetics(k, eta);
      const double sigma = sigmoid_eval(v_rel, kin.rho, kin.kappa);
      const double dsig_common = sigma * (1.0 - sigma);
      for (const auto& ov : gate_eta_[k]) {
        // row value: d/d eta of  a*sigma*(1-x) - b*x
        double dsigma = 0.0;
        if (ov.field == EtaField::Rho) dsigma = -dsig_common / kin.kappa;
        if (ov.field == EtaField::Kappa)
          dsigma = -dsig_common * (v_rel - kin.rho) / (kin.kappa * kin.kappa);
        jac(k, ov.eta_index) = kin.a_rate * dsigma * (1.0 - x);
      }
    } else {
      const GatingKinetics kin = effective_kinetics(k, eta);
      const double tau = bell_tau_eval(v_rel, kin);
      const double sigma = sigmoid_eval(v_rel, kin.rho, kin.kappa);
      const double dsig_common = sigma * (1.0 - sigma);
      const double z = (v_rel - kin.zeta) / kin.chi;
      const double bell = std::exp(-z * z);
      const double dtau_dzeta =
          (kin.tau_max - kin.tau_min) * bell * 2.0 * z / kin.chi;
      const double dtau_dchi =
          (kin.tau_max - kin.tau_min) * bell * 2.0 * z * z / kin.chi;
      for (const auto& ov : gate_eta_[k]) {
        // gate rhs is (sigma - x)/tau
        double val = 0.0;
        switch (ov.field) {
          case EtaField::Rho:
            val = (-dsig_common / kin.kappa) / tau;
            break;
          case EtaField::Kappa:
            val = (-dsig_common * (v_rel - kin.rho) /
                   (kin.kappa * kin.kappa)) /
                  tau;
            break;
          case EtaField::Zeta:
            val = -(sigma - x) / (tau * tau) * dtau_dzeta;
            break;
          case EtaField::Chi:
            val = -(sigma - x) / (tau * tau) * dtau_dchi;
            break;
        }
        jac(k, ov.eta_index) = val;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Free wrappers

MatrixXd regressor_phi(const VectorXd& v, const VectorXd& w, const VectorXd& u,
                       const NetworkSpec& net, const Parametrization& par) {
  return ModelOps(net, par).regressor_phi(v, w, u);
}

VectorXd drift_a(const VectorXd& v, const VectorXd& w, const VectorXd& u,
                 const NetworkSpec& net, const Parametrization& par) {
  return ModelOps(net, par).drift_a(v, w, u);
}

VectorXd membrane_rhs(const VectorXd& v, const VectorXd& w, const VectorXd& u,
                      const NetworkSpec& net) {
  Parametrization par;  // layout irrelevant for the direct evaluation
  return ModelOps(net, par).membrane_rhs(v, w, u);
}

VoltageBounds invariant_bounds(const NetworkSpec& net, double u_bar) {
  if (u_bar < 0.0) throw ConfigError("invariant_bounds: u_bar must be >= 0");
  VoltageBounds box;
  bool first = true;
  for (const NeuronSpec& nrn : net.neurons) {
    double nu_max = -std::numeric_limits<double>::infinity();
    double nu_min = std::numeric_limits<double>::infinity();
    for (const IonicCurrentSpec& cur : nrn.currents) {
      nu_max = std::max(nu_max, cur.nu);
      nu_min = std::min(nu_min, cur.nu);
    }
    for (const SynapseSpec& syn : nrn.synapses) {
      nu_max = std::max(nu_max, syn.nu);
      nu_min = std::min(nu_min, syn.nu);
    }
    const double hi = std::max(nu_max, u_bar / nrn.mu_leak + nrn.nu_leak);
    const double lo = std::min(nu_min, -u_bar / nrn.mu_leak + nrn.nu_leak);
    if (first) {
      box = {lo, hi};
      first = false;
    } else {
      box.lo = std::min(box.lo, lo);
      box.hi = std::max(box.hi, hi);
    }
  }
  return box;
}

}  // namespace condest
