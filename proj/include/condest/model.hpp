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
// Conductance-based neuron / network models in regressor form.
//
// A network of neurons with ionic and synaptic currents is evaluated either
// directly (Kirchhoff sum, membrane_rhs) or in the split form
//
//   dv/dt = Phi(v,w,u) * theta + a(v,w,u)
//   dw/dt = A(v,eta) * w + b(v,eta)
//
// where theta collects the linearly entering constants selected by a
// Parametrization and eta collects uncertain kinetics constants. Units are
// mV, ms, uA/cm^2, mS/cm^2, uF/cm^2 throughout.

#ifndef CONDEST_MODEL_HPP_
#define CONDEST_MODEL_HPP_

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "condest/errors.hpp"

namespace condest {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Kinetics primitives

/// Sigmoid activation/inactivation curve. kappa > 0 activates with voltage,
/// kappa < 0 inactivates.
struct GatingKinetics {
  double rho = 0.0;      // half-activation voltage [mV]
  double kappa = 1.0;    // slope [mV], sign selects activation/inactivation
  double tau_min = 1.0;  // lower time constant [ms]
  double tau_max = 1.0;  // upper time constant [ms]
  double zeta = 0.0;     // bell center [mV]
  double chi = 1.0;      // bell width [mV]

  void validate(const std::string& where) const;
};

/// First-order synaptic gate driven by the presynaptic voltage. The derived
/// time constant satisfies 1/(a+b) <= tau_syn(v) <= 1/b.
struct SynapticKinetics {
  double rho = 0.0;    // half-activation [mV]
  double kappa = 1.0;  // slope [mV], > 0
  double a_rate = 1.0; // [1/ms], > 0
  double b_rate = 1.0; // [1/ms], > 0

  void validate(const std::string& where) const;
};

double sigmoid_eval(double v, double rho, double kappa);
double sigmoid_dv(double v, double rho, double kappa);
double bell_tau_eval(double v, const GatingKinetics& kin);
double gating_rate(double x, double v, const GatingKinetics& kin);
double synaptic_tau(double v_pre, const SynapticKinetics& kin);
double synaptic_gating_rate(double s, double v_pre, const SynapticKinetics& kin);

// ---------------------------------------------------------------------------
// Model specification

struct IonicCurrentSpec {
  std::string name;     // e.g. "Na", "K", "Ca"
  double mu = 0.0;      // maximal conductance [mS/cm^2], > 0
  double nu = 0.0;      // reversal potential [mV]
  int p_exp = 0;        // activation exponent; 0 means no activation gate
  int q_exp = 0;        // inactivation exponent; 0 means no inactivation gate
  GatingKinetics m_kin; // used iff p_exp > 0
  GatingKinetics h_kin; // used iff q_exp > 0
};

struct SynapseSpec {
  int pre = 0;          // presynaptic neuron index
  double mu = 0.0;      // synaptic maximal conductance [mS/cm^2]
  double nu = 0.0;      // synaptic reversal potential [mV]
  SynapticKinetics kin;
};

struct NeuronSpec {
  double c = 1.0;        // capacitance [uF/cm^2], > 0
  double mu_leak = 1.0;  // leak conductance [mS/cm^2], > 0
  double nu_leak = 0.0;  // leak reversal [mV]
  std::vector<IonicCurrentSpec> currents;
  std::vector<SynapseSpec> synapses;  // incoming, sorted by presynaptic index
};

/// A network is an ordered list of neurons. Gating states are laid out per
/// neuron as (m,h) pairs in current declaration order followed by synaptic
/// gates in presynaptic-index order; the network state w concatenates the
/// per-neuron blocks.
struct NetworkSpec {
  std::vector<NeuronSpec> neurons;

  int n_v() const { return static_cast<int>(neurons.size()); }
  void validate() const;
};

// ---------------------------------------------------------------------------
// Gate bookkeeping

enum class GateKind { Activation, Inactivation, Synaptic };

struct GateRef {
  int neuron = 0;    // owning (postsynaptic) neuron
  GateKind kind = GateKind::Activation;
  int index = 0;     // current index or synapse index within the neuron
  int v_source = 0;  // neuron whose voltage drives the gate kinetics
  std::string label; // e.g. "m_Na", "h_Ca", "s_0<-1"
};

/// Immutable index of the gating-state layout implied by a NetworkSpec.
class GateTable {
 public:
  GateTable() = default;
  explicit GateTable(const NetworkSpec& net);

  int n_w() const { return static_cast<int>(gates_.size()); }
  const GateRef& gate(int k) const { return gates_[k]; }
  const std::vector<GateRef>& gates() const { return gates_; }
  int neuron_offset(int i) const { return offsets_[i]; }
  int neuron_gate_count(int i) const { return offsets_[i + 1] - offsets_[i]; }
  /// Global gate index for a named gate of a neuron, e.g. ("m_Na", 0).
  int find(const std::string& label, int neuron) const;

 private:
  std::vector<GateRef> gates_;
  std::vector<int> offsets_;  // size n_v + 1
};

// ---------------------------------------------------------------------------
// Parametrization

/// Which constants enter theta, per neuron block:
///   Conductances              theta_i = (mu_ion..., mu_syn..., mu_L),
///                             a_i = u_i / c_i, Phi entries carry 1/c_i
///   ScaledConductances        theta_i = (1, mu_ion..., mu_syn..., mu_L)/c_i,
///                             first Phi column is u_i, a = 0
///   ScaledConductancesReversals
///                             theta_i = (1, mu..., mu*nu...)/c_i with the
///                             reversal products appended, a = 0
enum class ThetaLayout {
  Conductances,
  ScaledConductances,
  ScaledConductancesReversals,
};

enum class EtaField { Rho, Kappa, Zeta, Chi };

struct EtaConstant {
  int gate = 0;  // global gate index
  EtaField field = EtaField::Rho;
};

struct Parametrization {
  ThetaLayout layout = ThetaLayout::ScaledConductances;
  std::vector<EtaConstant> eta;  // eta_map, defines the eta vector order

  int n_eta() const { return static_cast<int>(eta.size()); }
};

// ---------------------------------------------------------------------------
// Bound evaluator

/// Evaluates the regressor form of one NetworkSpec under one Parametrization.
/// Holds only pointers; the spec may be mutated between calls (parameter
/// schedules) as long as its topology stays fixed.
class ModelOps {
 public:
  ModelOps(const NetworkSpec& net, const Parametrization& par);

  const NetworkSpec& net() const { return *net_; }
  const Parametrization& par() const { return *par_; }
  const GateTable& gate_table() const { return gates_; }

  int n_v() const { return n_v_; }
  int n_w() const { return gates_.n_w(); }
  int n_theta() const { return theta_offsets_.back(); }
  int n_eta() const { return par_->n_eta(); }
  int theta_offset(int neuron) const { return theta_offsets_[neuron]; }
  int theta_block_size(int neuron) const {
    return theta_offsets_[neuron + 1] - theta_offsets_[neuron];
  }

  /// theta assembled from the current spec constants.
  VectorXd theta_true() const;
  /// eta assembled from the current spec constants, in eta_map order.
  VectorXd eta_true() const;

  using ConstVec = Eigen::Ref<const VectorXd>;

  /// Block-diagonal regressor, n_v x n_theta.
  MatrixXd regressor_phi(const ConstVec& v, const ConstVec& w,
                         const ConstVec& u) const;
  void regressor_phi_into(const ConstVec& v, const ConstVec& w,
                          const ConstVec& u, MatrixXd& phi) const;
  /// Drift vector, n_v.
  VectorXd drift_a(const ConstVec& v, const ConstVec& w,
                   const ConstVec& u) const;
  void drift_a_into(const ConstVec& v, const ConstVec& w, const ConstVec& u,
                    Eigen::Ref<VectorXd> a) const;
  /// Diagonal of A(v,eta) and b(v,eta), both length n_w. For intrinsic gates
  /// the relevant voltage is the owning neuron's, for synaptic gates the
  /// presynaptic neuron's.
  void internal_dynamics(const ConstVec& v, const ConstVec& eta,
                         Eigen::Ref<VectorXd> a_diag,
                         Eigen::Ref<VectorXd> b) const;

  /// Direct Kirchhoff evaluation of dv/dt from the spec constants.
  VectorXd membrane_rhs(const ConstVec& v, const ConstVec& w,
                        const ConstVec& u) const;
  void membrane_rhs_into(const ConstVec& v, const ConstVec& w,
                         const ConstVec& u, Eigen::Ref<VectorXd> dv) const;
  /// Stacked gate rates dw/dt evaluated directly (true internal dynamics).
  VectorXd gating_rhs(const ConstVec& v, const ConstVec& w) const;
  void gating_rhs_into(const ConstVec& v, const ConstVec& w,
                       Eigen::Ref<VectorXd> dw) const;

  /// d/dv [Phi(v,w,u) theta + a(v,w,u)], diagonal n_v x n_v (each neuron's
  /// output equation depends on its own voltage only).
  MatrixXd jacobian_output_v(const ConstVec& v, const ConstVec& w,
                             const ConstVec& u, const ConstVec& theta) const;
  void jacobian_output_v_into(const ConstVec& v, const ConstVec& w,
                              const ConstVec& u, const ConstVec& theta,
                              MatrixXd& jac) const;
  /// d/dw [Phi(v,w,u) theta + a(v,w,u)], n_v x n_w.
  MatrixXd jacobian_output_w(const ConstVec& v, const ConstVec& w,
                             const ConstVec& u, const ConstVec& theta) const;
  void jacobian_output_w_into(const ConstVec& v, const ConstVec& w,
                              const ConstVec& u, const ConstVec& theta,
                              MatrixXd& jac) const;
  /// d/deta [A(v,eta) w_sat + b(v,eta)], n_w x n_eta. Rows of gates with no
  /// eta-designated constants are zero.
  MatrixXd jacobian_internal_eta(const ConstVec& v, const ConstVec& eta,
                                 const ConstVec& w_sat) const;
  void jacobian_internal_eta_into(const ConstVec& v, const ConstVec& eta,
                                  const ConstVec& w_sat, MatrixXd& jac) const;

  /// Gate kinetics with eta overrides applied (intrinsic gates only).
  GatingKinetics effective_kinetics(int gate, const ConstVec& eta) const;
  SynapticKinetics effective_syn_kinetics(int gate, const ConstVec& eta) const;

 private:
  struct EtaOverride {
    int eta_index;
    EtaField field;
  };

  void check_output_dims(const ConstVec& v, const ConstVec& w,
                         const ConstVec& u) const;

  const NetworkSpec* net_;
  const Parametrization* par_;
  GateTable gates_;
  int n_v_;
  std::vector<int> theta_offsets_;             // size n_v + 1
  std::vector<std::vector<EtaOverride>> gate_eta_;  // per gate
};

// Convenience wrappers matching the per-operation contracts. They bind a
// ModelOps on the fly; hot loops should hold a ModelOps instead.
MatrixXd regressor_phi(const VectorXd& v, const VectorXd& w, const VectorXd& u,
                       const NetworkSpec& net, const Parametrization& par);
VectorXd drift_a(const VectorXd& v, const VectorXd& w, const VectorXd& u,
                 const NetworkSpec& net, const Parametrization& par);
VectorXd membrane_rhs(const VectorXd& v, const VectorXd& w, const VectorXd& u,
                      const NetworkSpec& net);

/// Positively invariant voltage box for inputs bounded by u_bar; synaptic
/// reversal potentials are included among the candidates (conservative
/// network extension).
struct VoltageBounds {
  double lo = 0.0;
  double hi = 0.0;
};
VoltageBounds invariant_bounds(const NetworkSpec& net, double u_bar);

}  // namespace condest

#endif  // CONDEST_MODEL_HPP_
