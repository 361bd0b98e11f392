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
// Adaptive observers for the regressor-form model class:
//
//  * RlsObserver          recursive-least-squares observer for theta with
//                         known internal dynamics;
//  * AugmentedObserver    joint theta/eta estimation via sensitivity states
//                         (Psi_v, Psi_w) and an inflated Riccati flow, with
//                         an equation-error or output-error regressor;
//  * DecoupledNetworkObserver
//                         one independent single-neuron observer per network
//                         node, sharing only the measured voltage vector.
//
// All observers are ODEs driven by the sampled measurement pair (y_k, u_k)
// held constant over each integration step.

#ifndef CONDEST_OBSERVERS_HPP_
#define CONDEST_OBSERVERS_HPP_

#include <memory>
#include <string>
#include <vector>

#include "condest/integrator.hpp"
#include "condest/model.hpp"

namespace condest {

// ---------------------------------------------------------------------------
// Hyperparameters and saturation

struct Hyperparameters {
  double alpha = 0.1;  // forgetting factor [1/ms], > 0
  double beta = 0.0;   // covariance inflation, >= 0
  double gamma = 1.0;  // gain [1/ms], > 0
  MatrixXd p0;         // initial covariance, SPD

  static Hyperparameters scalar_p0(double alpha, double beta, double gamma,
                                   double p0_scale, int n);
  void validate() const;
};

/// Componentwise smooth box saturation: identity inside [lo, hi], blended to
/// the constant bound +/- margin outside, C^1 everywhere, slope in [0, 1].
/// The margin is a fraction of the box width.
struct SaturationSpec {
  VectorXd lo, hi;
  double margin_frac = 0.05;
  bool enabled = true;

  static SaturationSpec box(VectorXd lo, VectorXd hi,
                            double margin_frac = 0.05);
  static SaturationSpec identity();

  double eval1(double x, int i) const;
  VectorXd eval(const VectorXd& x) const;
  void eval_into(const Eigen::Ref<const VectorXd>& x, VectorXd& out) const;
};

/// (P + P^T)/2, applied after every integration step.
void symmetrize_p(Eigen::Ref<MatrixXd> p);

/// Reduced-order identity observer for the internal states:
/// dw_hat = A(v) w_hat + b(v) with the measured voltage injected and the
/// eta-designated constants at their model values.
VectorXd reduced_observer_rhs(const VectorXd& w_hat, const VectorXd& v,
                              const ModelOps& ops);

// ---------------------------------------------------------------------------
// RLS-based adaptive observer (known internal dynamics)

struct RlsObserverConfig {
  Hyperparameters hyper;
  VectorXd v0, w0, theta0;
};

class RlsObserver : public ObserverRunner {
 public:
  /// `par` must have an empty eta_map; the internal dynamics are evaluated
  /// from the model constants.
  RlsObserver(const NetworkSpec& model, const Parametrization& par,
              RlsObserverConfig cfg);

  int state_size() const override;
  VectorXd initial_state() const override;
  void rhs(double t, const VectorXd& state, const VectorXd& y_held,
           const VectorXd& u_held, VectorXd& dx) const override;
  void post_step(VectorXd& state) const override;
  std::vector<std::string> trace_columns() const override;
  std::string component_name(int index) const override;

  // state accessors (flat layout: v | w | theta | vec(Psi) | vec(P))
  int n_v() const { return ops_.n_v(); }
  int n_w() const { return ops_.n_w(); }
  int n_theta() const { return ops_.n_theta(); }
  VectorXd theta_hat(const VectorXd& state) const;
  VectorXd v_hat(const VectorXd& state) const;
  VectorXd w_hat(const VectorXd& state) const;
  MatrixXd psi(const VectorXd& state) const;
  MatrixXd p(const VectorXd& state) const;

 private:
  ModelOps ops_;
  RlsObserverConfig cfg_;
  std::vector<std::string> columns_;
  // scratch reused across evaluations; a runner instance serves one
  // simulation at a time
  mutable MatrixXd phi_, dpsi_, g_, dp_;
  mutable VectorXd a_, err_, tmp_, pe_, dv_, dpar_, a_int_, b_int_, dw_;
};

// ---------------------------------------------------------------------------
// Augmented adaptive observer (uncertain internal dynamics)

enum class RegressorAt {
  Measurement,  // equation error: Phi, a at the measured voltage
  Estimate,     // output error: Phi, a at the estimated voltage
};

struct AugmentedObserverConfig {
  Hyperparameters hyper;
  VectorXd v0, w0, theta0, eta0;
  SaturationSpec sat_theta;  // applied inside the Psi Jacobian blocks
  SaturationSpec sat_w;      // applied inside the eta Jacobian block
  SaturationSpec sat_eta = SaturationSpec::identity();  // hook, unused
  RegressorAt regressor_at = RegressorAt::Measurement;
};

class AugmentedObserver : public ObserverRunner {
 public:
  AugmentedObserver(const NetworkSpec& model, const Parametrization& par,
                    AugmentedObserverConfig cfg);

  int state_size() const override;
  VectorXd initial_state() const override;
  void rhs(double t, const VectorXd& state, const VectorXd& y_held,
           const VectorXd& u_held, VectorXd& dx) const override;
  void post_step(VectorXd& state) const override;
  std::vector<std::string> trace_columns() const override;
  std::string component_name(int index) const override;

  int n_v() const { return ops_.n_v(); }
  int n_w() const { return ops_.n_w(); }
  int n_theta() const { return ops_.n_theta(); }
  int n_eta() const { return ops_.n_eta(); }
  int n_par() const { return n_theta() + n_eta(); }
  VectorXd v_hat(const VectorXd& state) const;
  VectorXd w_hat(const VectorXd& state) const;
  VectorXd theta_hat(const VectorXd& state) const;
  VectorXd eta_hat(const VectorXd& state) const;
  MatrixXd psi_v(const VectorXd& state) const;
  MatrixXd psi_w(const VectorXd& state) const;
  MatrixXd p(const VectorXd& state) const;

 private:
  ModelOps ops_;
  AugmentedObserverConfig cfg_;
  std::vector<std::string> columns_;
  mutable MatrixXd phi_, jw_, jv_, jeta_, dpsi_v_, dpsi_w_, g_, dp_;
  mutable VectorXd a_, err_, tmp_, pe_, dv_, dpar_, a_int_, b_int_, dw_,
      a_psi_, b_scr_, th_sat_, w_sat_;
};

// ---------------------------------------------------------------------------
// Decoupled per-neuron network observer

/// Runs one independent observer per neuron: neuron i keeps its own Psi_i
/// and P_i and sees other neurons only through the measured voltages inside
/// its synaptic gate dynamics. The per-neuron regressor is evaluated at the
/// neuron's own voltage estimate (output-error form) unless configured
/// otherwise.
class DecoupledNetworkObserver : public ObserverRunner {
 public:
  DecoupledNetworkObserver(const NetworkSpec& model, const Parametrization& par,
                           AugmentedObserverConfig cfg);

  int state_size() const override;
  VectorXd initial_state() const override;
  void rhs(double t, const VectorXd& state, const VectorXd& y_held,
           const VectorXd& u_held, VectorXd& dx) const override;
  void post_step(VectorXd& state) const override;
  std::vector<std::string> trace_columns() const override;
  std::string component_name(int index) const override;

  int n_v() const { return ops_.n_v(); }
  int n_theta() const { return ops_.n_theta(); }
  int n_eta() const { return ops_.n_eta(); }
  /// Per-neuron parameter block (theta_i stacked with eta_i).
  int par_block_size(int neuron) const { return blocks_[neuron].n_par; }
  VectorXd v_hat(const VectorXd& state) const;
  VectorXd w_hat(const VectorXd& state) const;
  /// Stacked per-neuron theta estimates, in global theta order.
  VectorXd theta_hat(const VectorXd& state) const;
  VectorXd eta_hat(const VectorXd& state) const;
  MatrixXd p_block(const VectorXd& state, int neuron) const;
  MatrixXd psi_block(const VectorXd& state, int neuron) const;
  MatrixXd psi_w_block(const VectorXd& state, int neuron) const;

 private:
  struct Block {
    int n_w = 0, n_th = 0, n_et = 0, n_par = 0;
    int w_off = 0;           // gate offset in the network layout
    int th_off = 0;          // theta offset in the global theta vector
    std::vector<int> eta_ix; // global eta indices owned by this neuron
    int state_off = 0;       // offset of this neuron's block in the flat state
    int state_size = 0;
  };

  ModelOps ops_;
  AugmentedObserverConfig cfg_;
  std::vector<Block> blocks_;
  std::vector<std::string> columns_;
  struct BlockScratch {
    MatrixXd phi_i, dpsi, dpsiw, g, dp;
    VectorXd err, tmp, pe, dv, dpar, dw;
  };
  mutable MatrixXd jw_, jv_, jeta_;
  mutable VectorXd v_hat_, w_hat_, theta_, eta_, a_, a_int_, b_int_, a_psi_,
      a_est_, b_scr_, th_sat_, w_sat_;
  mutable MatrixXd phi_;
  mutable std::vector<BlockScratch> bs_;
};

}  // namespace condest

#endif  // CONDEST_OBSERVERS_HPP_
