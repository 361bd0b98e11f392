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

#include "condest/observers.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

namespace condest {

// ---------------------------------------------------------------------------
// Hyperparameters / saturation

Hyperparameters Hyperparameters::scalar_p0(double alpha, double beta,
                                           double gamma, double p0_scale,
                                           int n) {
  Hyperparameters h;
  h.alpha = alpha;
  h.beta = beta;
  h.gamma = gamma;
  h.p0 = p0_scale * MatrixXd::Identity(n, n);
  return h;
}

void Hyperparameters::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("hyperparameters: alpha must be > 0");
  if (!(beta >= 0.0)) throw ConfigError("hyperparameters: beta must be >= 0");
  if (!(gamma > 0.0)) throw ConfigError("hyperparameters: gamma must be > 0");
  if (p0.rows() == 0 || p0.rows() != p0.cols())
    throw ConfigError("hyperparameters: P(0) must be square");
  Eigen::LLT<MatrixXd> llt(p0);
  if (llt.info() != Eigen::Success)
    throw ConfigError("hyperparameters: P(0) must be positive definite");
}

SaturationSpec SaturationSpec::box(VectorXd lo, VectorXd hi,
                                   double margin_frac) {
  if (lo.size() != hi.size())
    throw ConfigError("saturation: box bound sizes differ");
  for (int i = 0; i < lo.size(); ++i)
    if (!(hi(i) > lo(i)))
      throw ConfigError("saturation: box must have positive width");
  if (!(margin_frac > 0.0))
    throw ConfigError("saturation: margin fraction must be > 0");
  SaturationSpec s;
  s.lo = std::move(lo);
  s.hi = std::move(hi);
  s.margin_frac = margin_frac;
  s.enabled = true;
  return s;
}

SaturationSpec SaturationSpec::identity() {
  SaturationSpec s;
  s.enabled = false;
  return s;
}

double SaturationSpec::eval1(double x, int i) const {
  if (!enabled) return x;
  const double m = margin_frac * (hi(i) - lo(i));
  if (x > hi(i)) {
    const double s = x - hi(i);
    if (s >= 2.0 * m) return hi(i) + m;
    return hi(i) + s - s * s / (4.0 * m);  // slope 1 at the edge, 0 at 2m
  }
  if (x < lo(i)) {
    const double s = lo(i) - x;
    if (s >= 2.0 * m) return lo(i) - m;
    return lo(i) - (s - s * s / (4.0 * m));
  }
  return x;
}

VectorXd SaturationSpec::eval(const VectorXd& x) const {
  VectorXd out;
  eval_into(x, out);
  return out;
}

void SaturationSpec::eval_into(const Eigen::Ref<const VectorXd>& x,
                               VectorXd& out) const {
  if (!enabled) {
    out = x;
    return;
  }
  if (x.size() != lo.size())
    throw DimensionError("saturation: input dimension mismatch");
  out.resize(x.size());
  for (int i = 0; i < x.size(); ++i) out(i) = eval1(x(i), i);
}

void symmetrize_p(Eigen::Ref<MatrixXd> p) {
  p = ((p + p.transpose()) * 0.5).eval();
}

namespace {

constexpr double kCovarianceFloor = 1e-12;

void check_covariance(const Eigen::Ref<const MatrixXd>& p,
                      const std::string& who) {
  MatrixXd shifted = p;
  shifted.diagonal().array() -= kCovarianceFloor;
  Eigen::LLT<MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) {
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<MatrixXd>(p).eigenvalues().minCoeff();
    throw NumericalError(who + ": covariance lost positive definiteness "
                         "(min eigenvalue " + std::to_string(min_eig) + ")");
  }
}

// Correction terms shared by every observer in this family. Keeping them in
// one function keeps the simple and augmented observers numerically identical
// on the reduction case (empty eta).
//   pe   = P Psi_v^T err
//   dv   = Phi theta + a + gamma err + Psi_v pe
//   dpar = gamma pe
void injection_terms(const Eigen::Ref<const MatrixXd>& phi,
                     const Eigen::Ref<const VectorXd>& a,
                     const Eigen::Ref<const VectorXd>& theta,
                     const Eigen::Ref<const MatrixXd>& psi_v,
                     const Eigen::Ref<const MatrixXd>& p, const VectorXd& err,
                     double gamma, VectorXd& tmp, VectorXd& pe, VectorXd& dv,
                     VectorXd& dpar) {
  tmp.noalias() = psi_v.transpose() * err;
  pe.noalias() = p * tmp;
  dv.noalias() = phi * theta;
  dv += a;
  dv += gamma * err;
  dv.noalias() += psi_v * pe;
  dpar = gamma * pe;
}

// dP = alpha P + beta I - P Psi_v^T Psi_v P, using the symmetry of P
void riccati_rhs(const Eigen::Ref<const MatrixXd>& p,
                 const Eigen::Ref<const MatrixXd>& psi_v, double alpha,
                 double beta, MatrixXd& g, MatrixXd& dp) {
  g.noalias() = psi_v * p;
  dp = alpha * p;
  dp.noalias() -= g.transpose() * g;
  if (beta != 0.0) dp.diagonal().array() += beta;
}

std::vector<std::string> matrix_names(const std::string& prefix, int rows,
                                      int cols) {
  std::vector<std::string> names;
  names.reserve(static_cast<size_t>(rows) * cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r)
      names.push_back(prefix + "_" + std::to_string(r) + "_" +
                      std::to_string(c));
  return names;
}

}  // namespace

// ---------------------------------------------------------------------------
// Reduced-order internal observer

VectorXd reduced_observer_rhs(const VectorXd& w_hat, const VectorXd& v,
                              const ModelOps& ops) {
  VectorXd a_int(ops.n_w()), b_int(ops.n_w());
  ops.internal_dynamics(v, ops.eta_true(), a_int, b_int);
  return (a_int.array() * w_hat.array()).matrix() + b_int;
}

// ---------------------------------------------------------------------------
// RlsObserver

RlsObserver::RlsObserver(const NetworkSpec& model, const Parametrization& par,
                         RlsObserverConfig cfg)
    : ops_(model, par), cfg_(std::move(cfg)) {
  if (par.n_eta() != 0)
    throw ConfigError("RlsObserver expects an empty eta_map");
  cfg_.hyper.validate();
  if (cfg_.hyper.p0.rows() != n_theta())
    throw ConfigError("RlsObserver: P(0) must be n_theta x n_theta");
  if (cfg_.v0.size() != n_v() || cfg_.w0.size() != n_w() ||
      cfg_.theta0.size() != n_theta())
    throw ConfigError("RlsObserver: initial estimate dimension mismatch");

  columns_.reserve(state_size());
  for (int i = 0; i < n_v(); ++i)
    columns_.push_back("vhat_" + std::to_string(i));
  for (int k = 0; k < n_w(); ++k)
    columns_.push_back("what_" + ops_.gate_table().gate(k).label + "_" +
                       std::to_string(ops_.gate_table().gate(k).neuron));
  for (int k = 0; k < n_theta(); ++k)
    columns_.push_back("theta_" + std::to_string(k));
  for (const std::string& s : matrix_names("psi", n_v(), n_theta()))
    columns_.push_back(s);
  for (const std::string& s : matrix_names("P", n_theta(), n_theta()))
    columns_.push_back(s);
}

int RlsObserver::state_size() const {
  const int n_th = n_theta();
  return n_v() + n_w() + n_th + n_v() * n_th + n_th * n_th;
}

VectorXd RlsObserver::initial_state() const {
  VectorXd x = VectorXd::Zero(state_size());
  x.head(n_v()) = cfg_.v0;
  x.segment(n_v(), n_w()) = cfg_.w0;
  x.segment(n_v() + n_w(), n_theta()) = cfg_.theta0;
  // Psi(0) = 0
  Eigen::Map<MatrixXd>(x.data() + n_v() + n_w() + n_theta() +
                           n_v() * n_theta(),
                       n_theta(), n_theta()) = cfg_.hyper.p0;
  return x;
}

void RlsObserver::rhs(double /*t*/, const VectorXd& state, const VectorXd& y,
                      const VectorXd& u, VectorXd& dx) const {
  const int nv = n_v(), nw = n_w(), nth = n_theta();
  const double gamma = cfg_.hyper.gamma;
  const auto w_hat = state.segment(nv, nw);
  const auto theta = state.segment(nv + nw, nth);
  Eigen::Map<const MatrixXd> psi(state.data() + nv + nw + nth, nv, nth);
  Eigen::Map<const MatrixXd> p(state.data() + nv + nw + nth + nv * nth, nth,
                               nth);

  ops_.regressor_phi_into(y, w_hat, u, phi_);
  a_.resize(nv);
  ops_.drift_a_into(y, w_hat, u, a_);
  err_ = y - state.head(nv);
  injection_terms(phi_, a_, theta, psi, p, err_, gamma, tmp_, pe_, dv_, dpar_);

  a_int_.resize(nw);
  b_int_.resize(nw);
  ops_.internal_dynamics(y, VectorXd(), a_int_, b_int_);
  dw_ = (a_int_.array() * w_hat.array()).matrix() + b_int_;

  dpsi_ = (-gamma) * psi;
  dpsi_ += gamma * phi_;
  riccati_rhs(p, psi, cfg_.hyper.alpha, 0.0, g_, dp_);

  dx.head(nv) = dv_;
  dx.segment(nv, nw) = dw_;
  dx.segment(nv + nw, nth) = dpar_;
  Eigen::Map<MatrixXd>(dx.data() + nv + nw + nth, nv, nth) = dpsi_;
  Eigen::Map<MatrixXd>(dx.data() + nv + nw + nth + nv * nth, nth, nth) = dp_;
}

void RlsObserver::post_step(VectorXd& state) const {
  const int off = n_v() + n_w() + n_theta() + n_v() * n_theta();
  Eigen::Map<MatrixXd> p(state.data() + off, n_theta(), n_theta());
  symmetrize_p(p);
  check_covariance(p, "RlsObserver");
}

std::vector<std::string> RlsObserver::trace_columns() const { return columns_; }

std::string RlsObserver::component_name(int index) const {
  return columns_[static_cast<size_t>(index)];
}

VectorXd RlsObserver::v_hat(const VectorXd& s) const { return s.head(n_v()); }
VectorXd RlsObserver::w_hat(const VectorXd& s) const {
  return s.segment(n_v(), n_w());
}
VectorXd RlsObserver::theta_hat(const VectorXd& s) const {
  return s.segment(n_v() + n_w(), n_theta());
}
MatrixXd RlsObserver::psi(const VectorXd& s) const {
  return Eigen::Map<const MatrixXd>(s.data() + n_v() + n_w() + n_theta(),
                                    n_v(), n_theta());
}
MatrixXd RlsObserver::p(const VectorXd& s) const {
  return Eigen::Map<const MatrixXd>(
      s.data() + n_v() + n_w() + n_theta() + n_v() * n_theta(), n_theta(),
      n_theta());
}

// ---------------------------------------------------------------------------
// AugmentedObserver

AugmentedObserver::AugmentedObserver(const NetworkSpec& model,
                                     const Parametrization& par,
                                     AugmentedObserverConfig cfg)
    : ops_(model, par), cfg_(std::move(cfg)) {
  cfg_.hyper.validate();
  const int np = n_par();
  if (cfg_.hyper.p0.rows() != np)
    throw ConfigError("AugmentedObserver: P(0) must be (n_theta+n_eta)^2");
  if (cfg_.v0.size() != n_v() || cfg_.w0.size() != n_w() ||
      cfg_.theta0.size() != n_theta() || cfg_.eta0.size() != n_eta())
    throw ConfigError("AugmentedObserver: initial estimate dimension mismatch");
  if (cfg_.sat_theta.enabled && cfg_.sat_theta.lo.size() != n_theta())
    throw ConfigError("AugmentedObserver: theta saturation box size mismatch");
  if (cfg_.sat_w.enabled && cfg_.sat_w.lo.size() != n_w())
    throw ConfigError("AugmentedObserver: w saturation box size mismatch");

  columns_.reserve(state_size());
  for (int i = 0; i < n_v(); ++i)
    columns_.push_back("vhat_" + std::to_string(i));
  for (int k = 0; k < n_w(); ++k)
    columns_.push_back("what_" + ops_.gate_table().gate(k).label + "_" +
                       std::to_string(ops_.gate_table().gate(k).neuron));
  for (int k = 0; k < n_theta(); ++k)
    columns_.push_back("theta_" + std::to_string(k));
  for (int k = 0; k < n_eta(); ++k)
    columns_.push_back("eta_" + std::to_string(k));
  for (const std::string& s : matrix_names("psi_v", n_v(), np))
    columns_.push_back(s);
  for (const std::string& s : matrix_names("psi_w", n_w(), np))
    columns_.push_back(s);
  for (const std::string& s : matrix_names("P", np, np)) columns_.push_back(s);
}

int AugmentedObserver::state_size() const {
  const int np = n_par();
  return n_v() + n_w() + np + n_v() * np + n_w() * np + np * np;
}

VectorXd AugmentedObserver::initial_state() const {
  const int np = n_par();
  VectorXd x = VectorXd::Zero(state_size());
  x.head(n_v()) = cfg_.v0;
  x.segment(n_v(), n_w()) = cfg_.w0;
  x.segment(n_v() + n_w(), n_theta()) = cfg_.theta0;
  x.segment(n_v() + n_w() + n_theta(), n_eta()) = cfg_.eta0;
  // Psi_v(0) = Psi_w(0) = 0
  const int p_off = n_v() + n_w() + np + n_v() * np + n_w() * np;
  Eigen::Map<MatrixXd>(x.data() + p_off, np, np) = cfg_.hyper.p0;
  return x;
}

void AugmentedObserver::rhs(double /*t*/, const VectorXd& state,
                            const VectorXd& y, const VectorXd& u,
                            VectorXd& dx) const {
  const int nv = n_v(), nw = n_w(), nth = n_theta(), net = n_eta();
  const int np = nth + net;
  const double gamma = cfg_.hyper.gamma;
  const bool output_error = cfg_.regressor_at == RegressorAt::Estimate;

  const auto v_hat = state.head(nv);
  const auto w_hat = state.segment(nv, nw);
  const auto theta = state.segment(nv + nw, nth);
  const auto eta = state.segment(nv + nw + nth, net);
  const int pv_off = nv + nw + np;
  const int pw_off = pv_off + nv * np;
  const int p_off = pw_off + nw * np;
  Eigen::Map<const MatrixXd> psi_v(state.data() + pv_off, nv, np);
  Eigen::Map<const MatrixXd> psi_w(state.data() + pw_off, nw, np);
  Eigen::Map<const MatrixXd> p(state.data() + p_off, np, np);

  const ModelOps::ConstVec v_arg =
      output_error ? ModelOps::ConstVec(v_hat) : ModelOps::ConstVec(y);
  ops_.regressor_phi_into(v_arg, w_hat, u, phi_);
  a_.resize(nv);
  ops_.drift_a_into(v_arg, w_hat, u, a_);
  err_ = y - v_hat;
  injection_terms(phi_, a_, theta, psi_v, p, err_, gamma, tmp_, pe_, dv_,
                  dpar_);

  // internal observer state driven by the measurement
  a_int_.resize(nw);
  b_int_.resize(nw);
  ops_.internal_dynamics(y, eta, a_int_, b_int_);
  dw_ = (a_int_.array() * w_hat.array()).matrix() + b_int_;
  dw_.noalias() += psi_w * pe_;

  // sensitivity dynamics
  cfg_.sat_theta.eval_into(theta, th_sat_);
  ops_.jacobian_output_w_into(v_arg, w_hat, u, th_sat_, jw_);
  dpsi_v_ = (-gamma) * psi_v + jw_ * psi_w;
  if (output_error) {
    ops_.jacobian_output_v_into(v_arg, w_hat, u, th_sat_, jv_);
    dpsi_v_.noalias() += jv_ * psi_v;
  }
  dpsi_v_.leftCols(nth) += gamma * phi_;

  a_psi_.resize(nw);
  if (output_error) {
    b_scr_.resize(nw);
    ops_.internal_dynamics(v_hat, eta, a_psi_, b_scr_);
  } else {
    a_psi_ = a_int_;
  }
  dpsi_w_ = a_psi_.asDiagonal() * psi_w;
  if (net > 0) {
    cfg_.sat_w.eval_into(w_hat, w_sat_);
    ops_.jacobian_internal_eta_into(y, eta, w_sat_, jeta_);
    dpsi_w_.rightCols(net) += gamma * jeta_;
  }

  riccati_rhs(p, psi_v, cfg_.hyper.alpha, cfg_.hyper.beta, g_, dp_);

  dx.head(nv) = dv_;
  dx.segment(nv, nw) = dw_;
  dx.segment(nv + nw, np) = dpar_;
  Eigen::Map<MatrixXd>(dx.data() + pv_off, nv, np) = dpsi_v_;
  Eigen::Map<MatrixXd>(dx.data() + pw_off, nw, np) = dpsi_w_;
  Eigen::Map<MatrixXd>(dx.data() + p_off, np, np) = dp_;
}

void AugmentedObserver::post_step(VectorXd& state) const {
  const int np = n_par();
  const int p_off = n_v() + n_w() + np + n_v() * np + n_w() * np;
  Eigen::Map<MatrixXd> p(state.data() + p_off, np, np);
  symmetrize_p(p);
  check_covariance(p, "AugmentedObserver");
}

std::vector<std::string> AugmentedObserver::trace_columns() const {
  return columns_;
}

std::string AugmentedObserver::component_name(int index) const {
  return columns_[static_cast<size_t>(index)];
}

VectorXd AugmentedObserver::v_hat(const VectorXd& s) const {
  return s.head(n_v());
}
VectorXd AugmentedObserver::w_hat(const VectorXd& s) const {
  return s.segment(n_v(), n_w());
}
VectorXd AugmentedObserver::theta_hat(const VectorXd& s) const {
  return s.segment(n_v() + n_w(), n_theta());
}
VectorXd AugmentedObserver::eta_hat(const VectorXd& s) const {
  return s.segment(n_v() + n_w() + n_theta(), n_eta());
}
MatrixXd AugmentedObserver::psi_v(const VectorXd& s) const {
  const int np = n_par();
  return Eigen::Map<const MatrixXd>(s.data() + n_v() + n_w() + np, n_v(), np);
}
MatrixXd AugmentedObserver::psi_w(const VectorXd& s) const {
  const int np = n_par();
  return Eigen::Map<const MatrixXd>(
      s.data() + n_v() + n_w() + np + n_v() * np, n_w(), np);
}
MatrixXd AugmentedObserver::p(const VectorXd& s) const {
  const int np = n_par();
  return Eigen::Map<const MatrixXd>(
      s.data() + n_v() + n_w() + np + n_v() * np + n_w() * np, np, np);
}

// ---------------------------------------------------------------------------
// DecoupledNetworkObserver

DecoupledNetworkObserver::DecoupledNetworkObserver(
    const NetworkSpec& model, const Parametrization& par,
    AugmentedObserverConfig cfg)
    : ops_(model, par), cfg_(std::move(cfg)) {
  cfg_.hyper.validate();
  const int np_total = n_theta() + n_eta();
  if (cfg_.hyper.p0.rows() != np_total)
    throw ConfigError(
        "DecoupledNetworkObserver: P(0) must cover the stacked parameters");
  if (cfg_.v0.size() != n_v() || cfg_.w0.size() != ops_.n_w() ||
      cfg_.theta0.size() != n_theta() || cfg_.eta0.size() != n_eta())
    throw ConfigError(
        "DecoupledNetworkObserver: initial estimate dimension mismatch");
  if (cfg_.sat_theta.enabled && cfg_.sat_theta.lo.size() != n_theta())
    throw ConfigError(
        "DecoupledNetworkObserver: theta saturation box size mismatch");
  if (cfg_.sat_w.enabled && cfg_.sat_w.lo.size() != ops_.n_w())
    throw ConfigError(
        "DecoupledNetworkObserver: w saturation box size mismatch");

  blocks_.resize(n_v());
  bs_.resize(n_v());
  int state_off = 0;
  for (int i = 0; i < n_v(); ++i) {
    Block& b = blocks_[i];
    b.n_w = ops_.gate_table().neuron_gate_count(i);
    b.w_off = ops_.gate_table().neuron_offset(i);
    b.n_th = ops_.theta_block_size(i);
    b.th_off = ops_.theta_offset(i);
    for (int j = 0; j < par.n_eta(); ++j)
      if (ops_.gate_table().gate(par.eta[j].gate).neuron == i)
        b.eta_ix.push_back(j);
    b.n_et = static_cast<int>(b.eta_ix.size());
    b.n_par = b.n_th + b.n_et;
    b.state_off = state_off;
    b.state_size =
        1 + b.n_w + b.n_par + b.n_par + b.n_w * b.n_par + b.n_par * b.n_par;
    state_off += b.state_size;
  }

  for (int i = 0; i < n_v(); ++i) {
    const Block& b = blocks_[i];
    const std::string suffix = std::to_string(i);
    columns_.push_back("vhat_" + suffix);
    for (int k = 0; k < b.n_w; ++k)
      columns_.push_back("what_" +
                         ops_.gate_table().gate(b.w_off + k).label + "_" +
                         suffix);
    for (int k = 0; k < b.n_th; ++k)
      columns_.push_back("theta_" + std::to_string(b.th_off + k));
    for (int k = 0; k < b.n_et; ++k)
      columns_.push_back("eta_" + std::to_string(b.eta_ix[k]));
    for (const std::string& s : matrix_names("psi" + suffix, 1, b.n_par))
      columns_.push_back(s);
    for (const std::string& s :
         matrix_names("psiw" + suffix, b.n_w, b.n_par))
      columns_.push_back(s);
    for (const std::string& s : matrix_names("P" + suffix, b.n_par, b.n_par))
      columns_.push_back(s);
  }
}

int DecoupledNetworkObserver::state_size() const {
  return blocks_.back().state_off + blocks_.back().state_size;
}

VectorXd DecoupledNetworkObserver::initial_state() const {
  VectorXd x = VectorXd::Zero(state_size());
  for (int i = 0; i < n_v(); ++i) {
    const Block& b = blocks_[i];
    int off = b.state_off;
    x(off) = cfg_.v0(i);
    x.segment(off + 1, b.n_w) = cfg_.w0.segment(b.w_off, b.n_w);
    x.segment(off + 1 + b.n_w, b.n_th) = cfg_.theta0.segment(b.th_off, b.n_th);
    for (int k = 0; k < b.n_et; ++k)
      x(off + 1 + b.n_w + b.n_th + k) = cfg_.eta0(b.eta_ix[k]);
    // psi blocks start at zero; the P block is a slice of the global P(0)
    const int p_off = off + 1 + b.n_w + b.n_par + b.n_par + b.n_w * b.n_par;
    Eigen::Map<MatrixXd> p(x.data() + p_off, b.n_par, b.n_par);
    for (int r = 0; r < b.n_par; ++r)
      for (int c = 0; c < b.n_par; ++c) {
        const int gr = r < b.n_th ? b.th_off + r
                                  : n_theta() + b.eta_ix[r - b.n_th];
        const int gc = c < b.n_th ? b.th_off + c
                                  : n_theta() + b.eta_ix[c - b.n_th];
        p(r, c) = cfg_.hyper.p0(gr, gc);
      }
  }
  return x;
}

void DecoupledNetworkObserver::rhs(double /*t*/, const VectorXd& state,
                                   const VectorXd& y, const VectorXd& u,
                                   VectorXd& dx) const {
  const int nv = n_v(), nw = ops_.n_w(), nth = n_theta(), net = n_eta();
  const double gamma = cfg_.hyper.gamma;
  const bool output_error = cfg_.regressor_at == RegressorAt::Estimate;

  // stack the per-neuron estimates so the model ops run once per evaluation
  v_hat_.resize(nv);
  w_hat_.resize(nw);
  theta_.resize(nth);
  eta_.resize(net);
  for (int i = 0; i < nv; ++i) {
    const Block& b = blocks_[i];
    v_hat_(i) = state(b.state_off);
    w_hat_.segment(b.w_off, b.n_w) = state.segment(b.state_off + 1, b.n_w);
    theta_.segment(b.th_off, b.n_th) =
        state.segment(b.state_off + 1 + b.n_w, b.n_th);
    for (int k = 0; k < b.n_et; ++k)
      eta_(b.eta_ix[k]) = state(b.state_off + 1 + b.n_w + b.n_th + k);
  }

  const VectorXd& v_arg = output_error ? v_hat_ : y;
  ops_.regressor_phi_into(v_arg, w_hat_, u, phi_);
  a_.resize(nv);
  ops_.drift_a_into(v_arg, w_hat_, u, a_);

  a_int_.resize(nw);
  b_int_.resize(nw);
  ops_.internal_dynamics(y, eta_, a_int_, b_int_);

  cfg_.sat_theta.eval_into(theta_, th_sat_);
  ops_.jacobian_output_w_into(v_arg, w_hat_, u, th_sat_, jw_);
  if (output_error) ops_.jacobian_output_v_into(v_arg, w_hat_, u, th_sat_, jv_);

  // A_Psi internal block: own-gate entries at the neuron's voltage argument,
  // presynaptic-driven gates at the measured presynaptic voltage
  a_psi_ = a_int_;
  if (output_error) {
    a_est_.resize(nw);
    b_scr_.resize(nw);
    ops_.internal_dynamics(v_hat_, eta_, a_est_, b_scr_);
    for (int k = 0; k < nw; ++k) {
      const GateRef& g = ops_.gate_table().gate(k);
      if (g.v_source == g.neuron) a_psi_(k) = a_est_(k);
    }
  }

  if (net > 0) {
    cfg_.sat_w.eval_into(w_hat_, w_sat_);
    ops_.jacobian_internal_eta_into(y, eta_, w_sat_, jeta_);
  }

  for (int i = 0; i < nv; ++i) {
    const Block& b = blocks_[i];
    BlockScratch& s = bs_[i];
    const int off = b.state_off;
    const int psi_off = off + 1 + b.n_w + b.n_par;
    const int psiw_off = psi_off + b.n_par;
    const int p_off = psiw_off + b.n_w * b.n_par;
    Eigen::Map<const MatrixXd> psi_i(state.data() + psi_off, 1, b.n_par);
    Eigen::Map<const MatrixXd> psiw_i(state.data() + psiw_off, b.n_w,
                                      b.n_par);
    Eigen::Map<const MatrixXd> p_i(state.data() + p_off, b.n_par, b.n_par);

    s.err.resize(1);
    s.err(0) = y(i) - v_hat_(i);
    s.phi_i = phi_.block(i, b.th_off, 1, b.n_th);
    injection_terms(s.phi_i, a_.segment(i, 1), theta_.segment(b.th_off, b.n_th),
                    psi_i, p_i, s.err, gamma, s.tmp, s.pe, s.dv, s.dpar);

    s.dw = (a_int_.segment(b.w_off, b.n_w).array() *
            w_hat_.segment(b.w_off, b.n_w).array())
               .matrix() +
           b_int_.segment(b.w_off, b.n_w);
    s.dw.noalias() += psiw_i * s.pe;

    s.dpsi = (-gamma) * psi_i + jw_.block(i, b.w_off, 1, b.n_w) * psiw_i;
    if (output_error) s.dpsi.noalias() += jv_.block(i, i, 1, 1) * psi_i;
    s.dpsi.leftCols(b.n_th) += gamma * s.phi_i;

    s.dpsiw = a_psi_.segment(b.w_off, b.n_w).asDiagonal() * psiw_i;
    for (int k = 0; k < b.n_et; ++k)
      s.dpsiw.col(b.n_th + k) +=
          gamma * jeta_.block(b.w_off, b.eta_ix[k], b.n_w, 1);

    riccati_rhs(p_i, psi_i, cfg_.hyper.alpha, cfg_.hyper.beta, s.g, s.dp);

    dx(off) = s.dv(0);
    dx.segment(off + 1, b.n_w) = s.dw;
    dx.segment(off + 1 + b.n_w, b.n_par) = s.dpar;
    Eigen::Map<MatrixXd>(dx.data() + psi_off, 1, b.n_par) = s.dpsi;
    Eigen::Map<MatrixXd>(dx.data() + psiw_off, b.n_w, b.n_par) = s.dpsiw;
    Eigen::Map<MatrixXd>(dx.data() + p_off, b.n_par, b.n_par) = s.dp;
  }
}

void DecoupledNetworkObserver::post_step(VectorXd& state) const {
  for (int i = 0; i < n_v(); ++i) {
    const Block& b = blocks_[i];
    const int p_off = b.state_off + 1 + b.n_w + b.n_par + b.n_par +
                      b.n_w * b.n_par;
    Eigen::Map<MatrixXd> p(state.data() + p_off, b.n_par, b.n_par);
    symmetrize_p(p);
    check_covariance(p, "DecoupledNetworkObserver neuron " +
                            std::to_string(i));
  }
}

std::vector<std::string> DecoupledNetworkObserver::trace_columns() const {
  return columns_;
}

std::string DecoupledNetworkObserver::component_name(int index) const {
  return columns_[static_cast<size_t>(index)];
}

VectorXd DecoupledNetworkObserver::v_hat(const VectorXd& s) const {
  VectorXd v(n_v());
  for (int i = 0; i < n_v(); ++i) v(i) = s(blocks_[i].state_off);
  return v;
}

VectorXd DecoupledNetworkObserver::w_hat(const VectorXd& s) const {
  VectorXd w(ops_.n_w());
  for (int i = 0; i < n_v(); ++i) {
    const Block& b = blocks_[i];
    w.segment(b.w_off, b.n_w) = s.segment(b.state_off + 1, b.n_w);
  }
  return w;
}

VectorXd DecoupledNetworkObserver::theta_hat(const VectorXd& s) const {
  VectorXd th(n_theta());
  for (int i = 0; i < n_v(); ++i) {
    const Block& b = blocks_[i];
    th.segment(b.th_off, b.n_th) = s.segment(b.state_off + 1 + b.n_w, b.n_th);
  }
  return th;
}

VectorXd DecoupledNetworkObserver::eta_hat(const VectorXd& s) const {
  VectorXd et(n_eta());
  for (int i = 0; i < n_v(); ++i) {
    const Block& b = blocks_[i];
    for (int k = 0; k < b.n_et; ++k)
      et(b.eta_ix[k]) = s(b.state_off + 1 + b.n_w + b.n_th + k);
  }
  return et;
}

MatrixXd DecoupledNetworkObserver::p_block(const VectorXd& s, int i) const {
  const Block& b = blocks_[i];
  const int p_off =
      b.state_off + 1 + b.n_w + b.n_par + b.n_par + b.n_w * b.n_par;
  return Eigen::Map<const MatrixXd>(s.data() + p_off, b.n_par, b.n_par);
}

MatrixXd DecoupledNetworkObserver::psi_block(const VectorXd& s, int i) const {
  const Block& b = blocks_[i];
  const int psi_off = b.state_off + 1 + b.n_w + b.n_par;
  return Eigen::Map<const MatrixXd>(s.data() + psi_off, 1, b.n_par);
}

MatrixXd DecoupledNetworkObserver::psi_w_block(const VectorXd& s, int i) const {
  const Block& b = blocks_[i];
  const int psiw_off = b.state_off + 1 + b.n_w + b.n_par + b.n_par;
  return Eigen::Map<const MatrixXd>(s.data() + psiw_off, b.n_w, b.n_par);
}

}  // namespace condest
