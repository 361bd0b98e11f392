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

#include "condest/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace condest {

PeReport pe_gramian(const std::vector<MatrixXd>& psi, double dt,
                    double window_ms, double stride_ms) {
  if (psi.size() < 2) throw ConfigError("pe_gramian: need at least 2 samples");
  if (!(window_ms > 0.0) || !(stride_ms > 0.0))
    throw ConfigError("pe_gramian: window and stride must be positive");
  const int n = static_cast<int>(psi.size());
  const int win = static_cast<int>(std::llround(window_ms / dt));
  const int stride = std::max(1, static_cast<int>(std::llround(stride_ms / dt)));
  if (win < 1 || win >= n)
    throw ConfigError("pe_gramian: window longer than trajectory");
  const int n_th = static_cast<int>(psi.front().cols());

  // prefix sums of the integrand for O(1) window integrals
  std::vector<MatrixXd> prefix(n + 1, MatrixXd::Zero(n_th, n_th));
  for (int k = 0; k < n; ++k)
    prefix[k + 1] = prefix[k] + psi[k].transpose() * psi[k];
  auto window_gramian = [&](int i) {
    // trapezoid over samples [i, i+win]
    MatrixXd g = prefix[i + win + 1] - prefix[i];
    g -= 0.5 * (psi[i].transpose() * psi[i]);
    g -= 0.5 * (psi[i + win].transpose() * psi[i + win]);
    return (dt * g).eval();
  };

  PeReport report;
  report.window_ms = win * dt;
  report.stride_ms = stride * dt;
  double delta = std::numeric_limits<double>::infinity();
  for (int i = 0; i + win < n; i += stride) {
    const MatrixXd g = window_gramian(i);
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<MatrixXd>(g).eigenvalues().minCoeff();
    report.window_min_eigs.push_back(min_eig);
    delta = std::min(delta, min_eig);
  }
  report.delta = delta;

  double mean_sq = 0.0;
  for (const MatrixXd& m : psi) {
    const double nrm = m.norm() > 0.0
                           ? m.jacobiSvd().singularValues()(0)
                           : 0.0;
    mean_sq += nrm * nrm;
  }
  mean_sq /= static_cast<double>(n);
  report.threshold = 1e-6 * report.window_ms * mean_sq;
  report.persistently_exciting = report.delta > report.threshold;
  return report;
}

PBounds theoretical_p_bounds(double alpha, double beta, double /*gamma*/,
                             double delta, double window_ms,
                             double regressor_bound, const MatrixXd& p0) {
  if (!(delta > 0.0))
    throw NotPersistentlyExcitingError(
        "theoretical_p_bounds: delta must be positive (regressor not PE)");
  const double c2 = regressor_bound * regressor_bound;
  const double p0_inv_norm =
      p0.inverse().jacobiSvd().singularValues()(0);
  PBounds b;
  b.p_lo = 1.0 / (p0_inv_norm + c2 / alpha);
  const double e2at = std::exp(2.0 * alpha * window_ms);
  b.p_hi = (e2at / delta) *
           (1.0 + beta / delta * e2at * c2 * c2 /
                      (alpha * alpha * alpha));
  return b;
}

PBoundsReport verify_p_bounds(const std::vector<MatrixXd>& p_samples,
                              const std::vector<double>& t,
                              const PBounds& bounds, double window_ms) {
  if (p_samples.size() != t.size() || p_samples.empty())
    throw ConfigError("verify_p_bounds: sample/time size mismatch");
  PBoundsReport report;
  report.bounds = bounds;
  report.empirical_min = std::numeric_limits<double>::infinity();
  report.empirical_max = -std::numeric_limits<double>::infinity();
  report.min_eig_overall = std::numeric_limits<double>::infinity();
  report.pass = true;
  for (size_t k = 0; k < p_samples.size(); ++k) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(p_samples[k]);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    report.min_eig_overall = std::min(report.min_eig_overall, lo);
    if (t[k] < window_ms) continue;
    report.empirical_min = std::min(report.empirical_min, lo);
    report.empirical_max = std::max(report.empirical_max, hi);
    if ((lo < bounds.p_lo || hi > bounds.p_hi) && report.pass) {
      report.pass = false;
      report.fail_time = t[k];
    }
  }
  return report;
}

ContractionReport internal_contraction_rate(const NetworkSpec& net) {
  net.validate();
  ContractionReport report;
  GateTable gates(net);
  report.lambda_w = std::numeric_limits<double>::infinity();
  for (int k = 0; k < gates.n_w(); ++k) {
    const GateRef& g = gates.gate(k);
    const NeuronSpec& nrn = net.neurons[g.neuron];
    double rate;
    if (g.kind == GateKind::Synaptic) {
      rate = 2.0 * nrn.synapses[g.index].kin.b_rate;  // tau_syn <= 1/b
    } else {
      const IonicCurrentSpec& cur = nrn.currents[g.index];
      const GatingKinetics& kin =
          (g.kind == GateKind::Activation) ? cur.m_kin : cur.h_kin;
      rate = 2.0 / kin.tau_max;
    }
    report.gate_rates.push_back(rate);
    report.lambda_w = std::min(report.lambda_w, rate);
  }
  report.lambda_v_margin = std::numeric_limits<double>::infinity();
  for (const NeuronSpec& nrn : net.neurons)
    report.lambda_v_margin =
        std::min(report.lambda_v_margin, 2.0 * nrn.mu_leak / nrn.c);
  return report;
}

double epsilon_formula(double lambda_target, double lambda_w, double gamma,
                       const MatrixXd& m_w, double sup_jacobian_norm,
                       std::optional<double> zeta) {
  if (!(lambda_target < std::min(lambda_w, gamma)))
    throw ConfigError(
        "epsilon_formula: rate target must satisfy lambda < min(lambda_w, "
        "gamma)");
  if (!(sup_jacobian_norm > 0.0))
    throw ConfigError("epsilon_formula: jacobian bound must be positive");
  const double mw_min =
      Eigen::SelfAdjointEigenSolver<MatrixXd>(m_w).eigenvalues().minCoeff();
  double eps = (lambda_w - lambda_target) * (gamma - lambda_target) * mw_min /
               (sup_jacobian_norm * sup_jacobian_norm);
  if (zeta) eps *= (1.0 - *zeta) * (1.0 - *zeta);
  return eps;
}

MetricEigenBounds metric_eigen_bounds(const std::vector<MatrixXd>& psi,
                                      const std::vector<MatrixXd>& p_samples,
                                      int n_v, double gamma, double epsilon,
                                      const MatrixXd& m_w) {
  if (psi.size() != p_samples.size() || psi.empty())
    throw ConfigError("metric_eigen_bounds: sample size mismatch");
  const int n_x = static_cast<int>(psi.front().rows());  // n_v + n_w
  const int n_p = static_cast<int>(psi.front().cols());
  const int n_w = n_x - n_v;
  if (m_w.rows() != n_w)
    throw DimensionError("metric_eigen_bounds: M_w dimension mismatch");
  const int n = n_x + n_p;

  MetricEigenBounds out;
  out.m_lo = std::numeric_limits<double>::infinity();
  out.m_hi = -std::numeric_limits<double>::infinity();
  MatrixXd t = MatrixXd::Identity(n, n);
  MatrixXd mbar = MatrixXd::Zero(n, n);
  mbar.topLeftCorner(n_v, n_v) = epsilon * MatrixXd::Identity(n_v, n_v);
  mbar.block(n_v, n_v, n_w, n_w) = m_w;
  for (size_t k = 0; k < psi.size(); ++k) {
    t.topRightCorner(n_x, n_p) = -psi[k] / gamma;
    mbar.bottomRightCorner(n_p, n_p) =
        (epsilon / gamma) * p_samples[k].inverse();
    const MatrixXd m = t.transpose() * mbar * t;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
    out.m_lo = std::min(out.m_lo, eig.eigenvalues().minCoeff());
    out.m_hi = std::max(out.m_hi, eig.eigenvalues().maxCoeff());
  }
  return out;
}

RateFit convergence_rate_fit(const VectorXd& error_norm,
                             const std::vector<double>& t, double t_begin,
                             double t_end) {
  if (error_norm.size() != static_cast<Eigen::Index>(t.size()))
    throw ConfigError("convergence_rate_fit: size mismatch");
  RateFit fit;
  fit.t_begin = t_begin;
  fit.t_end = t_end;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  int n = 0;
  for (size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t_begin || t[k] > t_end) continue;
    const double e = std::max(error_norm(static_cast<Eigen::Index>(k)),
                              1e-300);
    const double x = t[k];
    const double y = std::log(e);
    sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
    ++n;
  }
  if (n < 2) throw ConfigError("convergence_rate_fit: window has < 2 samples");
  const double denom = n * sxx - sx * sx;
  const double slope = (n * sxy - sx * sy) / denom;
  fit.lambda_hat = -slope;
  const double ss_tot = syy - sy * sy / n;
  const double ss_res =
      ss_tot - slope * slope * denom / n;  // algebra of simple regression
  fit.r_squared = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

}  // namespace condest
