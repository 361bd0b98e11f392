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
// Numerical verification of the estimation theory along simulated
// trajectories: excitation Gramians, covariance eigenvalue bounds,
// contraction rates, metric eigenvalue bounds and convergence-rate fits.

#ifndef CONDEST_ANALYSIS_HPP_
#define CONDEST_ANALYSIS_HPP_

#include <optional>
#include <vector>

#include "condest/model.hpp"

namespace condest {

// ---------------------------------------------------------------------------
// Persistent excitation

struct PeReport {
  double window_ms = 0.0;
  double stride_ms = 0.0;
  std::vector<double> window_min_eigs;  // min eigenvalue per window start
  double delta = 0.0;                   // infimum over windows
  double threshold = 0.0;               // scale-free cutoff used for verdict
  bool persistently_exciting = false;
};

/// Sliding-window Gramians integral Psi^T Psi d tau (trapezoid) of a sampled
/// regressor, with the verdict cutoff 1e-6 * window * mean ||Psi||^2.
PeReport pe_gramian(const std::vector<MatrixXd>& psi, double dt,
                    double window_ms, double stride_ms);

// ---------------------------------------------------------------------------
// Covariance bounds

struct PBounds {
  double p_lo = 0.0;
  double p_hi = 0.0;
};

/// Closed-form covariance bounds from the forgetting-factor Riccati flow:
///   p_lo = (||P(0)^-1|| + alpha^-1 c^2)^-1
///   p_hi = delta^-1 exp(2 alpha T) (1 + beta delta^-1 alpha^-3
///                                      exp(2 alpha T) c^4)
/// where c bounds the regressor norm (sup ||Phi|| when beta = 0). gamma is
/// accepted for signature uniformity; the bounds do not depend on it.
PBounds theoretical_p_bounds(double alpha, double beta, double gamma,
                             double delta, double window_ms,
                             double regressor_bound, const MatrixXd& p0);

struct PBoundsReport {
  PBounds bounds;
  double empirical_min = 0.0;  // min eigenvalue over t >= T
  double empirical_max = 0.0;  // max eigenvalue over t >= T
  double min_eig_overall = 0.0;  // over all t
  bool pass = false;
  double fail_time = -1.0;     // first violation, -1 if none
};

/// Checks p_lo I <= P(t) <= p_hi I for t >= window_ms over sampled P
/// matrices; also records the overall minimum eigenvalue.
PBoundsReport verify_p_bounds(const std::vector<MatrixXd>& p_samples,
                              const std::vector<double>& t,
                              const PBounds& bounds, double window_ms);

// ---------------------------------------------------------------------------
// Contraction diagnostics

struct ContractionReport {
  std::vector<double> gate_rates;  // 2/tau_max per intrinsic gate,
                                   // 2*b_rate per synaptic gate
  double lambda_w = 0.0;           // minimum of the above
  double lambda_v_margin = 0.0;    // 2 * min_i mu_leak_i / c_i
};

ContractionReport internal_contraction_rate(const NetworkSpec& net);

/// epsilon = (1-zeta)^2 (lambda_w - lambda)(gamma - lambda) lambda_min(M_w)
///           / sup_jacobian_norm^2, with the (1-zeta)^2 factor only when
/// zeta is given. Requires lambda < min(lambda_w, gamma).
double epsilon_formula(double lambda_target, double lambda_w, double gamma,
                       const MatrixXd& m_w, double sup_jacobian_norm,
                       std::optional<double> zeta = std::nullopt);

struct MetricEigenBounds {
  double m_lo = 0.0;
  double m_hi = 0.0;
};

/// Eigenvalue extremes of the block metric M(t) = T(t)^T Mbar(t) T(t) with
///   T = [[I, -Psi/gamma], [0, I]],
///   Mbar = blkdiag(eps I_{n_v}, M_w, eps (gamma P)^-1)
/// evaluated at every sample. psi rows stack Psi_v over Psi_w.
MetricEigenBounds metric_eigen_bounds(const std::vector<MatrixXd>& psi,
                                      const std::vector<MatrixXd>& p_samples,
                                      int n_v, double gamma, double epsilon,
                                      const MatrixXd& m_w);

// ---------------------------------------------------------------------------
// Convergence-rate fit

struct RateFit {
  double lambda_hat = 0.0;  // decay rate (positive = decaying)
  double r_squared = 0.0;
  double t_begin = 0.0, t_end = 0.0;
};

/// Least-squares slope of log ||error|| over [t_begin, t_end]; errors are
/// clipped at 1e-300 before the log.
RateFit convergence_rate_fit(const VectorXd& error_norm,
                             const std::vector<double>& t, double t_begin,
                             double t_end);

}  // namespace condest

#endif  // CONDEST_ANALYSIS_HPP_
