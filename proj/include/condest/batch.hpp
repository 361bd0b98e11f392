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
// Offline filtered least squares with forgetting (the recursive observer's
// batch twin) and the output-error cost-landscape study.

#ifndef CONDEST_BATCH_HPP_
#define CONDEST_BATCH_HPP_

#include <optional>
#include <vector>

#include "condest/integrator.hpp"
#include "condest/model.hpp"

namespace condest {

// ---------------------------------------------------------------------------
// First-order filtering

/// Output of xdot = -gamma x + gamma * input, x(0) = 0, integrated with the
/// shared RK4 stepping and the input held constant over each step. One row
/// per sample, matching the input layout.
MatrixXd filter_first_order(const MatrixXd& samples, double gamma, double dt);

// ---------------------------------------------------------------------------
// Filtered regressor dataset

/// Everything the batch normal equation needs, on the trajectory grid:
/// the filtered regressor Psi (integrated from zero alongside the reduced
/// internal observer), the filtered derivative target obtained through the
/// exact identity gamma*(y - Hy) = H dy/dt, and the filtered drift H a_hat.
struct FilteredDataset {
  double dt = 0.0;
  std::vector<double> t;
  std::vector<MatrixXd> psi;  // per sample, n_v x n_theta
  MatrixXd hv_dot;            // samples x n_v
  MatrixXd ha;                // samples x n_v
  MatrixXd w_hat;             // samples x n_w (reduced-observer trajectory)

  int samples() const { return static_cast<int>(t.size()); }
};

/// Re-integrates the reduced observer, the regressor filter and the data
/// filters over a recorded trajectory, reproducing exactly what an attached
/// online observer would have seen (same RK4 grid, measurements held per
/// step). w_hat0 must match the online observer's initialization for the
/// recursive/batch equivalence to be exact.
FilteredDataset build_filtered_dataset(const Trajectory& traj,
                                       const NetworkSpec& net,
                                       const Parametrization& par,
                                       double gamma, const VectorXd& w_hat0);

// ---------------------------------------------------------------------------
// Batch least squares with forgetting

struct BatchSolution {
  struct AtTime {
    double t = 0.0;
    VectorXd theta;
    double r_min_eig = 0.0;
    double cost = 0.0;  // weighted residual cost, (1/T) normalized
  };
  std::vector<AtTime> solutions;
};

/// Solves R(T) theta = integral_0^T exp(-alpha (T - tau)) Psi^T (Hv_dot - Ha)
/// with R(T) = exp(-alpha T) P0^{-1} + integral exp(-alpha(T-tau)) Psi^T Psi,
/// trapezoidal quadrature on the dataset grid. T entries must lie on the
/// grid. Throws NotPersistentlyExcitingError when R(T) is numerically
/// singular.
BatchSolution batch_ls_solve(const FilteredDataset& data, double alpha,
                             const MatrixXd& p0, const std::vector<double>& t_list);

// ---------------------------------------------------------------------------
// Output-error cost

struct OutputErrorCost {
  double cost = 0.0;     // mV^2 per ms
  bool diverged = false; // integration blow-up, cost reported as +inf
  int spikes = 0;        // predictor spike count over [0, T]
};

/// Free-running predictor cost: the candidate model is simulated open loop
/// (no voltage injection, internal states driven by the predicted voltage)
/// from the recorded initial state, and the mean squared voltage error over
/// [0, T] is returned. `theta_candidate` is a full theta vector under `par`.
OutputErrorCost output_error_cost(const VectorXd& theta_candidate,
                                  const Trajectory& traj,
                                  const std::vector<InputSignal>& inputs,
                                  const NetworkSpec& net,
                                  const Parametrization& par, double t_end);

struct LandscapePoint {
  double candidate = 0.0;
  double cost = 0.0;
  double gradient = 0.0;  // central difference on the grid
  int spikes = 0;
  bool diverged = false;
};

/// 1-D sweep of one theta component over a grid of candidate values. The
/// remaining components stay at `theta_base`.
std::vector<LandscapePoint> cost_landscape(
    const VectorXd& theta_base, int theta_index,
    const std::vector<double>& grid, const Trajectory& traj,
    const std::vector<InputSignal>& inputs, const NetworkSpec& net,
    const Parametrization& par, double t_end);

}  // namespace condest

#endif  // CONDEST_BATCH_HPP_
