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

#include "condest/batch.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "condest/observers.hpp"

namespace condest {

MatrixXd filter_first_order(const MatrixXd& samples, double gamma, double dt) {
  if (!(gamma > 0.0) || !(dt > 0.0))
    throw ConfigError("filter_first_order: gamma and dt must be positive");
  const int n = static_cast<int>(samples.rows());
  const int m = static_cast<int>(samples.cols());
  MatrixXd out(n, m);
  VectorXd x = VectorXd::Zero(m);
  out.row(0) = x.transpose();
  for (int k = 0; k + 1 < n; ++k) {
    const VectorXd u = samples.row(k).transpose();  // held over the step
    const RhsFn rhs = [&](double, const VectorXd& state, VectorXd& dx) {
      dx = gamma * (u - state);
    };
    x = rk4_step(rhs, x, k * dt, dt);
    out.row(k + 1) = x.transpose();
  }
  return out;
}

FilteredDataset build_filtered_dataset(const Trajectory& traj,
                                       const NetworkSpec& net,
                                       const Parametrization& par,
                                       double gamma, const VectorXd& w_hat0) {
  if (traj.samples() < 2)
    throw ConfigError("build_filtered_dataset: trajectory too short");
  if (traj.y.size() == 0 || traj.u.size() == 0)
    throw ConfigError("build_filtered_dataset: trajectory lacks y/u columns");
  ModelOps ops(net, par);
  const int n_v = ops.n_v();
  const int n_w = ops.n_w();
  const int n_th = ops.n_theta();
  if (w_hat0.size() != n_w)
    throw DimensionError("build_filtered_dataset: w_hat0 size mismatch");
  const double dt = traj.dt * traj.stride;
  const int n = traj.samples();

  FilteredDataset data;
  data.dt = dt;
  data.t = traj.t;
  data.psi.resize(n);
  data.hv_dot.resize(n, n_v);
  data.ha.resize(n, n_v);
  data.w_hat.resize(n, n_w);

  // joint state: [w_hat | vec(Psi) | Hy | Ha], everything from zero except
  // the reduced observer
  const int n_psi = n_v * n_th;
  VectorXd x = VectorXd::Zero(n_w + n_psi + n_v + n_v);
  x.head(n_w) = w_hat0;

  const VectorXd eta = ops.eta_true();
  VectorXd y_held(n_v), u_held(n_v);

  const RhsFn rhs = [&](double, const VectorXd& state, VectorXd& dx) {
    const VectorXd w_hat = state.head(n_w);
    Eigen::Map<const MatrixXd> psi(state.data() + n_w, n_v, n_th);
    const auto hy = state.segment(n_w + n_psi, n_v);
    const auto ha = state.segment(n_w + n_psi + n_v, n_v);

    VectorXd a_int(n_w), b_int(n_w);
    ops.internal_dynamics(y_held, eta, a_int, b_int);
    dx.head(n_w) = (a_int.array() * w_hat.array()).matrix() + b_int;

    const MatrixXd phi = ops.regressor_phi(y_held, w_hat, u_held);
    Eigen::Map<MatrixXd>(dx.data() + n_w, n_v, n_th) =
        gamma * (phi - psi);
    const VectorXd a_drift = ops.drift_a(y_held, w_hat, u_held);
    dx.segment(n_w + n_psi, n_v) = gamma * (y_held - hy);
    dx.segment(n_w + n_psi + n_v, n_v) = gamma * (a_drift - ha);
  };

  for (int k = 0; k < n; ++k) {
    y_held = traj.y.row(k).transpose();
    u_held = traj.u.row(k).transpose();
    data.w_hat.row(k) = x.head(n_w).transpose();
    data.psi[k] = Eigen::Map<const MatrixXd>(x.data() + n_w, n_v, n_th);
    const VectorXd hy = x.segment(n_w + n_psi, n_v);
    // H dy/dt through the filter identity
    data.hv_dot.row(k) = (gamma * (y_held - hy)).transpose();
    data.ha.row(k) = x.segment(n_w + n_psi + n_v, n_v).transpose();
    if (k + 1 == n) break;
    x = rk4_step(rhs, x, traj.t[k], dt);
  }
  return data;
}

BatchSolution batch_ls_solve(const FilteredDataset& data, double alpha,
                             const MatrixXd& p0,
                             const std::vector<double>& t_list) {
  if (data.samples() < 2) throw ConfigError("batch_ls_solve: empty dataset");
  const int n_th = static_cast<int>(data.psi.front().cols());
  if (p0.rows() != n_th || p0.cols() != n_th)
    throw ConfigError("batch_ls_solve: P(0) dimension mismatch");
  const double dt = data.dt;
  const double decay = std::exp(-alpha * dt);
  const MatrixXd p0_inv = p0.inverse();

  // trapezoidal running integrals with exponential forgetting:
  //   I(t_k) = exp(-alpha dt) I(t_{k-1})
  //            + dt/2 (exp(-alpha dt) f_{k-1} + f_k)
  MatrixXd r_int = MatrixXd::Zero(n_th, n_th);
  VectorXd b_int = VectorXd::Zero(n_th);
  MatrixXd f_prev = data.psi[0].transpose() * data.psi[0];
  VectorXd g_prev = data.psi[0].transpose() *
                    (data.hv_dot.row(0) - data.ha.row(0)).transpose();

  std::vector<double> sorted_t = t_list;
  std::sort(sorted_t.begin(), sorted_t.end());
  BatchSolution out;
  out.solutions.reserve(sorted_t.size());

  size_t next = 0;
  auto maybe_solve = [&](int k) {
    while (next < sorted_t.size() &&
           std::abs(sorted_t[next] - data.t[k]) < 0.5 * dt) {
      const double t = data.t[k];
      const MatrixXd r = std::exp(-alpha * t) * p0_inv + r_int;
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(r);
      const double min_eig = eig.eigenvalues().minCoeff();
      if (!(min_eig > 0.0) ||
          min_eig < 1e-14 * eig.eigenvalues().maxCoeff())
        throw NotPersistentlyExcitingError(
            "batch_ls_solve: information matrix singular at T=" +
            std::to_string(t) + " (min eigenvalue " +
            std::to_string(min_eig) + ")");
      BatchSolution::AtTime at;
      at.t = t;
      at.theta = r.ldlt().solve(b_int);
      at.r_min_eig = min_eig;
      // weighted residual cost, trapezoid, normalized by T
      double cost = 0.0;
      double w_prev = 0.0;
      for (int j = 0; j <= k; ++j) {
        const VectorXd res = (data.hv_dot.row(j) - data.ha.row(j)).transpose() -
                             data.psi[j] * at.theta;
        const double w = std::exp(-alpha * (t - data.t[j])) * res.squaredNorm();
        if (j > 0) cost += 0.5 * dt * (w_prev + w);
        w_prev = w;
      }
      at.cost = (t > 0.0) ? cost / t : 0.0;
      out.solutions.push_back(at);
      ++next;
    }
  };

  maybe_solve(0);
  for (int k = 1; k < data.samples(); ++k) {
    const MatrixXd f = data.psi[k].transpose() * data.psi[k];
    const VectorXd g = data.psi[k].transpose() *
                       (data.hv_dot.row(k) - data.ha.row(k)).transpose();
    r_int = decay * r_int + 0.5 * dt * (decay * f_prev + f);
    b_int = decay * b_int + 0.5 * dt * (decay * g_prev + g);
    f_prev = f;
    g_prev = g;
    maybe_solve(k);
  }
  if (next < sorted_t.size())
    throw ConfigError("batch_ls_solve: requested T outside the dataset grid");
  return out;
}

OutputErrorCost output_error_cost(const VectorXd& theta_candidate,
                                  const Trajectory& traj,
                                  const std::vector<InputSignal>& inputs,
                                  const NetworkSpec& net,
                                  const Parametrization& par, double t_end) {
  ModelOps ops(net, par);
  const int n_v = ops.n_v();
  const int n_w = ops.n_w();
  if (theta_candidate.size() != ops.n_theta())
    throw DimensionError("output_error_cost: theta dimension mismatch");
  if (static_cast<int>(inputs.size()) != n_v)
    throw DimensionError("output_error_cost: one input per neuron required");
  const double dt = traj.dt * traj.stride;
  const int n_steps = std::min<int>(
      traj.samples() - 1, static_cast<int>(std::llround(t_end / dt)));

  const VectorXd eta = ops.eta_true();
  VectorXd u_stage(n_v);
  const RhsFn rhs = [&](double t, const VectorXd& state, VectorXd& dx) {
    for (int i = 0; i < n_v; ++i) u_stage(i) = inputs[i].eval(t);
    const VectorXd v = state.head(n_v);
    const VectorXd w = state.segment(n_v, n_w);
    const MatrixXd phi = ops.regressor_phi(v, w, u_stage);
    const VectorXd a = ops.drift_a(v, w, u_stage);
    dx.head(n_v) = phi * theta_candidate + a;
    VectorXd a_int(n_w), b_int(n_w);
    ops.internal_dynamics(v, eta, a_int, b_int);
    dx.segment(n_v, n_w) = (a_int.array() * w.array()).matrix() + b_int;
  };

  // predictor starts from the recorded initial state
  VectorXd x(n_v + n_w);
  x.head(n_v) = traj.v.row(0).transpose();
  x.segment(n_v, n_w) = traj.w.row(0).transpose();

  OutputErrorCost result;
  VectorXd v_pred(n_steps + 1);
  std::vector<double> t_pred(n_steps + 1);
  double cost = 0.0;
  double sq_prev = (traj.v.row(0).transpose() - x.head(n_v)).squaredNorm();
  v_pred(0) = x(0);
  t_pred[0] = traj.t[0];
  try {
    for (int k = 0; k < n_steps; ++k) {
      x = rk4_step(rhs, x, traj.t[k], dt);
      if (!x.allFinite())
        throw IntegrationError("output_error_cost: non-finite state");
      const double sq =
          (traj.v.row(k + 1).transpose() - x.head(n_v)).squaredNorm();
      cost += 0.5 * dt * (sq_prev + sq);
      sq_prev = sq;
      v_pred(k + 1) = x(0);
      t_pred[k + 1] = traj.t[k + 1];
    }
  } catch (const IntegrationError&) {
    result.diverged = true;
    result.cost = std::numeric_limits<double>::infinity();
    return result;
  }
  result.cost = cost / (n_steps * dt);
  result.spikes = count_spikes(v_pred, t_pred);
  return result;
}

std::vector<LandscapePoint> cost_landscape(
    const VectorXd& theta_base, int theta_index,
    const std::vector<double>& grid, const Trajectory& traj,
    const std::vector<InputSignal>& inputs, const NetworkSpec& net,
    const Parametrization& par, double t_end) {
  std::vector<LandscapePoint> points(grid.size());
  for (size_t k = 0; k < grid.size(); ++k) {
    VectorXd theta = theta_base;
    theta(theta_index) = grid[k];
    const OutputErrorCost c =
        output_error_cost(theta, traj, inputs, net, par, t_end);
    points[k].candidate = grid[k];
    points[k].cost = c.cost;
    points[k].spikes = c.spikes;
    points[k].diverged = c.diverged;
  }
  for (size_t k = 0; k < points.size(); ++k) {
    if (points.size() < 2) break;
    if (k == 0)
      points[k].gradient = (points[1].cost - points[0].cost) /
                           (points[1].candidate - points[0].candidate);
    else if (k + 1 == points.size())
      points[k].gradient = (points[k].cost - points[k - 1].cost) /
                           (points[k].candidate - points[k - 1].candidate);
    else
      points[k].gradient = (points[k + 1].cost - points[k - 1].cost) /
                           (points[k + 1].candidate - points[k - 1].candidate);
  }
  return points;
}

}  // namespace condest
