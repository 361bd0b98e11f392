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

#include "condest/integrator.hpp"

#include <cmath>
#include <random>

namespace condest {

// ---------------------------------------------------------------------------
// InputSignal

InputSignal InputSignal::constant(double level) {
  InputSignal s;
  s.kind_ = Kind::Constant;
  s.level = level;
  return s;
}

InputSignal InputSignal::sine(double amplitude, double period_ms,
                              double offset) {
  if (!(period_ms > 0.0)) throw ConfigError("sine input needs period > 0");
  InputSignal s;
  s.kind_ = Kind::Sine;
  s.amplitude = amplitude;
  s.period_ms = period_ms;
  s.offset = offset;
  return s;
}

InputSignal InputSignal::pulse_train(double baseline,
                                     std::vector<Pulse> pulses) {
  InputSignal s;
  s.kind_ = Kind::PulseTrain;
  s.baseline = baseline;
  s.pulses = std::move(pulses);
  return s;
}

InputSignal InputSignal::piecewise_linear(std::vector<double> t,
                                          std::vector<double> value) {
  if (t.size() != value.size() || t.size() < 2)
    throw ConfigError("piecewise-linear input needs matching knot lists");
  for (size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1]))
      throw ConfigError("piecewise-linear knots must be increasing");
  InputSignal s;
  s.kind_ = Kind::PiecewiseLinear;
  s.knots_t = std::move(t);
  s.knots_v = std::move(value);
  return s;
}

double InputSignal::eval(double t) const {
  switch (kind_) {
    case Kind::Constant:
      return level;
    case Kind::Sine:
      return offset + amplitude * std::sin(2.0 * M_PI * t / period_ms);
    case Kind::PulseTrain: {
      double u = baseline;
      for (const Pulse& p : pulses)
        if (t >= p.t_start && t < p.t_start + p.width) u += p.amplitude;
      return u;
    }
    case Kind::PiecewiseLinear: {
      if (t <= knots_t.front()) return knots_v.front();
      if (t >= knots_t.back()) return knots_v.back();
      auto it = std::upper_bound(knots_t.begin(), knots_t.end(), t);
      const size_t j = static_cast<size_t>(it - knots_t.begin());
      const double f = (t - knots_t[j - 1]) / (knots_t[j] - knots_t[j - 1]);
      return knots_v[j - 1] + f * (knots_v[j] - knots_v[j - 1]);
    }
  }
  return 0.0;
}

double InputSignal::u_bar() const {
  switch (kind_) {
    case Kind::Constant:
      return std::abs(level);
    case Kind::Sine:
      return std::abs(offset) + std::abs(amplitude);
    case Kind::PulseTrain: {
      // pulses may overlap; sum of magnitudes is a safe bound
      double b = std::abs(baseline);
      for (const Pulse& p : pulses) b += std::abs(p.amplitude);
      return b;
    }
    case Kind::PiecewiseLinear: {
      double b = 0.0;
      for (double v : knots_v) b = std::max(b, std::abs(v));
      return b;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// ParameterSchedule

double ScheduleEntry::eval(double t) const {
  switch (kind) {
    case Kind::Constant:
      return p0;
    case Kind::Logistic:
      return p0 + p1 / (1.0 + std::exp(-(t - p2) / p3));
    case Kind::Linear:
      return p0 + p1 * t;
  }
  return p0;
}

void ParameterSchedule::apply(double t, NetworkSpec& net) const {
  for (const ScheduleEntry& e : entries) {
    const double value = e.eval(t);
    for (int i = 0; i < net.n_v(); ++i) {
      if (e.neuron >= 0 && e.neuron != i) continue;
      NeuronSpec& nrn = net.neurons[i];
      switch (e.field) {
        case ScheduleEntry::Field::MuLeak:
          nrn.mu_leak = value;
          break;
        case ScheduleEntry::Field::NuLeak:
          nrn.nu_leak = value;
          break;
        case ScheduleEntry::Field::C:
          nrn.c = value;
          break;
        case ScheduleEntry::Field::Mu:
        case ScheduleEntry::Field::Nu: {
          bool found = false;
          for (IonicCurrentSpec& cur : nrn.currents) {
            if (cur.name != e.current_name) continue;
            (e.field == ScheduleEntry::Field::Mu ? cur.mu : cur.nu) = value;
            found = true;
          }
          if (!found)
            throw ConfigError("schedule targets unknown current '" +
                              e.current_name + "'");
          break;
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// RK4

namespace {

void check_finite(const VectorXd& dx, double t, const ComponentNamer& name) {
  if (dx.allFinite()) return;
  int bad = 0;
  for (int i = 0; i < dx.size(); ++i)
    if (!std::isfinite(dx(i))) {
      bad = i;
      break;
    }
  const std::string label =
      name ? name(bad) : ("component " + std::to_string(bad));
  throw IntegrationError("non-finite derivative in " + label + " at t=" +
                         std::to_string(t) + " ms");
}

}  // namespace

VectorXd rk4_step(const RhsFn& rhs, const VectorXd& x, double t, double dt,
                  const ComponentNamer& name) {
  if (!(dt > 0.0)) throw IntegrationError("rk4_step: dt must be positive");
  VectorXd k1(x.size()), k2(x.size()), k3(x.size()), k4(x.size());
  rhs(t, x, k1);
  check_finite(k1, t, name);
  rhs(t + 0.5 * dt, x + 0.5 * dt * k1, k2);
  check_finite(k2, t, name);
  rhs(t + 0.5 * dt, x + 0.5 * dt * k2, k3);
  check_finite(k3, t, name);
  rhs(t + dt, x + dt * k3, k4);
  check_finite(k4, t, name);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// ---------------------------------------------------------------------------
// simulate

Trajectory simulate(const NetworkSpec& net,
                    const std::vector<InputSignal>& inputs,
                    const ParameterSchedule& schedule, const VectorXd& v0,
                    const VectorXd& w0, const SimulateOptions& opts,
                    ObserverRunner* observer) {
  net.validate();
  const int n_v = net.n_v();
  Parametrization par_direct;  // layout irrelevant for direct evaluation
  NetworkSpec working = net;   // schedule writes into this copy
  ModelOps plant(working, par_direct);
  const int n_w = plant.n_w();

  if (static_cast<int>(inputs.size()) != n_v)
    throw DimensionError("simulate: one input signal per neuron required");
  if (v0.size() != n_v || w0.size() != n_w)
    throw DimensionError("simulate: initial state dimension mismatch");
  if (!(opts.dt > 0.0) || !(opts.t_end >= 0.0))
    throw ConfigError("simulate: need dt > 0 and t_end >= 0");
  if (opts.output_stride < 1)
    throw ConfigError("simulate: output stride must be >= 1");

  const int n_steps = static_cast<int>(std::llround(opts.t_end / opts.dt));
  const int n_obs = observer ? observer->state_size() : 0;
  const int n_plant = n_v + n_w;

  // flat layout: [v; w; observer]
  VectorXd x(n_plant + n_obs);
  x.head(n_v) = v0;
  x.segment(n_v, n_w) = w0;
  if (observer) x.tail(n_obs) = observer->initial_state();

  const bool noisy = opts.noise && opts.noise->sigma > 0.0;
  std::mt19937_64 rng(opts.noise ? opts.noise->seed : 0);
  std::normal_distribution<double> gauss(0.0, noisy ? opts.noise->sigma : 1.0);

  VectorXd u_stage(n_v), y_held(n_v), u_held(n_v);
  VectorXd obs_state(n_obs), dobs(n_obs);

  const ComponentNamer namer = [&](int idx) -> std::string {
    if (idx < n_v) return "plant v[" + std::to_string(idx) + "]";
    if (idx < n_plant)
      return "plant gate " + plant.gate_table().gate(idx - n_v).label;
    return observer ? observer->component_name(idx - n_plant)
                    : ("component " + std::to_string(idx));
  };

  const RhsFn rhs = [&](double t, const VectorXd& state, VectorXd& dx) {
    schedule.apply(t, working);
    for (int i = 0; i < n_v; ++i) u_stage(i) = inputs[i].eval(t);
    const auto v = state.head(n_v);
    const auto w = state.segment(n_v, n_w);
    plant.membrane_rhs_into(v, w, u_stage, dx.head(n_v));
    plant.gating_rhs_into(v, w, dx.segment(n_v, n_w));
    if (observer) {
      obs_state = state.tail(n_obs);
      observer->rhs(t, obs_state, y_held, u_held, dobs);
      dx.tail(n_obs) = dobs;
    }
  };

  const int n_samples = n_steps / opts.output_stride + 1;
  Trajectory traj;
  traj.dt = opts.dt;
  traj.stride = opts.output_stride;
  traj.t.reserve(n_samples);
  traj.v.resize(n_samples, n_v);
  traj.w.resize(n_samples, n_w);
  traj.u.resize(n_samples, n_v);
  traj.y.resize(n_samples, n_v);
  if (observer) {
    traj.observer.emplace();
    traj.observer->columns = observer->trace_columns();
    traj.observer->data.resize(n_samples,
                               static_cast<int>(traj.observer->columns.size()));
  }

  // stage buffers reused across the whole run
  VectorXd k1(x.size()), k2(x.size()), k3(x.size()), k4(x.size());
  VectorXd stage(x.size()), x_next(x.size()), post(n_obs);

  int row = 0;
  for (int k = 0; k <= n_steps; ++k) {
    const double t = k * opts.dt;
    // sample the measurement at the grid point
    for (int i = 0; i < n_v; ++i) {
      const double noise = noisy ? gauss(rng) : 0.0;
      y_held(i) = x(i) + noise;
      u_held(i) = inputs[i].eval(t);
    }
    if (k % opts.output_stride == 0) {
      traj.t.push_back(t);
      traj.v.row(row) = x.head(n_v).transpose();
      traj.w.row(row) = x.segment(n_v, n_w).transpose();
      traj.u.row(row) = u_held.transpose();
      traj.y.row(row) = y_held.transpose();
      if (observer) {
        traj.observer->data.row(row) = x.tail(n_obs).transpose();
      }
      ++row;
    }
    if (k == n_steps) break;
    // classical RK4 with the finiteness check once per step; on failure the
    // stage derivatives are inspected to name the offending component
    const double dt = opts.dt;
    rhs(t, x, k1);
    stage = x + (0.5 * dt) * k1;
    rhs(t + 0.5 * dt, stage, k2);
    stage = x + (0.5 * dt) * k2;
    rhs(t + 0.5 * dt, stage, k3);
    stage = x + dt * k3;
    rhs(t + dt, stage, k4);
    x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x_next.allFinite()) {
      for (const VectorXd* ks : {&k1, &k2, &k3, &k4})
        for (int i = 0; i < ks->size(); ++i)
          if (!std::isfinite((*ks)(i)))
            throw IntegrationError("non-finite derivative in " + namer(i) +
                                   " at t=" + std::to_string(t) + " ms");
      throw IntegrationError("non-finite state at t=" + std::to_string(t) +
                             " ms");
    }
    x.swap(x_next);
    if (observer) {
      post = x.tail(n_obs);
      observer->post_step(post);
      x.tail(n_obs) = post;
    }
  }
  return traj;
}

// ---------------------------------------------------------------------------
// spikes

std::vector<double> spike_times(const Eigen::Ref<const VectorXd>& v,
                                const std::vector<double>& t, double threshold,
                                double refractory_ms) {
  std::vector<double> times;
  double last = -std::numeric_limits<double>::infinity();
  for (int k = 1; k < v.size(); ++k) {
    if (v(k - 1) < threshold && v(k) >= threshold &&
        t[k] - last >= refractory_ms) {
      times.push_back(t[k]);
      last = t[k];
    }
  }
  return times;
}

int count_spikes(const Eigen::Ref<const VectorXd>& v,
                 const std::vector<double>& t, double threshold,
                 double refractory_ms) {
  return static_cast<int>(spike_times(v, t, threshold, refractory_ms).size());
}

}  // namespace condest
