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
// Fixed-step RK4 integration of plant + observer with scheduled inputs,
// time-varying true parameters, and sampled measurement noise.
//
// Discretization conventions (shared by every consumer in this project):
//  * the plant sees the analytic input u(t) at RK4 stage times;
//  * observers see the sampled pair (y_k, u_k), held constant over the step
//    (zero-order hold), which is what a data-acquisition loop would provide;
//  * measurement noise is one Gaussian draw per grid point and neuron.

#ifndef CONDEST_INTEGRATOR_HPP_
#define CONDEST_INTEGRATOR_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "condest/model.hpp"

namespace condest {

// ---------------------------------------------------------------------------
// Input signals

struct Pulse {
  double t_start = 0.0;   // [ms]
  double width = 1.0;     // [ms]
  double amplitude = 0.0; // [uA/cm^2]
};

/// Scalar input current, evaluable at any t >= 0.
class InputSignal {
 public:
  static InputSignal constant(double level);
  static InputSignal sine(double amplitude, double period_ms,
                          double offset = 0.0);
  static InputSignal pulse_train(double baseline, std::vector<Pulse> pulses);
  static InputSignal piecewise_linear(std::vector<double> t,
                                      std::vector<double> value);

  double eval(double t) const;
  /// Declared bound on |u(t)|.
  double u_bar() const;

  enum class Kind { Constant, Sine, PulseTrain, PiecewiseLinear };
  Kind kind() const { return kind_; }

  // flat parameter access for serialization
  double level = 0.0;
  double amplitude = 0.0;
  double period_ms = 1.0;
  double offset = 0.0;
  double baseline = 0.0;
  std::vector<Pulse> pulses;
  std::vector<double> knots_t, knots_v;

 private:
  Kind kind_ = Kind::Constant;
};

// ---------------------------------------------------------------------------
// Parameter schedules

/// Time function applied to one voltage-equation constant of the true model.
struct ScheduleEntry {
  enum class Field { Mu, Nu, MuLeak, NuLeak, C };
  int neuron = -1;            // -1 applies to every neuron
  std::string current_name;   // ignored for leak / capacitance fields
  Field field = Field::Mu;

  enum class Kind { Constant, Logistic, Linear };
  Kind kind = Kind::Constant;
  // constant: value = p0
  // logistic: p0 + p1 / (1 + exp(-(t - p2)/p3))
  // linear:   p0 + p1 * t
  double p0 = 0.0, p1 = 0.0, p2 = 0.0, p3 = 1.0;

  double eval(double t) const;
};

struct ParameterSchedule {
  std::vector<ScheduleEntry> entries;
  bool empty() const { return entries.empty(); }
  /// Writes the scheduled values into `net` for time t.
  void apply(double t, NetworkSpec& net) const;
};

// ---------------------------------------------------------------------------
// Trajectory

/// Uniformly sampled record of a simulation. Column blocks are stored as
/// matrices with one row per retained sample (every `stride`-th step).
struct ObserverTrace {
  std::vector<std::string> columns;  // names, in storage order
  MatrixXd data;                     // samples x columns
};

struct Trajectory {
  double dt = 0.0;       // integration step [ms]
  int stride = 1;        // sample retention stride
  std::vector<double> t; // sample times [ms]
  MatrixXd v;            // samples x n_v
  MatrixXd w;            // samples x n_w
  MatrixXd u;            // samples x n_v
  MatrixXd y;            // samples x n_v (== v when no noise)
  std::optional<ObserverTrace> observer;

  int samples() const { return static_cast<int>(t.size()); }
  int n_v() const { return static_cast<int>(v.cols()); }
};

// ---------------------------------------------------------------------------
// Stepping

/// One classical 4th-order Runge-Kutta step. Throws IntegrationError naming
/// the offending component if a stage derivative is not finite; `name`
/// resolves a flat state index to a label (may be null).
using RhsFn = std::function<void(double t, const VectorXd& x, VectorXd& dx)>;
using ComponentNamer = std::function<std::string(int)>;

VectorXd rk4_step(const RhsFn& rhs, const VectorXd& x, double t, double dt,
                  const ComponentNamer& name = nullptr);

// ---------------------------------------------------------------------------
// Observer hook

/// Interface the simulation loop uses to advance an attached observer. The
/// observer state is kept flat; the runner interprets it.
class ObserverRunner {
 public:
  virtual ~ObserverRunner() = default;
  virtual int state_size() const = 0;
  virtual VectorXd initial_state() const = 0;
  /// Derivative of the observer state given the frozen samples (y_k, u_k).
  virtual void rhs(double t, const VectorXd& state, const VectorXd& y_held,
                   const VectorXd& u_held, VectorXd& dx) const = 0;
  /// Post-step fixup (covariance symmetrization, conditioning checks).
  virtual void post_step(VectorXd& state) const = 0;
  virtual std::vector<std::string> trace_columns() const = 0;
  virtual std::string component_name(int index) const = 0;
};

// ---------------------------------------------------------------------------
// Simulation

struct NoiseSpec {
  std::uint64_t seed = 0;
  double sigma = 0.0;  // [mV]
};

struct SimulateOptions {
  double t_end = 0.0;      // [ms]
  double dt = 0.01;        // [ms]
  int output_stride = 1;
  std::optional<NoiseSpec> noise;
};

/// Integrates the plant (and the attached observer, if any) on a shared
/// fixed grid. The schedule mutates a working copy of `net`; `net` itself is
/// left untouched.
Trajectory simulate(const NetworkSpec& net,
                    const std::vector<InputSignal>& inputs,
                    const ParameterSchedule& schedule, const VectorXd& v0,
                    const VectorXd& w0, const SimulateOptions& opts,
                    ObserverRunner* observer = nullptr);

/// Upward crossings of `threshold` with a refractory gap, per neuron column.
std::vector<double> spike_times(const Eigen::Ref<const VectorXd>& v,
                                const std::vector<double>& t,
                                double threshold = 0.0,
                                double refractory_ms = 1.0);
int count_spikes(const Eigen::Ref<const VectorXd>& v,
                 const std::vector<double>& t, double threshold = 0.0,
                 double refractory_ms = 1.0);

}  // namespace condest

#endif  // CONDEST_INTEGRATOR_HPP_
