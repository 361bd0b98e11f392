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

#include <doctest.h>

#include <cmath>
#include <random>

#include "condest/integrator.hpp"
#include "condest/presets.hpp"

using namespace condest;

TEST_CASE("rk4 single step") {
  SUBCASE("zero derivative leaves the state unchanged") {
    VectorXd x(3);
    x << 1.0, -2.0, 3.5;
    const RhsFn rhs = [](double, const VectorXd&, VectorXd& dx) {
      dx.setZero();
    };
    CHECK((rk4_step(rhs, x, 0.0, 0.1) - x).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("scalar decay matches the exponential to 4th order") {
    VectorXd x(1);
    x << 1.0;
    const RhsFn rhs = [](double, const VectorXd& s, VectorXd& dx) {
      dx = -s;
    };
    const VectorXd next = rk4_step(rhs, x, 0.0, 0.1);
    CHECK(next(0) == doctest::Approx(0.9048374180359595).epsilon(1e-7));
    // local truncation error of a single step is ~ dt^5/120
    CHECK(std::abs(next(0) - 0.9048374180359595) < 1e-7);
  }
  SUBCASE("non-finite derivative names the component") {
    VectorXd x(2);
    x << 1.0, 1.0;
    const RhsFn rhs = [](double, const VectorXd& s, VectorXd& dx) {
      dx(0) = 0.0;
      dx(1) = std::log(s(1) - 2.0);  // NaN
    };
    const ComponentNamer namer = [](int i) {
      return "state " + std::to_string(i);
    };
    CHECK_THROWS_WITH_AS(rk4_step(rhs, x, 0.0, 0.1, namer),
                         doctest::Contains("state 1"), IntegrationError);
  }
}

TEST_CASE("rk4 order of convergence on a linear system") {
  // x' = A x with a mildly stiff 2x2 system, global error over a fixed
  // horizon should shrink ~16x per halving
  Eigen::Matrix2d a;
  a << -0.4, 0.3, -0.2, -0.7;
  const RhsFn rhs = [&](double, const VectorXd& s, VectorXd& dx) {
    dx = a * s;
  };
  VectorXd x0(2);
  x0 << 1.0, -1.0;
  auto solve = [&](double dt) {
    VectorXd x = x0;
    const int n = static_cast<int>(std::llround(10.0 / dt));
    for (int k = 0; k < n; ++k) x = rk4_step(rhs, x, k * dt, dt);
    return x;
  };
  // self-converged reference: two more halvings reduce the reference error
  // ~256x below the coarsest error being measured
  const VectorXd exact = solve(0.00625);
  const double e1 = (solve(0.1) - exact).norm();
  const double e2 = (solve(0.05) - exact).norm();
  CHECK(e1 / e2 >= 12.0);
}

TEST_CASE("input signals") {
  SUBCASE("sine") {
    const InputSignal s = InputSignal::sine(2.0, 10.0);
    CHECK(s.eval(0.0) == doctest::Approx(0.0));
    CHECK(s.eval(2.5) == doctest::Approx(2.0));
    CHECK(s.u_bar() == doctest::Approx(2.0));
  }
  SUBCASE("pulse train") {
    const InputSignal s =
        InputSignal::pulse_train(0.5, {{10.0, 2.0, 3.0}, {20.0, 1.0, -4.0}});
    CHECK(s.eval(9.99) == doctest::Approx(0.5));
    CHECK(s.eval(10.0) == doctest::Approx(3.5));
    CHECK(s.eval(11.99) == doctest::Approx(3.5));
    CHECK(s.eval(12.0) == doctest::Approx(0.5));
    CHECK(s.eval(20.5) == doctest::Approx(-3.5));
    CHECK(s.u_bar() == doctest::Approx(7.5));
  }
  SUBCASE("piecewise linear") {
    const InputSignal s =
        InputSignal::piecewise_linear({0.0, 10.0, 20.0}, {0.0, 1.0, -1.0});
    CHECK(s.eval(5.0) == doctest::Approx(0.5));
    CHECK(s.eval(15.0) == doctest::Approx(0.0));
    CHECK(s.eval(25.0) == doctest::Approx(-1.0));
    CHECK(s.u_bar() == doctest::Approx(1.0));
  }
}

TEST_CASE("parameter schedules write into the working spec") {
  NetworkSpec net = preset("hco").net;
  ParameterSchedule sched;
  sched.entries.push_back(calcium_schedule_entry(10000.0));
  sched.apply(5000.0, net);
  CHECK(net.neurons[0].currents[2].mu == doctest::Approx(0.145));
  CHECK(net.neurons[1].currents[2].mu == doctest::Approx(0.145));
  // frozen endpoint values of the logistic
  sched.apply(0.0, net);
  CHECK(net.neurons[0].currents[2].mu ==
        doctest::Approx(0.11125903469734641).epsilon(1e-12));
  sched.apply(10000.0, net);
  CHECK(net.neurons[0].currents[2].mu ==
        doctest::Approx(0.17874096530265359).epsilon(1e-12));
}

TEST_CASE("leak-only neuron relaxes to the leak reversal monotonically") {
  NetworkSpec net;
  NeuronSpec nrn;
  nrn.c = 1.0;
  nrn.mu_leak = 0.3;
  nrn.nu_leak = -54.4;
  net.neurons = {nrn};
  SimulateOptions opts;
  opts.t_end = 100.0;
  opts.dt = 0.01;
  VectorXd v0(1), w0(0);
  v0 << 0.0;
  const Trajectory traj = simulate(net, {InputSignal::constant(0.0)},
                                   ParameterSchedule{}, v0, w0, opts);
  for (int k = 1; k < traj.samples(); ++k)
    CHECK(traj.v(k, 0) <= traj.v(k - 1, 0) + 1e-12);
  CHECK(traj.v(traj.samples() - 1, 0) == doctest::Approx(-54.4).epsilon(1e-6));
}

TEST_CASE("simulate determinism and measurement noise") {
  const Preset hh = preset("hh");
  VectorXd v0(1), w0(3);
  v0 << -65.0;
  w0 << 0.05, 0.6, 0.32;
  SimulateOptions opts;
  opts.t_end = 20.0;
  opts.dt = 0.01;
  const std::vector<InputSignal> u = {InputSignal::sine(1.0, 10.0)};

  SUBCASE("no noise: y equals v exactly") {
    const Trajectory traj =
        simulate(hh.net, u, ParameterSchedule{}, v0, w0, opts);
    CHECK((traj.y - traj.v).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("fixed seed reproduces the trajectory bit for bit") {
    opts.noise = NoiseSpec{1234, 2.0};
    const Trajectory a = simulate(hh.net, u, ParameterSchedule{}, v0, w0, opts);
    const Trajectory b = simulate(hh.net, u, ParameterSchedule{}, v0, w0, opts);
    CHECK((a.v - b.v).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
    // different seed changes the measurement, not the plant
    opts.noise = NoiseSpec{99, 2.0};
    const Trajectory c = simulate(hh.net, u, ParameterSchedule{}, v0, w0, opts);
    CHECK((a.v - c.v).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.y - c.y).cwiseAbs().maxCoeff() > 0.0);
  }
  SUBCASE("sample statistics of the noise match sigma") {
    opts.t_end = 200.0;
    opts.noise = NoiseSpec{5, 2.0};
    const Trajectory traj =
        simulate(hh.net, u, ParameterSchedule{}, v0, w0, opts);
    const VectorXd e = traj.y.col(0) - traj.v.col(0);
    const double mean = e.mean();
    const double sd = std::sqrt((e.array() - mean).square().sum() /
                                (e.size() - 1));
    CHECK(std::abs(mean) < 0.1);
    CHECK(sd == doctest::Approx(2.0).epsilon(0.05));
  }
}

TEST_CASE("spike counting") {
  std::vector<double> t;
  VectorXd v(400);
  for (int k = 0; k < 400; ++k) {
    t.push_back(k * 0.1);
    v(k) = -65.0;
  }
  // two fast spikes 5 ms apart, plus a double crossing within 1 ms that the
  // refractory window must merge
  auto bump = [&](int at) {
    v(at) = 10.0;
    v(at + 1) = 30.0;
    v(at + 2) = -10.0;
    v(at + 3) = 5.0;  // re-crossing 0 upward within the refractory window
    v(at + 4) = -40.0;
  };
  bump(100);
  bump(150);
  CHECK(count_spikes(v, t) == 2);
  CHECK(spike_times(v, t)[0] == doctest::Approx(10.0));
  CHECK(spike_times(v, t)[1] == doctest::Approx(15.0));
}

TEST_CASE("gating and voltage invariance under bounded inputs") {
  // a light version of the invariant-set sweep: a handful of random inputs,
  // states sampled inside the box stay in the box
  const Preset hh = preset("hh");
  const double u_bar = 30.0;
  const VoltageBounds box = invariant_bounds(hh.net, u_bar);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uv(box.lo, box.hi);
  std::uniform_real_distribution<double> uw(0.0, 1.0);
  std::uniform_real_distribution<double> ua(-u_bar, u_bar);
  for (int trial = 0; trial < 5; ++trial) {
    VectorXd v0(1), w0(3);
    v0 << uv(rng);
    for (int k = 0; k < 3; ++k) w0(k) = uw(rng);
    const InputSignal u = InputSignal::sine(ua(rng), 7.0, 0.0);
    SimulateOptions opts;
    opts.t_end = 50.0;
    opts.dt = 0.01;
    opts.output_stride = 10;
    const Trajectory traj =
        simulate(hh.net, {u}, ParameterSchedule{}, v0, w0, opts);
    CHECK(traj.v.minCoeff() >= box.lo - 1e-9);
    CHECK(traj.v.maxCoeff() <= box.hi + 1e-9);
    CHECK(traj.w.minCoeff() >= -1e-9);
    CHECK(traj.w.maxCoeff() <= 1.0 + 1e-9);
  }
}
