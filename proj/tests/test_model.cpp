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

#include "condest/model.hpp"
#include "condest/presets.hpp"

using namespace condest;

namespace {

// Independent oracle: direct Kirchhoff sum written against the raw spec,
// bypassing ModelOps entirely.
double kirchhoff_rhs(const NeuronSpec& nrn, double v,
                     const std::vector<double>& gates_mh,
                     const std::vector<double>& gates_syn,
                     const std::vector<double>& v_pre, double u) {
  (void)v_pre;
  double sum = -nrn.mu_leak * (v - nrn.nu_leak) + u;
  size_t g = 0;
  for (const IonicCurrentSpec& cur : nrn.currents) {
    double prod = 1.0;
    for (int p = 0; p < cur.p_exp; ++p) prod *= gates_mh[g];
    if (cur.p_exp > 0) ++g;
    for (int q = 0; q < cur.q_exp; ++q) prod *= gates_mh[g];
    if (cur.q_exp > 0) ++g;
    sum -= cur.mu * prod * (v - cur.nu);
  }
  for (size_t s = 0; s < nrn.synapses.size(); ++s)
    sum -= nrn.synapses[s].mu * gates_syn[s] * (v - nrn.synapses[s].nu);
  return sum / nrn.c;
}

VectorXd kirchhoff_rhs_network(const NetworkSpec& net, const VectorXd& v,
                               const VectorXd& w, const VectorXd& u) {
  GateTable gates(net);
  VectorXd dv(net.n_v());
  for (int i = 0; i < net.n_v(); ++i) {
    std::vector<double> mh, syn, vpre;
    for (int k = gates.neuron_offset(i);
         k < gates.neuron_offset(i) + gates.neuron_gate_count(i); ++k) {
      if (gates.gate(k).kind == GateKind::Synaptic) {
        syn.push_back(w(k));
        vpre.push_back(v(gates.gate(k).v_source));
      } else {
        mh.push_back(w(k));
      }
    }
    dv(i) = kirchhoff_rhs(net.neurons[i], v(i), mh, syn, vpre, u(i));
  }
  return dv;
}

VectorXd random_state(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> uni(lo, hi);
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = uni(rng);
  return x;
}

}  // namespace

TEST_CASE("sigmoid evaluation") {
  CHECK(sigmoid_eval(-40.0, -40.0, 9.0) == doctest::Approx(0.5).epsilon(1e-15));
  // frozen: 1/(1+e^-1)
  CHECK(sigmoid_eval(-31.0, -40.0, 9.0) ==
        doctest::Approx(0.7310585786300049).epsilon(1e-14));
  CHECK(sigmoid_eval(1e5, -40.0, 9.0) == doctest::Approx(1.0));
  CHECK(sigmoid_eval(-1e5, -40.0, 9.0) == doctest::Approx(0.0));
  // monotone with the sign of kappa
  CHECK(sigmoid_eval(-30.0, -40.0, 9.0) > sigmoid_eval(-50.0, -40.0, 9.0));
  CHECK(sigmoid_eval(-30.0, -40.0, -9.0) < sigmoid_eval(-50.0, -40.0, -9.0));
  CHECK(sigmoid_eval(0.0, -40.0, 9.0) > 0.0);
  CHECK(sigmoid_eval(0.0, -40.0, 9.0) < 1.0);
  CHECK_THROWS_AS(sigmoid_eval(0.0, 0.0, 0.0), InvalidKineticsError);
}

TEST_CASE("bell time constant") {
  const GatingKinetics m_na{-40.0, 9.0, 0.04, 0.50, -38.0, 30.0};
  CHECK(bell_tau_eval(-38.0, m_na) == doctest::Approx(0.50).epsilon(1e-15));
  CHECK(bell_tau_eval(1e4, m_na) == doctest::Approx(0.04));
  CHECK(bell_tau_eval(-1e4, m_na) == doctest::Approx(0.04));
  // frozen: 0.04 + 0.46 e^-1
  CHECK(bell_tau_eval(-8.0, m_na) ==
        doctest::Approx(0.20922454293886347).epsilon(1e-14));
  for (double v = -120.0; v <= 60.0; v += 0.5) {
    CHECK(bell_tau_eval(v, m_na) >= 0.04);
    CHECK(bell_tau_eval(v, m_na) <= 0.50);
  }
}

TEST_CASE("gating rate") {
  const GatingKinetics m_na{-40.0, 9.0, 0.04, 0.50, -38.0, 30.0};
  // equilibrium
  const double x_eq = sigmoid_eval(-51.0, m_na.rho, m_na.kappa);
  CHECK(gating_rate(x_eq, -51.0, m_na) == doctest::Approx(0.0));
  // x = 0 at v = rho
  CHECK(gating_rate(0.0, -40.0, m_na) ==
        doctest::Approx(0.5 / bell_tau_eval(-40.0, m_na)).epsilon(1e-15));
  // frozen: (-1 + 0.5)/tau(-40), tau(-40) = 0.4979600920422227
  CHECK(gating_rate(1.0, -40.0, m_na) ==
        doctest::Approx(-1.0040965289997664).epsilon(1e-14));
}

TEST_CASE("synaptic gating rate") {
  const SynapticKinetics g{-45.0, 2.0, 2.0, 0.1};
  // v_pre -> -inf: rate -> -s*b
  CHECK(synaptic_gating_rate(0.7, -1e5, g) == doctest::Approx(-0.07));
  // equilibrium
  const double sig = sigmoid_eval(-50.0, g.rho, g.kappa);
  const double tau = synaptic_tau(-50.0, g);
  CHECK(synaptic_gating_rate(g.a_rate * tau * sig, -50.0, g) ==
        doctest::Approx(0.0));
  // s = 0 at v_pre = rho: rate = a*sigma = 1
  CHECK(synaptic_gating_rate(0.0, -45.0, g) == doctest::Approx(1.0));
  // time constant bracket sampled over a wide voltage range
  for (double v = -120.0; v <= 60.0; v += 1.0) {
    const double t = synaptic_tau(v, g);
    CHECK(t >= 1.0 / (g.a_rate + g.b_rate) - 1e-15);
    CHECK(t <= 1.0 / g.b_rate + 1e-15);
  }
}

TEST_CASE("regressor of the sodium-potassium model matches the worked values") {
  const Preset hh = preset("hh");
  ModelOps ops(hh.net, hh.par);
  VectorXd v(1), u(1), w(3);
  v << -30.0;
  u << 0.0;
  w << 0.5, 0.5, 0.5;
  const MatrixXd phi = ops.regressor_phi(v, w, u);
  REQUIRE(phi.rows() == 1);
  REQUIRE(phi.cols() == 4);
  CHECK(phi(0, 0) == doctest::Approx(0.0));
  CHECK(phi(0, 1) == doctest::Approx(5.3125).epsilon(1e-15));
  CHECK(phi(0, 2) == doctest::Approx(-2.9375).epsilon(1e-15));
  CHECK(phi(0, 3) == doctest::Approx(-24.4).epsilon(1e-15));
  // drift is zero under this parametrization
  CHECK(ops.drift_a(v, w, u).cwiseAbs().maxCoeff() == 0.0);
  // u = 0 zeroes the first column for any state
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const VectorXd vr = random_state(rng, 1, -90.0, 40.0);
    const VectorXd wr = random_state(rng, 3, 0.0, 1.0);
    CHECK(ops.regressor_phi(vr, wr, u)(0, 0) == 0.0);
  }
}

TEST_CASE("membrane rhs equals the Kirchhoff oracle") {
  const Preset hh = preset("hh");
  Parametrization par_plain;
  ModelOps ops(hh.net, par_plain);
  VectorXd v(1), u(1), w(3);
  v << -65.0;
  u << 0.0;
  w << 0.05, 0.6, 0.32;
  // frozen from the scalar oracle
  CHECK(ops.membrane_rhs(v, w, u)(0) ==
        doctest::Approx(-0.26984832).epsilon(1e-12));
  // leak equilibrium for a leak-only neuron
  NetworkSpec leak_only;
  NeuronSpec nrn;
  nrn.c = 1.0;
  nrn.mu_leak = 0.3;
  nrn.nu_leak = -54.4;
  leak_only.neurons = {nrn};
  ModelOps leak_ops(leak_only, par_plain);
  VectorXd vl(1), ul(1), wl(0);
  vl << -54.4;
  ul << 0.0;
  CHECK(leak_ops.membrane_rhs(vl, wl, ul)(0) == doctest::Approx(0.0));
}

TEST_CASE("regressor consistency across every parametrization layout") {
  std::mt19937_64 rng(42);
  for (const std::string& name : {"hh", "hco"}) {
    const Preset pre = preset(name);
    for (ThetaLayout layout :
         {ThetaLayout::Conductances, ThetaLayout::ScaledConductances,
          ThetaLayout::ScaledConductancesReversals}) {
      Parametrization par;
      par.layout = layout;
      ModelOps ops(pre.net, par);
      const VectorXd theta = ops.theta_true();
      for (int trial = 0; trial < 100; ++trial) {
        const VectorXd v = random_state(rng, ops.n_v(), -100.0, 50.0);
        const VectorXd w = random_state(rng, ops.n_w(), 0.0, 1.0);
        const VectorXd u = random_state(rng, ops.n_v(), -20.0, 20.0);
        const VectorXd direct = kirchhoff_rhs_network(pre.net, v, w, u);
        const VectorXd split =
            ops.regressor_phi(v, w, u) * theta + ops.drift_a(v, w, u);
        for (int i = 0; i < direct.size(); ++i)
          CHECK(split(i) ==
                doctest::Approx(direct(i)).epsilon(1e-12).scale(
                    std::max(1.0, std::abs(direct(i)))));
      }
    }
  }
}

TEST_CASE("network regressor is block diagonal") {
  const Preset hco = preset("hco");
  ModelOps ops(hco.net, hco.par);
  std::mt19937_64 rng(3);
  const VectorXd v = random_state(rng, 2, -80.0, 20.0);
  const VectorXd w = random_state(rng, ops.n_w(), 0.0, 1.0);
  const VectorXd u = random_state(rng, 2, -5.0, 5.0);
  const MatrixXd phi = ops.regressor_phi(v, w, u);
  REQUIRE(phi.rows() == 2);
  REQUIRE(phi.cols() == 10);
  CHECK(phi.block(0, 5, 1, 5).cwiseAbs().maxCoeff() == 0.0);
  CHECK(phi.block(1, 0, 1, 5).cwiseAbs().maxCoeff() == 0.0);
  // drift under the plain-conductance layout is u_i / c_i
  const VectorXd a = ops.drift_a(v, w, u);
  CHECK(a(0) == doctest::Approx(u(0) / hco.net.neurons[0].c));
  CHECK(a(1) == doctest::Approx(u(1) / hco.net.neurons[1].c));
}

TEST_CASE("internal dynamics reproduce the per-gate rates") {
  std::mt19937_64 rng(11);
  for (const std::string& name : {"hh", "hco"}) {
    const Preset pre = preset(name);
    ModelOps ops(pre.net, pre.par);
    const VectorXd eta = ops.eta_true();
    for (int trial = 0; trial < 100; ++trial) {
      const VectorXd v = random_state(rng, ops.n_v(), -100.0, 50.0);
      const VectorXd w = random_state(rng, ops.n_w(), 0.0, 1.0);
      VectorXd a_diag(ops.n_w()), b(ops.n_w());
      ops.internal_dynamics(v, eta, a_diag, b);
      const VectorXd split = (a_diag.array() * w.array()).matrix() + b;
      const VectorXd direct = ops.gating_rhs(v, w);
      for (int k = 0; k < split.size(); ++k)
        CHECK(split(k) ==
              doctest::Approx(direct(k)).epsilon(1e-12).scale(
                  std::max(1.0, std::abs(direct(k)))));
      // diagonal entries no slower than the worst-case time constant
      for (int k = 0; k < ops.n_w(); ++k) {
        const GateRef& g = ops.gate_table().gate(k);
        if (g.kind == GateKind::Synaptic) {
          CHECK(a_diag(k) <=
                -pre.net.neurons[g.neuron].synapses[g.index].kin.b_rate);
        } else {
          const IonicCurrentSpec& cur =
              pre.net.neurons[g.neuron].currents[g.index];
          const GatingKinetics& kin =
              g.kind == GateKind::Activation ? cur.m_kin : cur.h_kin;
          CHECK(a_diag(k) <= -1.0 / kin.tau_max + 1e-15);
        }
      }
    }
  }
}

TEST_CASE("eta overrides reroute the designated constants") {
  const Preset hh = preset("hh");
  ModelOps ops(hh.net, hh.par);
  REQUIRE(ops.n_eta() == 3);
  CHECK(ops.eta_true()(0) == -40.0);
  CHECK(ops.eta_true()(1) == -62.0);
  CHECK(ops.eta_true()(2) == -53.0);
  VectorXd v(1);
  v << -40.0;
  VectorXd eta(3);
  eta << -40.0, -62.0, -53.0;
  VectorXd a_diag(3), b(3);
  ops.internal_dynamics(v, eta, a_diag, b);
  // b_1 = 0.5 / tau_mNa(-40), frozen
  CHECK(b(0) == doctest::Approx(1.0040965289997664).epsilon(1e-14));
  // shifting rho moves the activation midpoint
  VectorXd eta_shift = eta;
  eta_shift(0) = -30.0;
  VectorXd a2(3), b2(3);
  ops.internal_dynamics(v, eta_shift, a2, b2);
  const double tau = bell_tau_eval(-40.0, hh.net.neurons[0].currents[0].m_kin);
  CHECK(b2(0) ==
        doctest::Approx(sigmoid_eval(-40.0, -30.0, 9.0) / tau).epsilon(1e-14));
  CHECK(a2(0) == doctest::Approx(a_diag(0)));  // A does not depend on rho
}

TEST_CASE("output jacobians match central finite differences") {
  std::mt19937_64 rng(2026);
  const double h = 1e-5;
  for (const std::string& name : {"hh", "hco"}) {
    const Preset pre = preset(name);
    for (ThetaLayout layout :
         {ThetaLayout::Conductances, ThetaLayout::ScaledConductances,
          ThetaLayout::ScaledConductancesReversals}) {
      Parametrization par = pre.par;
      par.layout = layout;
      ModelOps ops(pre.net, par);
      std::uniform_real_distribution<double> scale(0.5, 2.0);
      for (int trial = 0; trial < 20; ++trial) {
        const VectorXd v = random_state(rng, ops.n_v(), -90.0, 40.0);
        const VectorXd w = random_state(rng, ops.n_w(), 0.05, 0.95);
        const VectorXd u = random_state(rng, ops.n_v(), -10.0, 10.0);
        VectorXd theta = ops.theta_true();
        for (int k = 0; k < theta.size(); ++k) theta(k) *= scale(rng);
        auto f = [&](const VectorXd& vv, const VectorXd& ww) {
          return (ops.regressor_phi(vv, ww, u) * theta + ops.drift_a(vv, ww, u))
              .eval();
        };
        const MatrixXd jv = ops.jacobian_output_v(v, w, u, theta);
        MatrixXd jv_fd(ops.n_v(), ops.n_v());
        for (int c = 0; c < ops.n_v(); ++c) {
          VectorXd vp = v, vm = v;
          vp(c) += h;
          vm(c) -= h;
          jv_fd.col(c) = (f(vp, w) - f(vm, w)) / (2.0 * h);
        }
        CHECK((jv - jv_fd).norm() <= 1e-6 * std::max(1.0, jv.norm()));

        const MatrixXd jw = ops.jacobian_output_w(v, w, u, theta);
        MatrixXd jw_fd(ops.n_v(), ops.n_w());
        for (int c = 0; c < ops.n_w(); ++c) {
          VectorXd wp = w, wm = w;
          wp(c) += h;
          wm(c) -= h;
          jw_fd.col(c) = (f(v, wp) - f(v, wm)) / (2.0 * h);
        }
        CHECK((jw - jw_fd).norm() <= 1e-6 * std::max(1.0, jw.norm()));
      }
    }
  }
}

TEST_CASE("internal eta jacobian matches central finite differences") {
  std::mt19937_64 rng(77);
  const double h = 1e-5;
  // hh preset designates the three half-activations; extend with slope and
  // bell constants to cover every field
  const Preset pre = preset("hh");
  Parametrization par = pre.par;
  GateTable gates(pre.net);
  par.eta.push_back({gates.find("m_Na", 0), EtaField::Kappa});
  par.eta.push_back({gates.find("h_Na", 0), EtaField::Zeta});
  par.eta.push_back({gates.find("m_K", 0), EtaField::Chi});
  ModelOps ops(pre.net, par);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd v = random_state(rng, 1, -90.0, 40.0);
    const VectorXd w = random_state(rng, ops.n_w(), 0.0, 1.0);
    VectorXd eta = ops.eta_true();
    std::uniform_real_distribution<double> jitter(0.9, 1.1);
    for (int k = 0; k < eta.size(); ++k) eta(k) *= jitter(rng);
    auto g = [&](const VectorXd& e) {
      VectorXd a_diag(ops.n_w()), b(ops.n_w());
      ops.internal_dynamics(v, e, a_diag, b);
      return ((a_diag.array() * w.array()).matrix() + b).eval();
    };
    const MatrixXd jac = ops.jacobian_internal_eta(v, eta, w);
    MatrixXd fd(ops.n_w(), ops.n_eta());
    for (int c = 0; c < ops.n_eta(); ++c) {
      VectorXd ep = eta, em = eta;
      ep(c) += h;
      em(c) -= h;
      fd.col(c) = (g(ep) - g(em)) / (2.0 * h);
    }
    CHECK((jac - fd).norm() <= 1e-6 * std::max(1.0, jac.norm()));
  }
  // empty eta map gives an empty jacobian
  Parametrization par_empty;
  ModelOps ops_empty(pre.net, par_empty);
  const MatrixXd j0 = ops_empty.jacobian_internal_eta(
      VectorXd::Constant(1, -50.0), VectorXd(), VectorXd::Constant(3, 0.5));
  CHECK(j0.cols() == 0);
  // sigmoid-midpoint slope: d/drho of sigma/tau at v = rho is -1/(4 kappa tau)
  VectorXd v0(1);
  v0 << -40.0;
  const MatrixXd j = ops.jacobian_internal_eta(
      v0, ops.eta_true(), VectorXd::Constant(ops.n_w(), 0.5));
  const double tau = bell_tau_eval(-40.0, pre.net.neurons[0].currents[0].m_kin);
  CHECK(j(0, 0) == doctest::Approx(-1.0 / (4.0 * 9.0 * tau)).epsilon(1e-12));
}

TEST_CASE("invariant bounds") {
  const Preset hh = preset("hh");
  SUBCASE("no input") {
    const VoltageBounds b = invariant_bounds(hh.net, 0.0);
    CHECK(b.lo == doctest::Approx(-77.0));
    CHECK(b.hi == doctest::Approx(55.0));
  }
  SUBCASE("boundary input keeps the sodium reversal as the ceiling") {
    const double u_bar = 0.3 * (55.0 - (-54.4));
    const VoltageBounds b = invariant_bounds(hh.net, u_bar);
    CHECK(b.hi == doctest::Approx(55.0));
  }
  SUBCASE("large input widens the floor") {
    const VoltageBounds b = invariant_bounds(hh.net, 30.0);
    CHECK(b.hi == doctest::Approx(55.0));
    CHECK(b.lo == doctest::Approx(-154.4));
  }
  SUBCASE("network bounds include synaptic reversals") {
    const Preset hco = preset("hco");
    const VoltageBounds b = invariant_bounds(hco.net, 0.0);
    CHECK(b.lo == doctest::Approx(-80.0));
    CHECK(b.hi == doctest::Approx(120.0));
  }
}

TEST_CASE("spec validation rejects malformed models") {
  NetworkSpec net;
  CHECK_THROWS_AS(net.validate(), ConfigError);
  net = preset("hh").net;
  net.neurons[0].c = 0.0;
  CHECK_THROWS_AS(net.validate(), ConfigError);
  net = preset("hh").net;
  net.neurons[0].currents[0].m_kin.tau_min = 0.0;
  CHECK_THROWS_AS(net.validate(), InvalidKineticsError);
  net = preset("hco").net;
  net.neurons[0].synapses[0].pre = 5;
  CHECK_THROWS_AS(net.validate(), ConfigError);
  // dimension errors
  const Preset hh = preset("hh");
  ModelOps ops(hh.net, hh.par);
  CHECK_THROWS_AS(
      ops.regressor_phi(VectorXd::Zero(2), VectorXd::Zero(3), VectorXd::Zero(1)),
      DimensionError);
}
