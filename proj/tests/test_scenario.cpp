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

#include <cstdio>
#include <filesystem>

#include "condest/csv.hpp"
#include "condest/scenario.hpp"

using namespace condest;

namespace {
const std::string kScenarioDir = std::string(CONDEST_SOURCE_DIR) + "/scenarios";
}

TEST_CASE("config parsing") {
  const Config cfg = Config::parse_string(
      "# comment\n"
      "a.b = 1.5\n"
      "a.c = hello   # trailing comment\n"
      "list = [1, 2, 3]\n"
      "flag = true\n");
  CHECK(cfg.get_double("a.b") == 1.5);
  CHECK(cfg.get_string("a.c") == "hello");
  CHECK(cfg.get_vector("list") == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(cfg.get_bool("flag", false));
  CHECK(cfg.get_double("missing", 7.0) == 7.0);
  CHECK_THROWS_AS(cfg.get_double("missing"), ConfigError);
  CHECK_THROWS_AS(cfg.get_double("a.c"), ConfigError);
  CHECK_THROWS_AS(Config::parse_string("novalue\n"), ConfigError);
  // round trip
  const Config again = Config::parse_string(cfg.serialize());
  CHECK(again.get_double("a.b") == 1.5);
  CHECK(again.serialize() == cfg.serialize());
}

TEST_CASE("preset tables") {
  SUBCASE("hh") {
    const Preset hh = preset("hh");
    REQUIRE(hh.net.n_v() == 1);
    const NeuronSpec& n = hh.net.neurons[0];
    CHECK(n.c == 1.0);
    CHECK(n.mu_leak == 0.3);
    CHECK(n.nu_leak == -54.4);
    REQUIRE(n.currents.size() == 2);
    CHECK(n.currents[0].mu == 120.0);
    CHECK(n.currents[0].nu == 55.0);
    CHECK(n.currents[1].mu == 36.0);
    CHECK(n.currents[1].nu == -77.0);
    const GatingKinetics& m_na = n.currents[0].m_kin;
    CHECK(m_na.rho == -40.0);
    CHECK(m_na.kappa == 9.0);
    CHECK(m_na.tau_min == 0.04);
    CHECK(m_na.tau_max == 0.50);
    CHECK(m_na.zeta == -38.0);
    CHECK(m_na.chi == 30.0);
  }
  SUBCASE("hco") {
    const Preset hco = preset("hco");
    REQUIRE(hco.net.n_v() == 2);
    const NeuronSpec& n = hco.net.neurons[0];
    CHECK(n.mu_leak == 0.035);
    CHECK(n.nu_leak == -49.0);
    REQUIRE(n.currents.size() == 3);
    CHECK(n.currents[2].nu == 120.0);
    const GatingKinetics& h_ca = n.currents[2].h_kin;
    CHECK(h_ca.rho == -82.1);
    CHECK(h_ca.kappa == -5.5);
    CHECK(h_ca.tau_min == 40.49);
    CHECK(h_ca.tau_max == 126.51);
    CHECK(h_ca.zeta == -92.48);
    CHECK(h_ca.chi == -50.24);
    REQUIRE(n.synapses.size() == 1);
    CHECK(n.synapses[0].pre == 1);
    CHECK(hco.net.neurons[1].synapses[0].pre == 0);
    CHECK(n.synapses[0].mu == 4.0);
    CHECK(n.synapses[0].nu == -80.0);
    CHECK(n.synapses[0].kin.a_rate == 2.0);
    CHECK(n.synapses[0].kin.b_rate == 0.1);
  }
  SUBCASE("unknown preset") {
    CHECK_THROWS_AS(preset("squid"), ConfigError);
  }
}

TEST_CASE("calcium schedule endpoints, frozen") {
  CHECK(calcium_schedule(5000.0, 10000.0) == doctest::Approx(0.145));
  CHECK(calcium_schedule(0.0, 10000.0) ==
        doctest::Approx(0.11125903469734641).epsilon(1e-12));
  CHECK(calcium_schedule(10000.0, 10000.0) ==
        doctest::Approx(0.17874096530265359).epsilon(1e-12));
}

TEST_CASE("mismatch injection") {
  const NetworkSpec net = preset("hco").net;
  SUBCASE("zero percent leaves the spec untouched") {
    const NetworkSpec same = apply_mismatch(net, 0.0, 5);
    CHECK(same.neurons[0].currents[0].m_kin.rho ==
          net.neurons[0].currents[0].m_kin.rho);
    CHECK(same.neurons[1].synapses[0].kin.a_rate ==
          net.neurons[1].synapses[0].kin.a_rate);
  }
  SUBCASE("fixed seed is reproducible, different seeds differ") {
    const NetworkSpec a = apply_mismatch(net, 0.01, 7);
    const NetworkSpec b = apply_mismatch(net, 0.01, 7);
    const NetworkSpec c = apply_mismatch(net, 0.01, 8);
    CHECK(a.neurons[0].currents[0].m_kin.rho ==
          b.neurons[0].currents[0].m_kin.rho);
    CHECK(a.neurons[0].currents[0].m_kin.rho !=
          c.neurons[0].currents[0].m_kin.rho);
  }
  SUBCASE("every perturbed constant stays within the band") {
    const NetworkSpec a = apply_mismatch(net, 0.01, 42);
    for (int i = 0; i < 2; ++i) {
      for (size_t c = 0; c < net.neurons[i].currents.size(); ++c) {
        const GatingKinetics& kin0 = net.neurons[i].currents[c].m_kin;
        const GatingKinetics& kin1 = a.neurons[i].currents[c].m_kin;
        CHECK(std::abs(kin1.rho - kin0.rho) <= 0.01 * std::abs(kin0.rho));
        CHECK(std::abs(kin1.tau_max - kin0.tau_max) <=
              0.01 * std::abs(kin0.tau_max));
      }
      // voltage-equation constants untouched
      CHECK(a.neurons[i].currents[0].mu == net.neurons[i].currents[0].mu);
      CHECK(a.neurons[i].currents[0].nu == net.neurons[i].currents[0].nu);
      CHECK(a.neurons[i].mu_leak == net.neurons[i].mu_leak);
      CHECK(a.neurons[i].synapses[0].mu == net.neurons[i].synapses[0].mu);
    }
  }
}

TEST_CASE("scenario config round-trips through serialization") {
  const Config raw = Config::parse_file(kScenarioDir + "/fig4-hh-noiseless.cfg");
  const ScenarioConfig sc = ScenarioConfig::from_config(raw);
  CHECK(sc.preset_name == "hh");
  CHECK(sc.observer == ObserverKind::Augmented);
  CHECK(sc.alpha == 0.1);
  CHECK(sc.beta == 1.0);
  CHECK(sc.gamma == 1.0);
  CHECK(sc.t_end_ms == 250.0);
  REQUIRE(sc.theta0.size() == 4);
  CHECK(sc.theta0(0) == 2.0);
  CHECK(sc.theta0(3) == 10.0);
  REQUIRE(sc.eta0.size() == 3);
  CHECK(sc.eta0(1) == -20.0);
  // serialize and re-resolve: the resolved scenario must be identical
  const ScenarioConfig sc2 = ScenarioConfig::from_config(sc.to_config());
  CHECK(sc2.preset_name == sc.preset_name);
  CHECK(sc2.par.layout == sc.par.layout);
  CHECK(sc2.par.eta.size() == sc.par.eta.size());
  CHECK(sc2.alpha == sc.alpha);
  CHECK(sc2.t_end_ms == sc.t_end_ms);
  CHECK((sc2.theta0 - sc.theta0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sc2.inputs[0].period_ms == sc.inputs[0].period_ms);
}

TEST_CASE("seed isolation between noise and mismatch streams") {
  Config raw = Config::parse_file(kScenarioDir + "/fig4-hh-noiseless.cfg");
  raw.set("sim.t_end_ms", 5.0);
  raw.set("noise.sigma_mV", 2.0);
  raw.set("noise.seed", 11.0);
  raw.set("mismatch.percent", 0.01);
  raw.set("observer.kind", "none");
  RunOptions opts;
  opts.with_observer = false;
  opts.diagnostics = false;

  raw.set("mismatch.seed", 1.0);
  const ScenarioResult a = run_scenario(ScenarioConfig::from_config(raw), opts);
  raw.set("mismatch.seed", 2.0);
  const ScenarioResult b = run_scenario(ScenarioConfig::from_config(raw), opts);
  // the plant differs (different mismatch), the noise draws do not
  // identical draws; the subtraction reintroduces rounding at the level of
  // the differing voltages
  const MatrixXd ea = a.trajectory.y - a.trajectory.v;
  const MatrixXd eb = b.trajectory.y - b.trajectory.v;
  CHECK((ea - eb).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.trajectory.v - b.trajectory.v).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("trajectory csv round trip and summary recomputation") {
  Config raw = Config::parse_file(kScenarioDir + "/fig4-hh-noiseless.cfg");
  raw.set("sim.t_end_ms", 10.0);
  const ScenarioConfig sc = ScenarioConfig::from_config(raw);
  const std::string out_dir = "test_scenario_out";
  RunOptions opts;
  opts.out_dir = out_dir;
  opts.diagnostics = false;
  const ScenarioResult res = run_scenario(sc, opts);

  const CsvTable table =
      read_csv(out_dir + "/" + sc.name + "-trajectory.csv");
  const Preset pre = preset(sc.preset_name);
  GateTable gates(pre.net);
  const Trajectory back = trajectory_from_csv(table, 1, gates.n_w());
  REQUIRE(back.samples() == res.trajectory.samples());
  REQUIRE(back.observer.has_value());

  // recompute the headline summary numbers from the file contents
  MatrixXd v9 = res.trajectory.v;
  CHECK((back.v - v9.unaryExpr([](double x) {
          char b[32];
          std::snprintf(b, sizeof b, "%.9g", x);
          return std::atof(b);
        })).cwiseAbs().maxCoeff() == 0.0);
  const int spikes_file = count_spikes(back.v.col(0), back.t);
  CHECK(spikes_file == res.summary["spikes"][0].get<int>());

  // estimator columns: final estimates match the summary exactly
  const ScenarioConfig sc_b = sc;
  const auto series_last = back.observer->data.row(back.samples() - 1);
  const std::unique_ptr<ObserverRunner> runner = make_observer(sc, pre.net);
  auto* aug = dynamic_cast<AugmentedObserver*>(runner.get());
  REQUIRE(aug != nullptr);
  const VectorXd th = aug->theta_hat(series_last.transpose());
  for (int k = 0; k < th.size(); ++k)
    CHECK(th(k) == res.summary["params_final"][k].get<double>());
  std::filesystem::remove_all(out_dir);
}

TEST_CASE("determinism of a full scenario run") {
  Config raw = Config::parse_file(kScenarioDir + "/fig5-hh-noisy-b.cfg");
  raw.set("sim.t_end_ms", 20.0);
  raw.set("sim.output_stride", 10.0);
  const ScenarioConfig sc = ScenarioConfig::from_config(raw);
  RunOptions opts;
  opts.diagnostics = false;
  const ScenarioResult a = run_scenario(sc, opts);
  const ScenarioResult b = run_scenario(sc, opts);
  CHECK((a.trajectory.y - b.trajectory.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.trajectory.observer->data - b.trajectory.observer->data)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("diagnostics report on a short noiseless run") {
  Config raw = Config::parse_file(kScenarioDir + "/fig4-hh-noiseless.cfg");
  raw.set("sim.t_end_ms", 60.0);
  raw.set("analysis.rate_fit_begin_ms", 30.0);
  raw.set("analysis.rate_fit_end_ms", 60.0);
  const ScenarioConfig sc = ScenarioConfig::from_config(raw);
  RunOptions opts;
  const ScenarioResult res = run_scenario(sc, opts);
  const auto& diag = res.diagnostics;
  REQUIRE(diag.contains("pe"));
  REQUIRE(diag.contains("p_bounds"));
  REQUIRE(diag.contains("contraction"));
  REQUIRE(diag.contains("rate_fit"));
  CHECK(diag["pe"]["units"][0]["persistently_exciting"].get<bool>());
  CHECK(diag["p_bounds"]["units"][0]["pass"].get<bool>());
  CHECK(diag["p_bounds"]["units"][0]["min_eig_overall"].get<double>() > 0.0);
  CHECK(diag["contraction"]["lambda_w_per_ms"].get<double>() ==
        doctest::Approx(2.0 / 8.6));
  CHECK(diag["contraction"]["metric"][0]["m_lo"].get<double>() > 0.0);
  CHECK(diag["contraction"]["psi_bounds"][0]["within_bound"].get<bool>());
}
