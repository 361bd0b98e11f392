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
// Config-driven experiment scenarios: plant + observer simulation, summary
// metrics, diagnostics reports and the output-error landscape study.

#ifndef CONDEST_SCENARIO_HPP_
#define CONDEST_SCENARIO_HPP_

#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "condest/analysis.hpp"
#include "condest/batch.hpp"
#include "condest/config.hpp"
#include "condest/observers.hpp"
#include "condest/presets.hpp"

namespace condest {

enum class ObserverKind { None, Rls, Augmented, OutputError, Network };

/// Fully resolved scenario. Built from a Config; see scenarios/*.cfg for the
/// key vocabulary (units are spelled out in key names).
struct ScenarioConfig {
  std::string name;
  std::string preset_name = "hh";
  Parametrization par;            // resolved layout + eta map
  std::vector<InputSignal> inputs;

  double t_end_ms = 100.0;
  double dt_ms = 0.01;
  int output_stride = 1;

  VectorXd plant_v0, plant_w0;    // used when burn_in_ms == 0
  double burn_in_ms = 0.0;        // nominal-model burn-in, then snapshot
  VectorXd burn_in_v0, burn_in_w0;

  std::optional<NoiseSpec> noise;
  ParameterSchedule schedule;
  double mismatch_percent = 0.0;
  std::uint64_t mismatch_seed = 0;

  ObserverKind observer = ObserverKind::None;
  double alpha = 0.1, beta = 0.0, gamma = 1.0, p0_scale = 1.0;
  VectorXd obs_v0, obs_w0, theta0, eta0;

  // landscape study
  std::string landscape_current = "Na";
  double landscape_lo = 100.0, landscape_hi = 115.0, landscape_step = 1.0;
  double landscape_t_ms = 100.0;

  // analysis settings
  double pe_window_ms = 10.0;
  double pe_stride_ms = 1.0;
  double summary_window_ms = 0.0;   // final-window statistics, 0 = off
  double rate_fit_begin_ms = -1.0;  // default: second half of the run
  double rate_fit_end_ms = -1.0;

  static ScenarioConfig from_config(const Config& cfg);
  Config to_config() const;
};

struct ScenarioResult {
  Trajectory trajectory;
  nlohmann::json summary;
  nlohmann::json diagnostics;
  std::vector<LandscapePoint> landscape;  // landscape runs only
  double wall_time_ms = 0.0;
};

struct RunOptions {
  std::string out_dir;        // empty: nothing written
  bool with_observer = true;  // false: plant only (the `simulate` command)
  bool landscape = false;
  bool diagnostics = true;
};

ScenarioResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts);

/// Default saturation boxes: theta in [0, 10 x initial guess], eta (half
/// activations) in [-100, 0] mV, gates in [-0.05, 1.05].
SaturationSpec default_theta_box(const VectorXd& theta0);
SaturationSpec default_eta_box(int n_eta);
SaturationSpec default_w_box(int n_w);

/// Builds the observer named by the scenario (model = nominal preset).
std::unique_ptr<ObserverRunner> make_observer(const ScenarioConfig& cfg,
                                              const NetworkSpec& model);

/// Recomputes the diagnostics report from a trajectory (in memory or read
/// back from CSV columns) for the scenario's observer.
nlohmann::json compute_diagnostics(const ScenarioConfig& cfg,
                                   const Trajectory& traj);

/// Spike counts per neuron over the whole trajectory.
std::vector<int> spike_counts(const Trajectory& traj);

}  // namespace condest

#endif  // CONDEST_SCENARIO_HPP_
