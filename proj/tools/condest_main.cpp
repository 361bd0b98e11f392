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
// Experiment CLI. Subcommands:
//   simulate <config>     plant-only run, trajectory + summary
//   estimate <config>     plant + observer, adds diagnostics (and the batch
//                         least-squares table when batch.t_list_ms is set)
//   landscape <config>    output-error cost sweep on the scenario dataset
//   diagnose <csv>        recompute diagnostics from a trajectory file
//   list-presets          print the available model presets
// Exit codes: 0 success, 1 configuration error, 2 numerical failure.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "condest/batch.hpp"
#include "condest/csv.hpp"
#include "condest/scenario.hpp"

namespace {

using namespace condest;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  double dt_override = -1.0;
  long long seed_override = -1;
};

ScenarioConfig load_scenario(const CommonArgs& args, Config* raw = nullptr) {
  Config cfg = Config::parse_file(args.config_path);
  if (args.dt_override > 0.0) cfg.set("sim.dt_ms", args.dt_override);
  if (args.seed_override >= 0)
    cfg.set("noise.seed", static_cast<double>(args.seed_override));
  if (raw) *raw = cfg;
  return ScenarioConfig::from_config(cfg);
}

void print_summary(const ScenarioResult& result) {
  std::cout << result.summary.dump(2) << std::endl;
}

int run_estimate(const CommonArgs& args) {
  Config raw;
  const ScenarioConfig sc = load_scenario(args, &raw);
  RunOptions opts;
  opts.out_dir = args.out_dir;
  opts.with_observer = true;
  const ScenarioResult result = run_scenario(sc, opts);
  print_summary(result);

  if (raw.has("batch.t_list_ms")) {
    // batch least squares on this scenario's data, with the eta-designated
    // constants treated as known (the filtered-regressor problem)
    Parametrization par_lin = sc.par;
    par_lin.eta.clear();
    const Preset pre = preset(sc.preset_name);
    const double gamma = raw.get_double("batch.gamma_per_ms", sc.gamma);
    const double alpha = raw.get_double("batch.alpha_per_ms", sc.alpha);
    ModelOps ops(pre.net, par_lin);
    const FilteredDataset data =
        build_filtered_dataset(result.trajectory, pre.net, par_lin, gamma,
                               VectorXd::Zero(ops.n_w()));
    const MatrixXd p0 = raw.get_double("batch.p0", sc.p0_scale) *
                        MatrixXd::Identity(ops.n_theta(), ops.n_theta());
    const BatchSolution sol =
        batch_ls_solve(data, alpha, p0, raw.get_vector("batch.t_list_ms"));
    const std::string path = args.out_dir + "/" + sc.name + "-batch.csv";
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw ConfigError("cannot write " + path);
    std::fprintf(f, "T_ms");
    for (int k = 0; k < ops.n_theta(); ++k) std::fprintf(f, ",theta_%d", k);
    std::fprintf(f, ",min_eig_R,cost\n");
    for (const auto& at : sol.solutions) {
      std::fprintf(f, "%.9g", at.t);
      for (int k = 0; k < at.theta.size(); ++k)
        std::fprintf(f, ",%.9g", at.theta(k));
      std::fprintf(f, ",%.9g,%.9g\n", at.r_min_eig, at.cost);
    }
    std::fclose(f);
    std::cout << "batch table written to " << path << std::endl;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conductance-based circuit simulation and online estimation"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    if (needs_config)
      sub->add_option("config", args.config_path, "scenario config file")
          ->required();
    sub->add_option("--out-dir", args.out_dir, "output directory");
    sub->add_option("--dt", args.dt_override, "override sim.dt_ms");
    sub->add_option("--seed", args.seed_override, "override noise.seed");
  };

  auto* cmd_sim = app.add_subcommand("simulate", "integrate the plant only");
  add_common(cmd_sim);
  auto* cmd_est =
      app.add_subcommand("estimate", "run the scenario's adaptive observer");
  add_common(cmd_est);
  auto* cmd_land =
      app.add_subcommand("landscape", "output-error cost landscape study");
  add_common(cmd_land);
  auto* cmd_diag = app.add_subcommand(
      "diagnose", "recompute diagnostics from a trajectory csv");
  std::string csv_path;
  cmd_diag->add_option("trajectory", csv_path, "trajectory csv file")
      ->required();
  cmd_diag->add_option("--config", args.config_path, "scenario config file")
      ->required();
  cmd_diag->add_option("--out-dir", args.out_dir, "output directory");
  auto* cmd_list = app.add_subcommand("list-presets", "print model presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_list->parsed()) {
      for (const std::string& name : condest::preset_names())
        std::cout << name << "\n";
      return 0;
    }
    if (cmd_sim->parsed()) {
      const ScenarioConfig sc = load_scenario(args);
      RunOptions opts;
      opts.out_dir = args.out_dir;
      opts.with_observer = false;
      print_summary(run_scenario(sc, opts));
      return 0;
    }
    if (cmd_est->parsed()) return run_estimate(args);
    if (cmd_land->parsed()) {
      const ScenarioConfig sc = load_scenario(args);
      RunOptions opts;
      opts.out_dir = args.out_dir;
      opts.with_observer = false;
      opts.landscape = true;
      const ScenarioResult result = run_scenario(sc, opts);
      print_summary(result);
      return 0;
    }
    if (cmd_diag->parsed()) {
      const ScenarioConfig sc = load_scenario(args);
      const Preset pre = preset(sc.preset_name);
      GateTable gates(pre.net);
      const CsvTable table = read_csv(csv_path);
      const Trajectory traj =
          trajectory_from_csv(table, pre.net.n_v(), gates.n_w());
      const nlohmann::json diag = compute_diagnostics(sc, traj);
      std::cout << diag.dump(2) << std::endl;
      if (!args.out_dir.empty()) {
        std::filesystem::create_directories(args.out_dir);
        std::ofstream f(args.out_dir + "/" + sc.name + "-diagnostics.json");
        f << diag.dump(2) << "\n";
      }
      return 0;
    }
  } catch (const condest::ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 1;
  } catch (const condest::Error& e) {
    std::cerr << "numerical failure: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
