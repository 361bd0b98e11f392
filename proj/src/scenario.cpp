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

#include "condest/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "condest/csv.hpp"

namespace condest {

namespace {

using nlohmann::json;

// Summary metrics are computed from values rounded to the CSV precision so
// that recomputing them from the written file reproduces them exactly.
double round9(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return std::atof(buf);
}

VectorXd round9(const VectorXd& x) {
  VectorXd out(x.size());
  for (int i = 0; i < x.size(); ++i) out(i) = round9(x(i));
  return out;
}

std::string layout_name(ThetaLayout layout) {
  switch (layout) {
    case ThetaLayout::Conductances: return "conductances";
    case ThetaLayout::ScaledConductances: return "scaled_conductances";
    case ThetaLayout::ScaledConductancesReversals:
      return "scaled_conductances_reversals";
  }
  return "conductances";
}

ThetaLayout layout_from_name(const std::string& name) {
  if (name == "conductances") return ThetaLayout::Conductances;
  if (name == "scaled_conductances") return ThetaLayout::ScaledConductances;
  if (name == "scaled_conductances_reversals")
    return ThetaLayout::ScaledConductancesReversals;
  throw ConfigError("unknown parametrization layout '" + name + "'");
}

EtaField eta_field_from_name(const std::string& name) {
  if (name == "rho") return EtaField::Rho;
  if (name == "kappa") return EtaField::Kappa;
  if (name == "zeta") return EtaField::Zeta;
  if (name == "chi") return EtaField::Chi;
  throw ConfigError("unknown eta field '" + name + "'");
}

std::string eta_field_name(EtaField f) {
  switch (f) {
    case EtaField::Rho: return "rho";
    case EtaField::Kappa: return "kappa";
    case EtaField::Zeta: return "zeta";
    case EtaField::Chi: return "chi";
  }
  return "rho";
}

InputSignal input_from_config(const Config& cfg, const std::string& prefix) {
  const std::string kind = cfg.get_string(prefix + ".kind");
  if (kind == "constant")
    return InputSignal::constant(
        cfg.get_double(prefix + ".level_uA_per_cm2"));
  if (kind == "sine")
    return InputSignal::sine(cfg.get_double(prefix + ".amplitude_uA_per_cm2"),
                             cfg.get_double(prefix + ".period_ms"),
                             cfg.get_double(prefix + ".offset_uA_per_cm2", 0.0));
  if (kind == "pulse_train") {
    std::vector<Pulse> pulses;
    const std::vector<double> t0 = cfg.get_vector(prefix + ".pulse_starts_ms");
    const std::vector<double> w = cfg.get_vector(prefix + ".pulse_widths_ms");
    const std::vector<double> a =
        cfg.get_vector(prefix + ".pulse_amplitudes_uA_per_cm2");
    if (t0.size() != w.size() || t0.size() != a.size())
      throw ConfigError(prefix + ": pulse lists must have matching lengths");
    for (size_t i = 0; i < t0.size(); ++i) pulses.push_back({t0[i], w[i], a[i]});
    return InputSignal::pulse_train(
        cfg.get_double(prefix + ".baseline_uA_per_cm2", 0.0), pulses);
  }
  if (kind == "piecewise_linear")
    return InputSignal::piecewise_linear(
        cfg.get_vector(prefix + ".knots_t_ms"),
        cfg.get_vector(prefix + ".knots_uA_per_cm2"));
  throw ConfigError(prefix + ": unknown input kind '" + kind + "'");
}

void input_to_config(const InputSignal& in, Config& cfg,
                     const std::string& prefix) {
  switch (in.kind()) {
    case InputSignal::Kind::Constant:
      cfg.set(prefix + ".kind", "constant");
      cfg.set(prefix + ".level_uA_per_cm2", in.level);
      break;
    case InputSignal::Kind::Sine:
      cfg.set(prefix + ".kind", "sine");
      cfg.set(prefix + ".amplitude_uA_per_cm2", in.amplitude);
      cfg.set(prefix + ".period_ms", in.period_ms);
      cfg.set(prefix + ".offset_uA_per_cm2", in.offset);
      break;
    case InputSignal::Kind::PulseTrain: {
      cfg.set(prefix + ".kind", "pulse_train");
      cfg.set(prefix + ".baseline_uA_per_cm2", in.baseline);
      std::vector<double> t0, w, a;
      for (const Pulse& p : in.pulses) {
        t0.push_back(p.t_start);
        w.push_back(p.width);
        a.push_back(p.amplitude);
      }
      cfg.set(prefix + ".pulse_starts_ms", t0);
      cfg.set(prefix + ".pulse_widths_ms", w);
      cfg.set(prefix + ".pulse_amplitudes_uA_per_cm2", a);
      break;
    }
    case InputSignal::Kind::PiecewiseLinear:
      cfg.set(prefix + ".kind", "piecewise_linear");
      cfg.set(prefix + ".knots_t_ms", in.knots_t);
      cfg.set(prefix + ".knots_uA_per_cm2", in.knots_v);
      break;
  }
}

VectorXd vec_from_config(const Config& cfg, const std::string& key) {
  const std::vector<double> v = cfg.get_vector(key);
  return Eigen::Map<const VectorXd>(v.data(), static_cast<int>(v.size()));
}

std::vector<double> to_std(const VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// ScenarioConfig

ScenarioConfig ScenarioConfig::from_config(const Config& cfg) {
  ScenarioConfig sc;
  sc.name = cfg.get_string("scenario.name", "unnamed");
  sc.preset_name = cfg.get_string("model.preset", "hh");
  const Preset pre = preset(sc.preset_name);
  const int n_v = pre.net.n_v();
  GateTable gates(pre.net);

  sc.par = pre.par;
  if (cfg.has("parametrization.layout"))
    sc.par.layout = layout_from_name(cfg.get_string("parametrization.layout"));
  if (cfg.has("parametrization.eta")) {
    sc.par.eta.clear();
    for (const std::string& item : cfg.get_string_list("parametrization.eta")) {
      if (item == "none") continue;
      // format: <gate_label>.<field>[.<neuron>]
      const size_t d1 = item.find('.');
      if (d1 == std::string::npos)
        throw ConfigError("parametrization.eta entry '" + item +
                          "': expected gate.field");
      const std::string gate_label = item.substr(0, d1);
      std::string rest = item.substr(d1 + 1);
      int neuron = 0;
      const size_t d2 = rest.find('.');
      if (d2 != std::string::npos) {
        neuron = std::stoi(rest.substr(d2 + 1));
        rest = rest.substr(0, d2);
      }
      sc.par.eta.push_back(
          {gates.find(gate_label, neuron), eta_field_from_name(rest)});
    }
  }

  for (int i = 0; i < n_v; ++i) {
    const std::string per = "input." + std::to_string(i);
    sc.inputs.push_back(cfg.has(per + ".kind")
                            ? input_from_config(cfg, per)
                            : input_from_config(cfg, "input.all"));
  }

  sc.t_end_ms = cfg.get_double("sim.t_end_ms");
  sc.dt_ms = cfg.get_double("sim.dt_ms", 0.01);
  sc.output_stride = cfg.get_int("sim.output_stride", 1);

  if (cfg.has("plant.v0_mV")) {
    sc.plant_v0 = vec_from_config(cfg, "plant.v0_mV");
    sc.plant_w0 = vec_from_config(cfg, "plant.w0");
  }
  sc.burn_in_ms = cfg.get_double("plant.burn_in_ms", 0.0);
  if (sc.burn_in_ms > 0.0) {
    sc.burn_in_v0 = vec_from_config(cfg, "plant.burn_in_v0_mV");
    sc.burn_in_w0 = vec_from_config(cfg, "plant.burn_in_w0");
  }

  if (cfg.has("noise.sigma_mV")) {
    NoiseSpec ns;
    ns.sigma = cfg.get_double("noise.sigma_mV");
    ns.seed = static_cast<std::uint64_t>(cfg.get_int("noise.seed", 0));
    if (ns.sigma > 0.0) sc.noise = ns;
  }

  if (cfg.has("schedule.calcium_t_final_ms"))
    sc.schedule.entries.push_back(calcium_schedule_entry(
        cfg.get_double("schedule.calcium_t_final_ms")));

  sc.mismatch_percent = cfg.get_double("mismatch.percent", 0.0);
  sc.mismatch_seed =
      static_cast<std::uint64_t>(cfg.get_int("mismatch.seed", 0));

  const std::string kind = cfg.get_string("observer.kind", "none");
  if (kind == "none") sc.observer = ObserverKind::None;
  else if (kind == "rls") sc.observer = ObserverKind::Rls;
  else if (kind == "augmented") sc.observer = ObserverKind::Augmented;
  else if (kind == "output_error") sc.observer = ObserverKind::OutputError;
  else if (kind == "network") sc.observer = ObserverKind::Network;
  else throw ConfigError("unknown observer kind '" + kind + "'");

  if (sc.observer != ObserverKind::None) {
    sc.alpha = cfg.get_double("observer.alpha_per_ms");
    sc.beta = cfg.get_double("observer.beta", 0.0);
    sc.gamma = cfg.get_double("observer.gamma_per_ms");
    sc.p0_scale = cfg.get_double("observer.p0", 1.0);
    sc.obs_v0 = vec_from_config(cfg, "observer.v0_mV");
    sc.obs_w0 = vec_from_config(cfg, "observer.w0");
    sc.theta0 = vec_from_config(cfg, "observer.theta0");
    sc.eta0 = cfg.has("observer.eta0") ? vec_from_config(cfg, "observer.eta0")
                                       : VectorXd(0);
  }

  sc.landscape_current = cfg.get_string("landscape.current", "Na");
  sc.landscape_lo = cfg.get_double("landscape.lo_mS_per_cm2", 100.0);
  sc.landscape_hi = cfg.get_double("landscape.hi_mS_per_cm2", 115.0);
  sc.landscape_step = cfg.get_double("landscape.step_mS_per_cm2", 1.0);
  sc.landscape_t_ms = cfg.get_double("landscape.t_ms", 100.0);

  sc.pe_window_ms = cfg.get_double("analysis.pe_window_ms", 10.0);
  sc.pe_stride_ms = cfg.get_double("analysis.pe_stride_ms", 1.0);
  sc.summary_window_ms = cfg.get_double("analysis.summary_window_ms", 0.0);
  sc.rate_fit_begin_ms = cfg.get_double("analysis.rate_fit_begin_ms", -1.0);
  sc.rate_fit_end_ms = cfg.get_double("analysis.rate_fit_end_ms", -1.0);
  return sc;
}

Config ScenarioConfig::to_config() const {
  Config cfg;
  cfg.set("scenario.name", name);
  cfg.set("model.preset", preset_name);
  cfg.set("parametrization.layout", layout_name(par.layout));
  {
    const Preset pre = preset(preset_name);
    GateTable gates(pre.net);
    std::string eta_list;
    for (size_t i = 0; i < par.eta.size(); ++i) {
      const GateRef& g = gates.gate(par.eta[i].gate);
      if (i) eta_list += ", ";
      eta_list += g.label + "." + eta_field_name(par.eta[i].field) + "." +
                  std::to_string(g.neuron);
    }
    cfg.set("parametrization.eta",
            eta_list.empty() ? std::string("none") : eta_list);
  }
  for (size_t i = 0; i < inputs.size(); ++i)
    input_to_config(inputs[i], cfg, "input." + std::to_string(i));
  cfg.set("sim.t_end_ms", t_end_ms);
  cfg.set("sim.dt_ms", dt_ms);
  cfg.set("sim.output_stride", static_cast<double>(output_stride));
  if (plant_v0.size()) {
    cfg.set("plant.v0_mV", to_std(plant_v0));
    cfg.set("plant.w0", to_std(plant_w0));
  }
  if (burn_in_ms > 0.0) {
    cfg.set("plant.burn_in_ms", burn_in_ms);
    cfg.set("plant.burn_in_v0_mV", to_std(burn_in_v0));
    cfg.set("plant.burn_in_w0", to_std(burn_in_w0));
  }
  if (noise) {
    cfg.set("noise.sigma_mV", noise->sigma);
    cfg.set("noise.seed", static_cast<double>(noise->seed));
  }
  for (const ScheduleEntry& e : schedule.entries)
    if (e.kind == ScheduleEntry::Kind::Logistic && e.current_name == "Ca")
      cfg.set("schedule.calcium_t_final_ms", 2.0 * e.p2);
  if (mismatch_percent > 0.0) {
    cfg.set("mismatch.percent", mismatch_percent);
    cfg.set("mismatch.seed", static_cast<double>(mismatch_seed));
  }
  switch (observer) {
    case ObserverKind::None: cfg.set("observer.kind", "none"); break;
    case ObserverKind::Rls: cfg.set("observer.kind", "rls"); break;
    case ObserverKind::Augmented: cfg.set("observer.kind", "augmented"); break;
    case ObserverKind::OutputError:
      cfg.set("observer.kind", "output_error");
      break;
    case ObserverKind::Network: cfg.set("observer.kind", "network"); break;
  }
  if (observer != ObserverKind::None) {
    cfg.set("observer.alpha_per_ms", alpha);
    cfg.set("observer.beta", beta);
    cfg.set("observer.gamma_per_ms", gamma);
    cfg.set("observer.p0", p0_scale);
    cfg.set("observer.v0_mV", to_std(obs_v0));
    cfg.set("observer.w0", to_std(obs_w0));
    cfg.set("observer.theta0", to_std(theta0));
    if (eta0.size()) cfg.set("observer.eta0", to_std(eta0));
  }
  cfg.set("landscape.current", landscape_current);
  cfg.set("landscape.lo_mS_per_cm2", landscape_lo);
  cfg.set("landscape.hi_mS_per_cm2", landscape_hi);
  cfg.set("landscape.step_mS_per_cm2", landscape_step);
  cfg.set("landscape.t_ms", landscape_t_ms);
  cfg.set("analysis.pe_window_ms", pe_window_ms);
  cfg.set("analysis.pe_stride_ms", pe_stride_ms);
  if (summary_window_ms > 0.0)
    cfg.set("analysis.summary_window_ms", summary_window_ms);
  if (rate_fit_begin_ms >= 0.0) {
    cfg.set("analysis.rate_fit_begin_ms", rate_fit_begin_ms);
    cfg.set("analysis.rate_fit_end_ms", rate_fit_end_ms);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Observer construction

SaturationSpec default_theta_box(const VectorXd& theta0) {
  VectorXd lo = VectorXd::Zero(theta0.size());
  VectorXd hi = 10.0 * theta0;
  for (int i = 0; i < hi.size(); ++i)
    if (!(hi(i) > 0.0)) hi(i) = 1.0;  // degenerate guesses get a unit box
  return SaturationSpec::box(lo, hi);
}

SaturationSpec default_eta_box(int n_eta) {
  return SaturationSpec::box(VectorXd::Constant(n_eta, -100.0),
                             VectorXd::Constant(n_eta, 0.0));
}

SaturationSpec default_w_box(int n_w) {
  return SaturationSpec::box(VectorXd::Constant(n_w, -0.05),
                             VectorXd::Constant(n_w, 1.05));
}

std::unique_ptr<ObserverRunner> make_observer(const ScenarioConfig& cfg,
                                              const NetworkSpec& model) {
  ModelOps ops(model, cfg.par);
  if (cfg.observer == ObserverKind::Rls) {
    RlsObserverConfig rc;
    rc.hyper = Hyperparameters::scalar_p0(cfg.alpha, cfg.beta, cfg.gamma,
                                          cfg.p0_scale, ops.n_theta());
    rc.v0 = cfg.obs_v0;
    rc.w0 = cfg.obs_w0;
    rc.theta0 = cfg.theta0;
    return std::make_unique<RlsObserver>(model, cfg.par, rc);
  }
  AugmentedObserverConfig ac;
  const int np = ops.n_theta() + ops.n_eta();
  ac.hyper = Hyperparameters::scalar_p0(cfg.alpha, cfg.beta, cfg.gamma,
                                        cfg.p0_scale, np);
  ac.v0 = cfg.obs_v0;
  ac.w0 = cfg.obs_w0;
  ac.theta0 = cfg.theta0;
  ac.eta0 = cfg.eta0.size() ? cfg.eta0 : VectorXd::Zero(ops.n_eta());
  ac.sat_theta = default_theta_box(cfg.theta0);
  ac.sat_w = default_w_box(ops.n_w());
  if (ops.n_eta() > 0) ac.sat_eta = default_eta_box(ops.n_eta());
  switch (cfg.observer) {
    case ObserverKind::Augmented:
      ac.regressor_at = RegressorAt::Measurement;
      return std::make_unique<AugmentedObserver>(model, cfg.par, ac);
    case ObserverKind::OutputError:
      ac.regressor_at = RegressorAt::Estimate;
      return std::make_unique<AugmentedObserver>(model, cfg.par, ac);
    case ObserverKind::Network:
      ac.regressor_at = RegressorAt::Estimate;
      return std::make_unique<DecoupledNetworkObserver>(model, cfg.par, ac);
    default:
      throw ConfigError("make_observer: scenario has no observer");
  }
}

// ---------------------------------------------------------------------------
// Series extraction

namespace {

struct UnitSeries {
  std::vector<MatrixXd> psi_v, psi_w, p;
  int n_v_unit = 1;
};

struct EstimateSeries {
  MatrixXd v_hat, w_hat, theta, eta;  // samples x dim, global order
  std::vector<UnitSeries> units;
};

EstimateSeries extract_series(const ScenarioConfig& cfg,
                              const NetworkSpec& model,
                              const Trajectory& traj) {
  if (!traj.observer)
    throw ConfigError("trajectory has no observer columns");
  const std::unique_ptr<ObserverRunner> runner = make_observer(cfg, model);
  const int n = traj.samples();
  EstimateSeries out;

  auto* rls = dynamic_cast<RlsObserver*>(runner.get());
  auto* aug = dynamic_cast<AugmentedObserver*>(runner.get());
  auto* net = dynamic_cast<DecoupledNetworkObserver*>(runner.get());

  const int cols = static_cast<int>(traj.observer->data.cols());
  if (cols != runner->state_size())
    throw ConfigError("observer trace does not match the configured observer");

  for (int r = 0; r < n; ++r) {
    const VectorXd s = traj.observer->data.row(r).transpose();
    VectorXd vh, wh, th, et;
    if (rls) {
      vh = rls->v_hat(s); wh = rls->w_hat(s); th = rls->theta_hat(s);
      et = VectorXd(0);
      if (r == 0) out.units.resize(1);
      out.units[0].psi_v.push_back(rls->psi(s));
      out.units[0].psi_w.push_back(
          MatrixXd::Zero(rls->n_w(), rls->n_theta()));
      out.units[0].p.push_back(rls->p(s));
      out.units[0].n_v_unit = rls->n_v();
    } else if (aug) {
      vh = aug->v_hat(s); wh = aug->w_hat(s); th = aug->theta_hat(s);
      et = aug->eta_hat(s);
      if (r == 0) out.units.resize(1);
      out.units[0].psi_v.push_back(aug->psi_v(s));
      out.units[0].psi_w.push_back(aug->psi_w(s));
      out.units[0].p.push_back(aug->p(s));
      out.units[0].n_v_unit = aug->n_v();
    } else if (net) {
      vh = net->v_hat(s); wh = net->w_hat(s); th = net->theta_hat(s);
      et = net->eta_hat(s);
      if (r == 0) out.units.resize(net->n_v());
      for (int i = 0; i < net->n_v(); ++i) {
        out.units[i].psi_v.push_back(net->psi_block(s, i));
        out.units[i].psi_w.push_back(net->psi_w_block(s, i));
        out.units[i].p.push_back(net->p_block(s, i));
        out.units[i].n_v_unit = 1;
      }
    }
    if (r == 0) {
      out.v_hat.resize(n, vh.size());
      out.w_hat.resize(n, wh.size());
      out.theta.resize(n, th.size());
      out.eta.resize(n, et.size());
    }
    out.v_hat.row(r) = vh.transpose();
    out.w_hat.row(r) = wh.transpose();
    out.theta.row(r) = th.transpose();
    out.eta.row(r) = et.transpose();
  }

  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Diagnostics

nlohmann::json compute_diagnostics(const ScenarioConfig& cfg,
                                   const Trajectory& traj) {
  const Preset pre = preset(cfg.preset_name);
  const NetworkSpec& model = pre.net;
  ModelOps ops(model, cfg.par);
  const EstimateSeries series = extract_series(cfg, model, traj);
  const int n = traj.samples();
  const double dt = traj.dt * traj.stride;
  const bool output_error_args = cfg.observer == ObserverKind::OutputError ||
                                 cfg.observer == ObserverKind::Network;

  json diag;
  const ContractionReport con = internal_contraction_rate(model);
  diag["contraction"]["lambda_w_per_ms"] = con.lambda_w;
  diag["contraction"]["gate_rates_per_ms"] = con.gate_rates;
  diag["contraction"]["lambda_v_margin_per_ms"] = con.lambda_v_margin;

  // trajectory sups of the proof quantities
  const SaturationSpec sat_th = default_theta_box(cfg.theta0.size()
                                                      ? cfg.theta0
                                                      : ops.theta_true());
  const SaturationSpec sat_w = default_w_box(ops.n_w());
  double sup_phi = 0.0, sup_jw = 0.0, sup_jeta_col = 0.0;
  for (int r = 0; r < n; ++r) {
    const VectorXd y = traj.y.row(r).transpose();
    const VectorXd u = traj.u.row(r).transpose();
    const VectorXd wh = series.w_hat.row(r).transpose();
    const VectorXd th = series.theta.row(r).transpose();
    const VectorXd et = series.eta.row(r).transpose();
    const VectorXd v_arg =
        output_error_args ? VectorXd(series.v_hat.row(r).transpose()) : y;
    const MatrixXd phi = ops.regressor_phi(v_arg, wh, u);
    sup_phi = std::max(sup_phi, phi.jacobiSvd().singularValues()(0));
    const MatrixXd jw =
        ops.jacobian_output_w(v_arg, wh, u, sat_th.eval(th));
    sup_jw = std::max(sup_jw, jw.jacobiSvd().singularValues()(0));
    if (ops.n_eta() > 0) {
      const MatrixXd jeta = ops.jacobian_internal_eta(y, et, sat_w.eval(wh));
      for (int c = 0; c < jeta.cols(); ++c)
        sup_jeta_col = std::max(sup_jeta_col, jeta.col(c).norm());
    }
  }
  diag["contraction"]["sup_phi_norm"] = sup_phi;
  diag["contraction"]["sup_jacobian_w_norm"] = sup_jw;
  diag["contraction"]["sup_jacobian_eta_col_norm"] = sup_jeta_col;

  // Lemma-style regressor bound: sup||Phi|| plus the filtered eta-block
  // contribution (zero when eta is empty)
  const double c_bar =
      sup_phi + (ops.n_eta() > 0
                     ? (2.0 / con.lambda_w) * sup_jw * sup_jeta_col *
                           static_cast<double>(ops.n_eta())
                     : 0.0);
  const double psi_w_bound =
      cfg.gamma * static_cast<double>(ops.n_eta()) * (2.0 / con.lambda_w) *
      sup_jeta_col;
  diag["contraction"]["regressor_bound_c"] = c_bar;
  diag["contraction"]["psi_w_bound"] = psi_w_bound;

  double epsilon = 0.0;
  if (sup_jw > 0.0)
    epsilon = epsilon_formula(0.0, con.lambda_w, cfg.gamma,
                              MatrixXd::Identity(1, 1), sup_jw);
  diag["contraction"]["epsilon"] = epsilon;

  // per estimation unit: PE, covariance bounds, metric bounds, psi bound
  json pe_units = json::array();
  json pb_units = json::array();
  json metric_units = json::array();
  json psi_units = json::array();
  for (size_t uix = 0; uix < series.units.size(); ++uix) {
    const UnitSeries& unit = series.units[uix];
    const PeReport pe =
        pe_gramian(unit.psi_v, dt, cfg.pe_window_ms, cfg.pe_stride_ms);
    pe_units.push_back({{"window_ms", pe.window_ms},
                        {"stride_ms", pe.stride_ms},
                        {"delta", pe.delta},
                        {"threshold", pe.threshold},
                        {"persistently_exciting", pe.persistently_exciting}});

    double sup_psi_v = 0.0, sup_psi_w = 0.0;
    for (int r = 0; r < n; ++r) {
      sup_psi_v = std::max(sup_psi_v,
                           unit.psi_v[r].jacobiSvd().singularValues()(0));
      if (unit.psi_w[r].size())
        sup_psi_w = std::max(sup_psi_w,
                             unit.psi_w[r].jacobiSvd().singularValues()(0));
    }
    psi_units.push_back({{"sup_psi_v", sup_psi_v},
                         {"sup_psi_w", sup_psi_w},
                         {"c_bar", c_bar},
                         {"psi_w_bound", psi_w_bound},
                         {"within_bound", sup_psi_v <= c_bar &&
                                              sup_psi_w <= psi_w_bound}});

    json pb;
    if (pe.delta > 0.0) {
      const double bound = (cfg.beta > 0.0 || ops.n_eta() > 0) ? c_bar
                                                               : sup_phi;
      const int np = static_cast<int>(unit.p.front().rows());
      const PBounds bounds = theoretical_p_bounds(
          cfg.alpha, cfg.beta, cfg.gamma, pe.delta, pe.window_ms, bound,
          cfg.p0_scale * MatrixXd::Identity(np, np));
      const PBoundsReport rep =
          verify_p_bounds(unit.p, traj.t, bounds, pe.window_ms);
      pb = {{"p_lo", rep.bounds.p_lo},
            {"p_hi", rep.bounds.p_hi},
            {"empirical_min", rep.empirical_min},
            {"empirical_max", rep.empirical_max},
            {"min_eig_overall", rep.min_eig_overall},
            {"pass", rep.pass}};
    } else {
      pb = {{"pass", false}, {"note", "regressor not persistently exciting"}};
    }
    pb_units.push_back(pb);

    if (epsilon > 0.0) {
      std::vector<MatrixXd> psi_stack(unit.psi_v.size());
      for (size_t r = 0; r < unit.psi_v.size(); ++r) {
        MatrixXd s(unit.psi_v[r].rows() + unit.psi_w[r].rows(),
                   unit.psi_v[r].cols());
        s << unit.psi_v[r], unit.psi_w[r];
        psi_stack[r] = s;
      }
      const int n_w_unit =
          static_cast<int>(unit.psi_w.front().rows());
      const MetricEigenBounds mb = metric_eigen_bounds(
          psi_stack, unit.p, unit.n_v_unit, cfg.gamma, epsilon,
          MatrixXd::Identity(n_w_unit, n_w_unit));
      metric_units.push_back({{"m_lo", mb.m_lo},
                              {"m_hi", mb.m_hi},
                              {"ratio", mb.m_hi / mb.m_lo}});
    }
  }
  diag["pe"]["units"] = pe_units;
  diag["p_bounds"]["units"] = pb_units;
  diag["contraction"]["metric"] = metric_units;
  diag["contraction"]["psi_bounds"] = psi_units;
  diag["robustness"] = {{"eps_over_gamma", epsilon / cfg.gamma}};

  // convergence-rate fit on the full estimation error
  {
    NetworkSpec scheduled = model;
    ModelOps sched_ops(scheduled, cfg.par);
    const VectorXd eta_true = sched_ops.eta_true();
    VectorXd err(n);
    for (int r = 0; r < n; ++r) {
      cfg.schedule.apply(traj.t[r], scheduled);
      const VectorXd th_true = sched_ops.theta_true();
      double sq = (series.v_hat.row(r) - traj.v.row(r)).squaredNorm() +
                  (series.w_hat.row(r) - traj.w.row(r)).squaredNorm() +
                  (series.theta.row(r).transpose() - th_true).squaredNorm();
      if (series.eta.cols() > 0)
        sq += (series.eta.row(r).transpose() - eta_true).squaredNorm();
      err(r) = std::sqrt(sq);
    }
    const double t_begin = cfg.rate_fit_begin_ms >= 0.0
                               ? cfg.rate_fit_begin_ms
                               : 0.5 * traj.t.back();
    const double t_end =
        cfg.rate_fit_end_ms >= 0.0 ? cfg.rate_fit_end_ms : traj.t.back();
    try {
      const RateFit fit = convergence_rate_fit(err, traj.t, t_begin, t_end);
      diag["rate_fit"] = {{"lambda_hat_per_ms", fit.lambda_hat},
                          {"r_squared", fit.r_squared},
                          {"t_begin_ms", fit.t_begin},
                          {"t_end_ms", fit.t_end},
                          {"initial_error", err(0)},
                          {"final_error", err(n - 1)}};
    } catch (const ConfigError&) {
      diag["rate_fit"] = {{"note", "window too short for a fit"}};
    }
  }
  return diag;
}

// ---------------------------------------------------------------------------
// run_scenario

std::vector<int> spike_counts(const Trajectory& traj) {
  std::vector<int> counts;
  for (int i = 0; i < traj.n_v(); ++i)
    counts.push_back(count_spikes(traj.v.col(i), traj.t));
  return counts;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts) {
  const auto wall_start = std::chrono::steady_clock::now();
  const Preset pre = preset(cfg.preset_name);
  const NetworkSpec& nominal = pre.net;
  ModelOps ops(nominal, cfg.par);

  const NetworkSpec plant =
      apply_mismatch(nominal, cfg.mismatch_percent, cfg.mismatch_seed);

  VectorXd v0 = cfg.plant_v0, w0 = cfg.plant_w0;
  if (cfg.burn_in_ms > 0.0) {
    SimulateOptions bopts;
    bopts.t_end = cfg.burn_in_ms;
    bopts.dt = cfg.dt_ms;
    bopts.output_stride = std::max(1, static_cast<int>(cfg.burn_in_ms /
                                                       cfg.dt_ms / 8));
    const Trajectory burn =
        simulate(nominal, cfg.inputs, ParameterSchedule{}, cfg.burn_in_v0,
                 cfg.burn_in_w0, bopts, nullptr);
    v0 = burn.v.row(burn.samples() - 1).transpose();
    w0 = burn.w.row(burn.samples() - 1).transpose();
  }
  if (v0.size() != nominal.n_v())
    throw ConfigError("scenario: missing plant initial state");

  std::unique_ptr<ObserverRunner> runner;
  if (opts.with_observer && cfg.observer != ObserverKind::None)
    runner = make_observer(cfg, nominal);

  SimulateOptions sopts;
  sopts.t_end = cfg.t_end_ms;
  sopts.dt = cfg.dt_ms;
  sopts.output_stride = cfg.output_stride;
  sopts.noise = cfg.noise;

  ScenarioResult result;
  result.trajectory = simulate(plant, cfg.inputs, cfg.schedule, v0, w0, sopts,
                               runner.get());
  const Trajectory& traj = result.trajectory;

  if (opts.landscape) {
    std::vector<double> grid;
    for (double g = cfg.landscape_lo; g <= cfg.landscape_hi + 1e-9;
         g += cfg.landscape_step)
      grid.push_back(g);
    // candidate values are conductances; locate the theta entry of the
    // swept current on neuron 0
    int cur_ix = -1;
    for (size_t c = 0; c < nominal.neurons[0].currents.size(); ++c)
      if (nominal.neurons[0].currents[c].name == cfg.landscape_current)
        cur_ix = static_cast<int>(c);
    if (cur_ix < 0)
      throw ConfigError("landscape: unknown current '" +
                        cfg.landscape_current + "'");
    const int mu0 =
        ops.theta_offset(0) +
        (cfg.par.layout == ThetaLayout::Conductances ? 0 : 1);
    const double inv_c =
        cfg.par.layout == ThetaLayout::Conductances
            ? 1.0
            : 1.0 / nominal.neurons[0].c;
    std::vector<double> theta_grid;
    for (double g : grid) theta_grid.push_back(g * inv_c);
    result.landscape = cost_landscape(
        ops.theta_true(), mu0 + cur_ix, theta_grid, traj, cfg.inputs, nominal,
        cfg.par, cfg.landscape_t_ms);
    for (size_t i = 0; i < result.landscape.size(); ++i)
      result.landscape[i].candidate = grid[i];  // report in conductance units
  }

  // ----- summary (computed from CSV-precision values) -----
  json summary;
  summary["scenario"] = cfg.name;
  summary["seed"] = cfg.noise ? static_cast<double>(cfg.noise->seed) : 0.0;
  summary["mismatch_seed"] = static_cast<double>(cfg.mismatch_seed);
  summary["dt_ms"] = cfg.dt_ms;
  {
    json spikes = json::array();
    MatrixXd v9 = traj.v;
    for (int r = 0; r < v9.rows(); ++r)
      for (int c = 0; c < v9.cols(); ++c) v9(r, c) = round9(v9(r, c));
    for (int i = 0; i < traj.n_v(); ++i)
      spikes.push_back(count_spikes(v9.col(i), traj.t));
    summary["spikes"] = spikes;
  }

  if (runner && traj.observer) {
    const EstimateSeries series = extract_series(cfg, nominal, traj);
    const int last = traj.samples() - 1;

    NetworkSpec scheduled = nominal;
    ModelOps sched_ops(scheduled, cfg.par);
    cfg.schedule.apply(traj.t[last], scheduled);
    const VectorXd theta_true = sched_ops.theta_true();
    const VectorXd eta_true = sched_ops.eta_true();
    const VectorXd theta_final = round9(VectorXd(series.theta.row(last)));
    const VectorXd eta_final = round9(VectorXd(series.eta.row(last)));

    summary["params_true"] = to_std(theta_true);
    summary["params_final"] = to_std(theta_final);
    json rel = json::array();
    for (int k = 0; k < theta_true.size(); ++k)
      rel.push_back(std::abs(theta_final(k) - theta_true(k)) /
                    std::abs(theta_true(k)));
    summary["rel_errors"] = rel;
    if (eta_true.size()) {
      summary["eta_true"] = to_std(eta_true);
      summary["eta_final"] = to_std(eta_final);
      json abs_err = json::array();
      for (int k = 0; k < eta_true.size(); ++k)
        abs_err.push_back(std::abs(eta_final(k) - eta_true(k)));
      summary["eta_abs_errors"] = abs_err;
    }

    if (cfg.summary_window_ms > 0.0) {
      const double t_from = traj.t[last] - cfg.summary_window_ms;
      std::vector<int> rows;
      for (int r = 0; r <= last; ++r)
        if (traj.t[r] >= t_from) rows.push_back(r);
      const int m = static_cast<int>(rows.size());
      json means = json::array(), stds = json::array(),
           true_means = json::array();
      NetworkSpec sch = nominal;
      ModelOps sch_ops(sch, cfg.par);
      for (int k = 0; k < series.theta.cols(); ++k) {
        double mean = 0.0;
        for (int r : rows) mean += round9(series.theta(r, k));
        mean /= m;
        double var = 0.0;
        for (int r : rows) {
          const double d = round9(series.theta(r, k)) - mean;
          var += d * d;
        }
        means.push_back(mean);
        stds.push_back(m > 1 ? std::sqrt(var / (m - 1)) : 0.0);
      }
      for (int k = 0; k < series.theta.cols(); ++k) {
        double mean = 0.0;
        for (int r : rows) {
          cfg.schedule.apply(traj.t[r], sch);
          mean += sch_ops.theta_true()(k);
        }
        true_means.push_back(mean / m);
      }
      summary["window_ms"] = cfg.summary_window_ms;
      summary["theta_window_mean"] = means;
      summary["theta_window_std"] = stds;
      summary["theta_true_window_mean"] = true_means;
    }

    if (opts.diagnostics) result.diagnostics = compute_diagnostics(cfg, traj);
  }

  const auto wall_end = std::chrono::steady_clock::now();
  result.wall_time_ms =
      std::chrono::duration<double, std::milli>(wall_end - wall_start).count();
  summary["wall_time_ms"] = result.wall_time_ms;

  // ----- outputs -----
  if (!opts.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(opts.out_dir);
    const std::string base = opts.out_dir + "/" + cfg.name;
    GateTable gates(nominal);
    write_trajectory_csv(base + "-trajectory.csv", traj, gates);
    if (!result.diagnostics.is_null()) {
      std::ofstream d(base + "-diagnostics.json");
      d << result.diagnostics.dump(2) << "\n";
      summary["diagnostics_path"] = base + "-diagnostics.json";
    }
    if (opts.landscape) {
      std::FILE* f = std::fopen((base + "-landscape.csv").c_str(), "w");
      if (!f) throw ConfigError("cannot write landscape csv");
      std::fprintf(f, "candidate,cost,gradient,spikes,diverged\n");
      for (const LandscapePoint& p : result.landscape)
        std::fprintf(f, "%.9g,%.9g,%.9g,%d,%d\n", p.candidate, p.cost,
                     p.gradient, p.spikes, p.diverged ? 1 : 0);
      std::fclose(f);
    }
    std::ofstream s(base + "-summary.json");
    s << summary.dump(2) << "\n";
  }
  result.summary = summary;
  return result;
}

}  // namespace condest
