#include "tcu/harness.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tcu/errors.hpp"
#include "tcu/prediction_model.hpp"

namespace tcu {

namespace {

constexpr const char* kLogHeader =
    "t_s,r_c,y_c,u_heat,u_cool,ub_heat,ub_cool,ocp_status,ocp_iters,ocp_objective,"
    "ocp_residual,fallback";
constexpr const char* kDatasetHeader = "t_s,u_heat,u_cool,y_c";

constexpr const char* kDefaultRunProfile = "720:50, 660:58, 660:50, 660:57, 660:49";
constexpr const char* kDefaultCollectProfile =
    "1800:40, 1500:55, 1500:45, 1800:65, 1200:50, 1500:70, 2460:60";

int status_code(SolverStatus status) {
  switch (status) {
    case SolverStatus::converged: return 0;
    case SolverStatus::max_iterations: return 1;
    case SolverStatus::infeasible: return 2;
  }
  return -1;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

std::uint64_t seed_from_config(const Config& cfg, const std::string& key,
                               std::uint64_t fallback) {
  return static_cast<std::uint64_t>(cfg.get_int(key, static_cast<int>(fallback)));
}

}  // namespace

const char* to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::pi: return "pi";
    case ControllerKind::linear_mpc: return "lmpc";
    case ControllerKind::nnarx_mpc: return "nnmpc";
  }
  return "unknown";
}

ControllerKind controller_kind_from_string(const std::string& name) {
  if (name == "pi") return ControllerKind::pi;
  if (name == "lmpc") return ControllerKind::linear_mpc;
  if (name == "nnmpc") return ControllerKind::nnarx_mpc;
  throw ConfigError("unknown controller `" + name + "` (expected pi | lmpc | nnmpc)");
}

PlantParams plant_params_from_config(const Config& cfg) {
  PlantParams p;
  p.dt_s = cfg.get_double("plant.dt_s", p.dt_s);
  p.ambient_c = cfg.get_double("plant.ambient_c", p.ambient_c);
  p.cooling_water_c = cfg.get_double("plant.cooling_water_c", p.cooling_water_c);
  p.heat_gain_c_per_s = cfg.get_double("plant.heat_gain", p.heat_gain_c_per_s);
  p.heat_droop_per_c = cfg.get_double("plant.heat_droop", p.heat_droop_per_c);
  p.cool_gain_c_per_s = cfg.get_double("plant.cool_gain", p.cool_gain_c_per_s);
  p.cool_ref_c = cfg.get_double("plant.cool_ref_c", p.cool_ref_c);
  p.loss_coeff_per_s = cfg.get_double("plant.loss_coeff", p.loss_coeff_per_s);
  p.mix_coeff_per_s = cfg.get_double("plant.mix_coeff", p.mix_coeff_per_s);
  p.delay_seconds = cfg.get_double("plant.delay_s", p.delay_seconds);
  p.process_noise_std_c = cfg.get_double("plant.process_noise_std", p.process_noise_std_c);
  p.measurement_noise_std_c =
      cfg.get_double("plant.measurement_noise_std", p.measurement_noise_std_c);
  return p;
}

ReferenceProfile profile_from_config(const Config& cfg, const std::string& key) {
  ReferenceProfile profile;
  if (cfg.has(key)) {
    profile.segments = cfg.get_profile(key);
  } else {
    Config defaults;
    defaults.set(key, key == "collect.profile" ? kDefaultCollectProfile : kDefaultRunProfile);
    profile.segments = defaults.get_profile(key);
  }
  validate_profile(profile, cfg.get_double("reference.min_c", 30.0),
                   cfg.get_double("reference.max_c", 80.0));
  return profile;
}

StageCostParams stage_cost_from_config(const Config& cfg) {
  StageCostParams p;
  p.lambda = cfg.get_double("mpc.lambda", p.lambda);
  return p;
}

OcpOptions ocp_options_from_config(const Config& cfg) {
  OcpOptions o;
  o.horizon = cfg.get_int("mpc.horizon", o.horizon);
  o.max_total_iterations = cfg.get_int("mpc.max_iterations", o.max_total_iterations);
  o.max_outer_iterations = cfg.get_int("mpc.max_outer_iterations", o.max_outer_iterations);
  o.terminal_tol = cfg.get_double("mpc.terminal_tol", o.terminal_tol);
  o.inner_grad_tol = cfg.get_double("mpc.inner_grad_tol", o.inner_grad_tol);
  o.penalty_init = cfg.get_double("mpc.penalty_init", o.penalty_init);
  o.wall_clock_cap_s = cfg.get_double("mpc.wall_clock_cap_s", o.wall_clock_cap_s);
  return o;
}

void save_log_csv(const ExperimentLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write log file: " + path);
  out << std::setprecision(17);
  out << kLogHeader << "\n";
  for (const auto& r : log.records) {
    out << r.t_s << ',' << r.reference_c << ',' << r.measured_c << ',' << r.u.heat << ','
        << r.u.cool << ',' << r.u_heat_bit << ',' << r.u_cool_bit << ',' << r.ocp_status
        << ',' << r.ocp_iterations << ',' << r.ocp_objective << ',' << r.ocp_residual << ','
        << r.fallback << "\n";
  }

  nlohmann::json meta;
  meta["controller"] = log.controller;
  meta["seed"] = log.seed;
  meta["config_hash"] = log.config_hash;
  meta["dt_s"] = log.dt_s;
  meta["control_period_s"] = log.control_period_s;
  meta["records"] = log.records.size();
  std::ofstream meta_out(path + ".meta.json");
  if (!meta_out) throw IoError("cannot write log metadata: " + path + ".meta.json");
  meta_out << meta.dump(2) << "\n";
}

ExperimentLog load_log_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read log file: " + path);
  ExperimentLog log;
  std::string line;
  if (!std::getline(in, line) || line != kLogHeader)
    throw IoError("log file " + path + ": unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 12) throw IoError("log file " + path + ": malformed row");
    LogRecord r;
    r.t_s = std::stod(f[0]);
    r.reference_c = std::stod(f[1]);
    r.measured_c = std::stod(f[2]);
    r.u.heat = std::stod(f[3]);
    r.u.cool = std::stod(f[4]);
    r.u_heat_bit = std::stoi(f[5]);
    r.u_cool_bit = std::stoi(f[6]);
    r.ocp_status = std::stoi(f[7]);
    r.ocp_iterations = std::stoi(f[8]);
    r.ocp_objective = std::stod(f[9]);
    r.ocp_residual = std::stod(f[10]);
    r.fallback = std::stoi(f[11]);
    log.records.push_back(r);
  }

  std::ifstream meta_in(path + ".meta.json");
  if (meta_in) {
    nlohmann::json meta = nlohmann::json::parse(meta_in);
    log.controller = meta.value("controller", "");
    log.seed = meta.value("seed", 0ULL);
    log.config_hash = meta.value("config_hash", 0ULL);
    log.dt_s = meta.value("dt_s", 1.0);
    log.control_period_s = meta.value("control_period_s", 6.0);
  }
  return log;
}

void save_dataset_csv(const IoDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file: " + path);
  out << std::setprecision(17);
  out << kDatasetHeader << "\n";
  for (std::size_t k = 0; k < data.y.size(); ++k) {
    out << k * data.sample_time_s << ',' << data.u[k].heat << ',' << data.u[k].cool << ','
        << data.y[k] << "\n";
  }
}

IoDataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read dataset file: " + path);
  IoDataset data;
  std::string line;
  if (!std::getline(in, line) || line != kDatasetHeader)
    throw IoError("dataset file " + path + ": unexpected header");
  double prev_t = 0.0, t = 0.0;
  bool have_two = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw IoError("dataset file " + path + ": malformed row");
    prev_t = t;
    t = std::stod(f[0]);
    if (data.y.size() == 1) have_two = true;
    data.u.push_back({std::stod(f[1]), std::stod(f[2])});
    data.y.push_back(std::stod(f[3]));
  }
  if (have_two) data.sample_time_s = t - prev_t >= 0 ? (t - prev_t) : data.sample_time_s;
  return data;
}

IoDataset resample_log(const ExperimentLog& log, int factor) {
  if (log.records.empty()) throw InputDomainError("resample_log: empty log");
  std::vector<double> y, uh, uc;
  y.reserve(log.records.size());
  for (const auto& r : log.records) {
    y.push_back(r.measured_c);
    uh.push_back(r.u.heat);
    uc.push_back(r.u.cool);
  }
  IoDataset out;
  out.sample_time_s = log.dt_s * factor;
  out.y = decimate(y, factor);
  const auto mh = window_mean(uh, factor);
  const auto mc = window_mean(uc, factor);
  out.u.resize(mh.size());
  for (std::size_t k = 0; k < mh.size(); ++k) out.u[k] = {mh[k], mc[k]};
  return out;
}

namespace {

struct LoopSetup {
  PlantParams plant;
  ReferenceProfile profile;
  int steps = 0;
  double initial_temp_c = 0.0;
  std::uint64_t seed = 1;
  int control_period_steps = 6;
};

ExperimentLog drive_loop(const Config& cfg, const LoopSetup& setup, ControllerKind kind,
                         const LinearModel* linear_model, const NnarxModel* nnarx_model) {
  ExperimentLog log;
  log.controller = to_string(kind);
  log.seed = setup.seed;
  log.config_hash = cfg.hash();
  log.dt_s = setup.plant.dt_s;
  log.control_period_s = setup.plant.dt_s * setup.control_period_steps;

  PlantState plant(setup.plant, setup.initial_temp_c, setup.seed);
  DeltaModulator mod_heat, mod_cool;
  PiController pi(cfg.get_double("pi.kp", 0.8), cfg.get_double("pi.ki", 0.01),
                  cfg.get_bool("pi.anti_windup", true));

  const StageCostParams cost = stage_cost_from_config(cfg);
  const OcpOptions ocp = ocp_options_from_config(cfg);
  const double zero_budget_after_s = cfg.get_double("mpc.zero_budget_after_s", -1.0);

  std::unique_ptr<MpcController> mpc;
  std::shared_ptr<const NnarxPrediction> nnarx_pred;
  if (kind == ControllerKind::linear_mpc) {
    if (!linear_model)
      throw ConfigError("run_closed_loop: controller lmpc requires a fitted linear model");
    auto pred = std::make_shared<LinearPrediction>(
        *linear_model, cfg.get_double("mpc.linear_state_scale_c", 10.0));
    mpc = std::make_unique<MpcController>(
        pred,
        [model = *linear_model, cost](double r) { return solve_equilibrium(model, r, cost); },
        cost, ocp);
  } else if (kind == ControllerKind::nnarx_mpc) {
    if (!nnarx_model)
      throw ConfigError("run_closed_loop: controller nnmpc requires a trained nnarx model");
    nnarx_pred = std::make_shared<NnarxPrediction>(*nnarx_model);
    EquilibriumOptions eq_opts;
    eq_opts.reference_tol_c = cfg.get_double("mpc.equilibrium_reference_tol_c", 5.0);
    mpc = std::make_unique<MpcController>(
        nnarx_pred,
        [pred = nnarx_pred, cost, eq_opts](double r) {
          return solve_equilibrium(*pred, r, cost, eq_opts);
        },
        cost, ocp);
  }

  KalmanEstimate kf;
  bool kf_ready = false;
  std::deque<double> y_hist;
  std::deque<AnalogPair> u_hist;
  bool budget_forced = false;

  AnalogPair u_cmd;
  log.records.reserve(setup.steps);
  for (int k = 0; k < setup.steps; ++k) {
    const double t = k * setup.plant.dt_s;
    const double r = setup.profile.level_at(t);
    const double y = plant.measure();

    LogRecord rec;
    rec.t_s = t;
    rec.reference_c = r;
    rec.measured_c = y;

    if (kind == ControllerKind::pi) {
      u_cmd = pi.step(r, y);
    } else if (k % setup.control_period_steps == 0) {
      if (zero_budget_after_s >= 0.0 && t >= zero_budget_after_s && !budget_forced) {
        mpc->force_iteration_budget(0);
        budget_forced = true;
      }
      Eigen::VectorXd x;
      if (kind == ControllerKind::linear_mpc) {
        if (!kf_ready) {
          kf.mean << y, y;
          kf.cov = Eigen::Matrix2d::Identity();
          kf_ready = true;
        } else {
          kf = kalman_step(*linear_model, kf, u_cmd, y);
        }
        x = kf.mean;
      } else {
        if (y_hist.empty()) {
          y_hist.assign(nnarx_pred->model().past_window, y);
          u_hist.assign(nnarx_pred->model().past_window, AnalogPair{0.0, 0.0});
        } else {
          y_hist.pop_front();
          y_hist.push_back(y);
          u_hist.pop_front();
          u_hist.push_back(u_cmd);
        }
        x = nnarx_pred->make_state(std::vector<double>(y_hist.begin(), y_hist.end()),
                                   std::vector<AnalogPair>(u_hist.begin(), u_hist.end()));
      }
      MpcDiagnostics diag;
      u_cmd = mpc->control(x, r, &diag);
      rec.ocp_status = status_code(diag.status);
      rec.ocp_iterations = diag.iterations;
      rec.ocp_objective = diag.objective;
      rec.ocp_residual = diag.terminal_residual;
      rec.fallback = diag.fallback ? 1 : 0;
    }

    rec.u = u_cmd;
    rec.u_heat_bit = mod_heat.step(u_cmd.heat);
    rec.u_cool_bit = mod_cool.step(u_cmd.cool);
    plant.step(rec.u_heat_bit, rec.u_cool_bit);
    log.records.push_back(rec);
  }
  return log;
}

}  // namespace

ExperimentLog run_closed_loop(const Config& cfg, ControllerKind kind,
                              const LinearModel* linear_model,
                              const NnarxModel* nnarx_model) {
  LoopSetup setup;
  setup.plant = plant_params_from_config(cfg);
  setup.profile = profile_from_config(cfg, "run.profile");
  const double duration = cfg.get_double("run.duration_s", setup.profile.total_duration());
  setup.steps = static_cast<int>(std::lround(duration / setup.plant.dt_s));
  setup.initial_temp_c =
      cfg.get_double("run.initial_temp_c", setup.profile.segments.front().second);
  setup.seed = seed_from_config(cfg, "run.seed", 1);
  setup.control_period_steps = std::max(
      1, static_cast<int>(std::lround(cfg.get_double("mpc.control_period_s", 6.0) /
                                      setup.plant.dt_s)));
  return drive_loop(cfg, setup, kind, linear_model, nnarx_model);
}

CollectResult collect_identification_data(const Config& cfg) {
  LoopSetup setup;
  setup.plant = plant_params_from_config(cfg);
  setup.profile = profile_from_config(cfg, "collect.profile");
  setup.steps = cfg.get_int("collect.steps", 11760);
  setup.initial_temp_c =
      cfg.get_double("collect.initial_temp_c", setup.profile.segments.front().second);
  setup.seed = seed_from_config(cfg, "collect.seed", 1);
  setup.control_period_steps = 1;  // PI runs at the actuator clock

  CollectResult result;
  result.raw = drive_loop(cfg, setup, ControllerKind::pi, nullptr, nullptr);
  result.resampled = resample_log(result.raw, cfg.get_int("resample.factor", 6));

  std::set<double> levels;
  for (const auto& [dur, level] : setup.profile.segments) levels.insert(level);
  result.poorly_excited = levels.size() < 2;
  return result;
}

CostReport evaluate_costs(const ExperimentLog& log, double t0_s, double t_end_s,
                          const StageCostParams& params) {
  if (log.records.empty()) throw InputDomainError("evaluate_costs: empty log");
  const double dt = log.dt_s;
  const auto i0 = static_cast<std::size_t>(std::lround(t0_s / dt));
  const auto i1 = static_cast<std::size_t>(std::lround(t_end_s / dt));
  if (!(t0_s < t_end_s) || i1 > log.records.size())
    throw InputDomainError("evaluate_costs: window [" + std::to_string(t0_s) + ", " +
                           std::to_string(t_end_s) + ") outside the log");

  CostReport report;
  for (std::size_t k = i0; k < i1; ++k) {
    const auto& r = log.records[k];
    const double e = r.measured_c - r.reference_c;
    report.tracking_cost += e * e;
    report.energy_cost += params.lambda * (r.u.heat + r.u.cool);
  }
  const auto n = static_cast<double>(i1 - i0);
  report.tracking_cost /= n;
  report.energy_cost /= n;
  report.total_cost = report.tracking_cost + report.energy_cost;
  return report;
}

PredictBenchReport predict_benchmark(const LinearModel& linear_model,
                                     const NnarxModel& nnarx_model, const IoDataset& data,
                                     int horizon, int n_starts) {
  const int n = nnarx_model.past_window;
  const auto len = static_cast<int>(std::min(data.y.size(), data.u.size()));
  if (horizon < 1 || n_starts < 1)
    throw InputDomainError("predict_benchmark: horizon and n_starts must be >= 1");
  if (len <= horizon + n)
    throw InputDomainError("predict_benchmark: held-out log shorter than horizon + window");

  const int lo = n;
  const int hi = len - 1 - horizon;
  PredictBenchReport report;
  const NnarxPrediction pred(nnarx_model);

  for (int i = 0; i < n_starts; ++i) {
    const int s = n_starts == 1 ? (lo + hi) / 2 : lo + (hi - lo) * i / (n_starts - 1);
    report.start_indices.push_back(static_cast<std::size_t>(s));

    // linear model: Kalman sweep up to the start point, then free simulation
    KalmanEstimate kf;
    kf.mean << data.y[0], data.y[0];
    kf.cov = Eigen::Matrix2d::Identity();
    for (int k = 1; k <= s; ++k) kf = kalman_step(linear_model, kf, data.u[k - 1], data.y[k]);
    Eigen::Vector2d x_lin = kf.mean;
    double lin_sse = 0.0;
    for (int j = 1; j <= horizon; ++j) {
      x_lin = linear_model.step(x_lin, data.u[s + j - 1]);
      const double e = x_lin(1) - data.y[s + j];
      lin_sse += e * e;
    }
    report.linear_rmse.push_back(std::sqrt(lin_sse / horizon));

    // NNARX: state packed from the recorded window, then free simulation
    std::vector<double> past_y(data.y.begin() + (s - n + 1), data.y.begin() + s + 1);
    std::vector<AnalogPair> past_u(data.u.begin() + (s - n), data.u.begin() + s);
    const NnarxState x0 = pred.make_state(past_y, past_u);
    std::vector<AnalogPair> u_seq(data.u.begin() + s, data.u.begin() + s + horizon);
    const auto preds = open_loop_predict(nnarx_model, x0, u_seq);
    double nn_sse = 0.0;
    for (int j = 1; j <= horizon; ++j) {
      const double e = preds[j - 1] - data.y[s + j];
      nn_sse += e * e;
    }
    report.nnarx_rmse.push_back(std::sqrt(nn_sse / horizon));
  }

  for (double v : report.linear_rmse) report.linear_mean_rmse += v;
  for (double v : report.nnarx_rmse) report.nnarx_mean_rmse += v;
  report.linear_mean_rmse /= n_starts;
  report.nnarx_mean_rmse /= n_starts;
  return report;
}

NnarxTrainArtifacts train_nnarx_from_datasets(const Config& cfg, const IoDataset& train_data,
                                              const IoDataset& val_data) {
  const int past_window = cfg.get_int("nnarx.past_window", 8);
  const int width = cfg.get_int("nnarx.width", 10);
  const auto init_seed = seed_from_config(cfg, "nnarx.init_seed", 7);

  NnarxTrainArtifacts art{NnarxModel::random_init(past_window, {width}, init_seed), {}, 0, 0};
  art.model.norm = Normalizer::fit(train_data);

  const int n_t = cfg.get_int("train.subsequences", 84);
  const int n_s = cfg.get_int("train.length", 133);
  const int n_v = cfg.get_int("train.val_subsequences", 32);
  const auto train_seqs =
      extract_subsequences(train_data, n_t, n_s, seed_from_config(cfg, "train.seed", 99));
  const auto val_seqs =
      extract_subsequences(val_data, n_v, n_s, seed_from_config(cfg, "train.val_seed", 100));
  art.train_subsequences = n_t;
  art.val_subsequences = n_v;

  TrainConfig tc;
  tc.max_epochs = cfg.get_int("train.max_epochs", 5000);
  tc.learning_rate = cfg.get_double("train.learning_rate", 1e-3);
  tc.val_tolerance = cfg.get_double("train.tolerance", 1e-4);
  tc.washout = cfg.get_int("train.washout", past_window);
  art.report = train(art.model, train_seqs, val_seqs, tc);
  return art;
}

void save_loss_curve_csv(const TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write loss curve file: " + path);
  out << std::setprecision(17);
  out << "epoch,train_mse,val_mse\n";
  for (std::size_t e = 0; e < report.loss_curve.size(); ++e)
    out << (e + 1) << ',' << report.loss_curve[e].first << ',' << report.loss_curve[e].second
        << "\n";
}

}  // namespace tcu
