#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcu/config.hpp"
#include "tcu/linear_id.hpp"
#include "tcu/mpc.hpp"
#include "tcu/nnarx.hpp"
#include "tcu/pi_control.hpp"
#include "tcu/plant.hpp"
#include "tcu/signals.hpp"

namespace tcu {

enum class ControllerKind { pi, linear_mpc, nnarx_mpc };

const char* to_string(ControllerKind kind);
ControllerKind controller_kind_from_string(const std::string& name);

/// One actuator-clock record of a closed-loop experiment. Solver fields are
/// meaningful only on controller-clock rows (ocp_status >= 0).
struct LogRecord {
  double t_s = 0.0;
  double reference_c = 0.0;
  double measured_c = 0.0;
  AnalogPair u;         // analog command, zero-order held between MPC ticks
  int u_heat_bit = 0;   // modulated binary actuation
  int u_cool_bit = 0;
  int ocp_status = -1;  // -1 none, 0 converged, 1 max-iter, 2 infeasible
  int ocp_iterations = 0;
  double ocp_objective = 0.0;
  double ocp_residual = 0.0;
  int fallback = 0;
};

struct ExperimentLog {
  std::vector<LogRecord> records;
  std::string controller;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  double dt_s = 1.0;
  double control_period_s = 6.0;
};

/// Fixed-header CSV plus a `<path>.meta.json` sidecar with the metadata.
void save_log_csv(const ExperimentLog& log, const std::string& path);
ExperimentLog load_log_csv(const std::string& path);

void save_dataset_csv(const IoDataset& data, const std::string& path);
IoDataset load_dataset_csv(const std::string& path);

/// 1 s log -> controller-clock dataset: measured outputs are decimated
/// (instantaneous sensor readings), analog inputs are averaged per window
/// (duty ratios, preserving delivered energy).
IoDataset resample_log(const ExperimentLog& log, int factor);

/// Closed-loop drive of the surrogate plant at 1 s. The PI controller runs
/// at the actuator clock; MPC variants run every `mpc.control_period_s`
/// seconds with zero-order hold. Requires the matching fitted model for the
/// MPC variants (ConfigError otherwise).
ExperimentLog run_closed_loop(const Config& cfg, ControllerKind kind,
                              const LinearModel* linear_model = nullptr,
                              const NnarxModel* nnarx_model = nullptr);

struct CollectResult {
  ExperimentLog raw;       // 1 s log
  IoDataset resampled;     // controller-clock identification dataset
  bool poorly_excited = false;  // single-level reference profile
};

/// PI-controlled excitation run over the identification profile.
CollectResult collect_identification_data(const Config& cfg);

struct CostReport {
  double tracking_cost = 0.0;  // time-average of (y - r)^2
  double energy_cost = 0.0;    // time-average of lambda * (u_heat + u_cool)
  double total_cost = 0.0;     // tracking + energy, exactly
};

/// Time-averaged stage-cost split over [t0, t_end) using the logged analog
/// inputs. Throws InputDomainError when the window leaves the log.
CostReport evaluate_costs(const ExperimentLog& log, double t0_s, double t_end_s,
                          const StageCostParams& params);

struct PredictBenchReport {
  std::vector<std::size_t> start_indices;
  std::vector<double> linear_rmse;  // degC, one per start point
  std::vector<double> nnarx_rmse;
  double linear_mean_rmse = 0.0;
  double nnarx_mean_rmse = 0.0;
};

/// Open-loop prediction comparison on a held-out dataset: from each start
/// point both models predict `horizon` steps ahead using only the recorded
/// inputs. The linear model is initialized by a Kalman sweep up to the start
/// point; the NNARX state is packed from the recorded window.
PredictBenchReport predict_benchmark(const LinearModel& linear_model,
                                     const NnarxModel& nnarx_model, const IoDataset& data,
                                     int horizon, int n_starts);

struct NnarxTrainArtifacts {
  NnarxModel model;
  TrainReport report;
  int train_subsequences = 0;
  int val_subsequences = 0;
};

/// Builds, normalizes and trains an NNARX model per the `nnarx.*` and
/// `train.*` config keys from a training and a validation dataset.
NnarxTrainArtifacts train_nnarx_from_datasets(const Config& cfg, const IoDataset& train_data,
                                              const IoDataset& val_data);

/// Shared config plumbing (all keys optional, falling back to the defaults
/// listed in the README).
PlantParams plant_params_from_config(const Config& cfg);
ReferenceProfile profile_from_config(const Config& cfg, const std::string& key);
StageCostParams stage_cost_from_config(const Config& cfg);
OcpOptions ocp_options_from_config(const Config& cfg);

void save_loss_curve_csv(const TrainReport& report, const std::string& path);

}  // namespace tcu
