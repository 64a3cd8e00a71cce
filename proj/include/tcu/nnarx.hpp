#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "tcu/linear_id.hpp"
#include "tcu/pi_control.hpp"

namespace tcu {

/// Per-channel affine scaling applied symmetrically in training and control.
/// The network operates on zero-mean/unit-std signals; raw degC and duty
/// values are converted at the boundaries.
struct Normalizer {
  Eigen::Vector2d u_mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d u_std = Eigen::Vector2d::Ones();
  double y_mean = 0.0;
  double y_std = 1.0;

  Eigen::Vector2d normalize_u(const AnalogPair& u) const {
    return Eigen::Vector2d((u.heat - u_mean(0)) / u_std(0), (u.cool - u_mean(1)) / u_std(1));
  }
  double normalize_y(double y) const { return (y - y_mean) / y_std; }
  double denormalize_y(double yn) const { return yn * y_std + y_mean; }

  /// Per-channel mean/std over a dataset; stds are floored at 1e-9.
  static Normalizer fit(const IoDataset& data);
};

/// Stacked past-I/O state of the NNARX state-space realization:
/// x = (z_1', ..., z_N')' with z_i = (y_tap_i, u_heat_tap_i, u_cool_tap_i),
/// taps ordered oldest to newest, all in normalized units. Dimension 3N.
using NnarxState = Eigen::VectorXd;

/// Feedforward NARX regressor: the next (normalized) output is a
/// feedforward network of the stacked past-I/O state and the current input.
/// Every layer receives a direct injection of the current input alongside
/// the previous layer's activation; the activation is tanh (zero at zero,
/// 1-Lipschitz), the output layer is affine.
struct NnarxModel {
  int past_window = 8;                    // N taps of (y, u) history
  std::vector<int> hidden_widths = {10};  // one entry per hidden layer

  struct Layer {
    Eigen::MatrixXd carry_weight;  // width x prev (prev = state dim for layer 1)
    Eigen::MatrixXd input_weight;  // width x 2, current-input injection
    Eigen::VectorXd bias;          // width
  };
  std::vector<Layer> layers;
  Eigen::RowVectorXd out_weight;  // 1 x last width
  double out_bias = 0.0;

  Normalizer norm;
  std::uint64_t init_seed = 0;

  int state_dim() const { return past_window * 3; }
  int parameter_count() const;

  /// Uniform +-1/sqrt(fan_in) weights, deterministic under `seed`.
  static NnarxModel random_init(int past_window, const std::vector<int>& hidden_widths,
                                std::uint64_t seed);

  /// Flat parameter vector: out_weight, out_bias, then per layer
  /// carry_weight (row-major), input_weight (row-major), bias.
  Eigen::VectorXd pack_parameters() const;
  void unpack_parameters(const Eigen::VectorXd& phi);

  void validate() const;
};

/// Stacks N past outputs and N past input pairs (both oldest to newest,
/// normalized) into the state vector. past_u[i] is the input applied between
/// past_y[i-1] and past_y[i] (one tap earlier than the matching output).
NnarxState pack_state(const std::vector<double>& past_y,
                      const std::vector<Eigen::Vector2d>& past_u, int past_window);

/// Splits a state back into (past_y, past_u); inverse of pack_state.
void unpack_state(const NnarxState& x, std::vector<double>& past_y,
                  std::vector<Eigen::Vector2d>& past_u);

/// Newest packed output, C x.
double state_output(const NnarxState& x);

/// Network regression value for state x and current (normalized) input.
double ffnn_eval(const NnarxModel& model, const NnarxState& x, const Eigen::Vector2d& u);

/// Gradient of ffnn_eval with respect to the state and the current input
/// (exact reverse mode). Returns the regression value.
double ffnn_input_gradient(const NnarxModel& model, const NnarxState& x,
                           const Eigen::Vector2d& u, Eigen::VectorXd& d_state,
                           Eigen::Vector2d& d_input);

/// One state-space step: drop the oldest tap, append (ffnn_eval(x,u), u).
/// Returns the new state and its output.
std::pair<NnarxState, double> nnarx_step(const NnarxModel& model, const NnarxState& x,
                                         const Eigen::Vector2d& u);

/// Uniformly random fixed-length windows of the dataset, reproducible under
/// `seed`. Throws InputDomainError when the log is shorter than `length`.
std::vector<IoDataset> extract_subsequences(const IoDataset& data, int count, int length,
                                            std::uint64_t seed);

struct TrainConfig {
  int max_epochs = 5000;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double val_tolerance = 1e-4;  // early stop on the validation criterion
  int washout = 8;              // N_w, must be >= past_window
};

struct TrainReport {
  int epochs = 0;
  bool reached_tolerance = false;
  double final_train_mse = 0.0;
  double final_val_mse = 0.0;
  std::vector<std::pair<double, double>> loss_curve;  // (train, val) per epoch
};

/// Scaled one-step-prediction MSE over raw-unit subsequences:
/// mean over subsequences of sum of squared normalized prediction errors on
/// targets past the washout, divided by (length - washout). Prediction
/// targets start at index washout+1 so every regression window lies fully
/// inside the subsequence.
double mse_criterion(const NnarxModel& model, const std::vector<IoDataset>& subsequences,
                     int washout);

/// Gradient of mse_criterion with respect to the packed parameter vector
/// (exact reverse-mode through the network).
Eigen::VectorXd mse_gradient(const NnarxModel& model,
                             const std::vector<IoDataset>& subsequences, int washout);

/// Full-batch adaptive-moment descent on mse_criterion; keeps the
/// best-on-validation weights and stops early once the validation criterion
/// drops below `val_tolerance`. Throws NumericalError when the loss turns
/// non-finite, naming the epoch.
TrainReport train(NnarxModel& model, const std::vector<IoDataset>& train_set,
                  const std::vector<IoDataset>& val_set, const TrainConfig& cfg);

/// Iterates nnarx_step over a raw-duty input sequence with no measurement
/// feedback; returns denormalized (degC) predictions, one per input.
std::vector<double> open_loop_predict(const NnarxModel& model, const NnarxState& x0,
                                      const std::vector<AnalogPair>& u_sequence);

/// JSON (de)serialization. Schema: type, N, hidden_widths, weights
/// (row-major), normalizer, init_seed, training metadata, sample_time.
std::string nnarx_model_to_json(const NnarxModel& model, const TrainReport* report = nullptr,
                                double sample_time_s = 6.0);
NnarxModel nnarx_model_from_json_text(const std::string& text);
void save_nnarx_model(const NnarxModel& model, const std::string& path,
                      const TrainReport* report = nullptr, double sample_time_s = 6.0);
NnarxModel load_nnarx_model(const std::string& path);

}  // namespace tcu
