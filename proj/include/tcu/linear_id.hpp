#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "tcu/pi_control.hpp"

namespace tcu {

/// Two-state linear model at the controller sample time:
///   x1' = x1 + b_heat * u_heat + b_cool * u_cool   (+ n1)
///   x2' = x2 + a * (x1 - x2)                       (+ n2)
///   y   = x2                                       (+ n_y)
/// x1 acts as a heat reservoir driven by the inputs, x2 is the measured
/// feed temperature mixing toward it.
struct LinearModel {
  double a = 0.1;        // mixing coefficient, 0 < a < 2
  double b_heat = 0.05;  // degC per unit heat duty per sample
  double b_cool = -0.05; // degC per unit cool duty per sample
  Eigen::Matrix2d process_cov = Eigen::Matrix2d::Identity() * 1e-4;  // Q
  double measurement_var = 1e-2;                                     // R
  double sample_time_s = 6.0;

  Eigen::Matrix2d state_matrix() const;              // A
  Eigen::Matrix<double, 2, 2> input_matrix() const;  // B, columns (heat, cool)

  /// Nominal (noise-free) one-step transition.
  Eigen::Vector2d step(const Eigen::Vector2d& x, const AnalogPair& u) const;
  double output(const Eigen::Vector2d& x) const { return x(1); }

  /// Throws ContractViolation when invariants are broken (a outside (0,2),
  /// Q not PSD, R negative).
  void validate() const;
};

struct KalmanEstimate {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
};

/// One predict/update cycle: predict with the input that drove the plant
/// over the last sample interval, then correct with the new measurement.
/// Joseph-form covariance update; the result covariance is symmetrized.
/// Throws ContractViolation when `est.cov` is not symmetric PSD.
KalmanEstimate kalman_step(const LinearModel& model, const KalmanEstimate& est,
                           const AnalogPair& u, double y_meas);

/// Resampled input/output record: u[k] is the (window-mean) duty pair applied
/// between samples y[k] and y[k+1].
struct IoDataset {
  std::vector<AnalogPair> u;
  std::vector<double> y;
  double sample_time_s = 6.0;
};

struct LinearFitOptions {
  int multistarts = 5;
  int max_iterations = 400;        // inner quasi-Newton budget per start
  double gradient_tol = 1e-12;
  int covariance_refinements = 2;  // parameter fit / noise fit alternations
  std::uint64_t seed = 20240901;
};

struct LinearFitReport {
  LinearModel model;
  double innovation_mse = 0.0;  // mean squared one-step innovation at the optimum
  int starts_used = 0;
};

/// Prediction-error fit of (a, b_heat, b_cool): minimizes the sum of squared
/// one-step Kalman innovations by projected quasi-Newton with multistart,
/// then refits the noise covariances by minimizing the Gaussian innovation
/// negative log-likelihood; the two stages alternate
/// `covariance_refinements` times.
///
/// Throws InputDomainError for datasets shorter than 100 samples and
/// IllConditionedError (naming the dead input channel) when an input has no
/// variation, which leaves the corresponding gain unidentifiable.
LinearFitReport fit_linear(const IoDataset& data, const LinearFitOptions& opts = {});

/// JSON (de)serialization. Schema keys: type, a, b_h, b_c, Q (2x2 row-major),
/// R, sample_time.
std::string linear_model_to_json(const LinearModel& model);
LinearModel linear_model_from_json_text(const std::string& text);
void save_linear_model(const LinearModel& model, const std::string& path);
LinearModel load_linear_model(const std::string& path);

}  // namespace tcu
