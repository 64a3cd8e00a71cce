#pragma once

#include <Eigen/Dense>

#include "tcu/linear_id.hpp"
#include "tcu/nnarx.hpp"

namespace tcu {

/// What the receding-horizon controller needs from an identified model:
/// a one-step transition at the controller clock, an output map in degC,
/// and exact reverse-mode derivatives of both. Inputs are always raw duty
/// pairs in [0,1]^2; the state lives in model-native coordinates (degC for
/// the linear model, normalized packed I/O for the NNARX realization).
class PredictionModel {
 public:
  virtual ~PredictionModel() = default;

  virtual int state_dim() const = 0;
  virtual Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::Vector2d& u) const = 0;
  virtual double output(const Eigen::VectorXd& x) const = 0;

  /// Accumulates w' * d step / d x into x_bar and w' * d step / d u into u_bar.
  virtual void step_vjp(const Eigen::VectorXd& x, const Eigen::Vector2d& u,
                        const Eigen::VectorXd& w, Eigen::VectorXd& x_bar,
                        Eigen::Vector2d& u_bar) const = 0;
  virtual Eigen::VectorXd output_gradient(const Eigen::VectorXd& x) const = 0;

  /// Per-component scale dividing terminal residuals so tolerances are
  /// stated in normalized units for every model.
  virtual Eigen::VectorXd state_scale() const = 0;
};

class LinearPrediction final : public PredictionModel {
 public:
  explicit LinearPrediction(LinearModel model, double temp_scale_c = 10.0)
      : model_(std::move(model)), temp_scale_c_(temp_scale_c) {}

  int state_dim() const override { return 2; }
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::Vector2d& u) const override;
  double output(const Eigen::VectorXd& x) const override { return x(1); }
  void step_vjp(const Eigen::VectorXd& x, const Eigen::Vector2d& u, const Eigen::VectorXd& w,
                Eigen::VectorXd& x_bar, Eigen::Vector2d& u_bar) const override;
  Eigen::VectorXd output_gradient(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd state_scale() const override;

  const LinearModel& model() const { return model_; }

 private:
  LinearModel model_;
  double temp_scale_c_;
};

class NnarxPrediction final : public PredictionModel {
 public:
  explicit NnarxPrediction(NnarxModel model) : model_(std::move(model)) {}

  int state_dim() const override { return model_.state_dim(); }
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::Vector2d& u) const override;
  double output(const Eigen::VectorXd& x) const override {
    return model_.norm.denormalize_y(state_output(x));
  }
  void step_vjp(const Eigen::VectorXd& x, const Eigen::Vector2d& u, const Eigen::VectorXd& w,
                Eigen::VectorXd& x_bar, Eigen::Vector2d& u_bar) const override;
  Eigen::VectorXd output_gradient(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd state_scale() const override {
    return Eigen::VectorXd::Ones(model_.state_dim());
  }

  /// Builds the (normalized) packed state from raw degC outputs and raw duty
  /// pairs, oldest to newest.
  NnarxState make_state(const std::vector<double>& past_y_c,
                        const std::vector<AnalogPair>& past_u) const;

  const NnarxModel& model() const { return model_; }

 private:
  NnarxModel model_;
};

}  // namespace tcu
