#include "tcu/prediction_model.hpp"

#include "tcu/errors.hpp"

namespace tcu {

Eigen::VectorXd LinearPrediction::step(const Eigen::VectorXd& x,
                                       const Eigen::Vector2d& u) const {
  return model_.step(x, AnalogPair{u(0), u(1)});
}

void LinearPrediction::step_vjp(const Eigen::VectorXd& /*x*/, const Eigen::Vector2d& /*u*/,
                                const Eigen::VectorXd& w, Eigen::VectorXd& x_bar,
                                Eigen::Vector2d& u_bar) const {
  x_bar.noalias() += model_.state_matrix().transpose() * w;
  u_bar.noalias() += model_.input_matrix().transpose() * w;
}

Eigen::VectorXd LinearPrediction::output_gradient(const Eigen::VectorXd& /*x*/) const {
  return Eigen::Vector2d(0.0, 1.0);
}

Eigen::VectorXd LinearPrediction::state_scale() const {
  return Eigen::Vector2d::Constant(temp_scale_c_);
}

Eigen::VectorXd NnarxPrediction::step(const Eigen::VectorXd& x,
                                      const Eigen::Vector2d& u) const {
  const Eigen::Vector2d u_n = model_.norm.normalize_u(AnalogPair{u(0), u(1)});
  return nnarx_step(model_, x, u_n).first;
}

void NnarxPrediction::step_vjp(const Eigen::VectorXd& x, const Eigen::Vector2d& u,
                               const Eigen::VectorXd& w, Eigen::VectorXd& x_bar,
                               Eigen::Vector2d& u_bar) const {
  const Eigen::Index n = x.size();
  const Eigen::Vector2d u_n = model_.norm.normalize_u(AnalogPair{u(0), u(1)});

  // shift block: x'[j] = x[j+3]
  x_bar.tail(n - 3) += w.head(n - 3);

  Eigen::Vector2d u_n_bar = Eigen::Vector2d::Zero();
  const double w_eta = w(n - 3);
  if (w_eta != 0.0) {
    Eigen::VectorXd d_state(n);
    Eigen::Vector2d d_input;
    ffnn_input_gradient(model_, x, u_n, d_state, d_input);
    x_bar.noalias() += w_eta * d_state;
    u_n_bar += w_eta * d_input;
  }
  // appended raw-input taps
  u_n_bar(0) += w(n - 2);
  u_n_bar(1) += w(n - 1);

  // chain through the affine input normalization
  u_bar(0) += u_n_bar(0) / model_.norm.u_std(0);
  u_bar(1) += u_n_bar(1) / model_.norm.u_std(1);
}

Eigen::VectorXd NnarxPrediction::output_gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  g(x.size() - 3) = model_.norm.y_std;
  return g;
}

NnarxState NnarxPrediction::make_state(const std::vector<double>& past_y_c,
                                       const std::vector<AnalogPair>& past_u) const {
  if (past_y_c.size() != static_cast<std::size_t>(model_.past_window) ||
      past_u.size() != static_cast<std::size_t>(model_.past_window))
    throw InputDomainError("make_state: need exactly N past outputs and inputs");
  std::vector<double> y_n(past_y_c.size());
  std::vector<Eigen::Vector2d> u_n(past_u.size());
  for (std::size_t i = 0; i < past_y_c.size(); ++i) y_n[i] = model_.norm.normalize_y(past_y_c[i]);
  for (std::size_t i = 0; i < past_u.size(); ++i) u_n[i] = model_.norm.normalize_u(past_u[i]);
  return pack_state(y_n, u_n, model_.past_window);
}

}  // namespace tcu
