#include "tcu/linear_id.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "tcu/errors.hpp"
#include "tcu/optim.hpp"

namespace tcu {

namespace {

constexpr double kCovFloor = 1e-12;

void check_psd2(const Eigen::Matrix2d& p, const char* what) {
  const double scale = std::max(1.0, p.cwiseAbs().maxCoeff());
  if (std::fabs(p(0, 1) - p(1, 0)) > 1e-7 * scale)
    throw ContractViolation(std::string(what) + ": covariance not symmetric");
  const double det = p(0, 0) * p(1, 1) - p(0, 1) * p(1, 0);
  if (p(0, 0) < -1e-10 * scale || p(1, 1) < -1e-10 * scale || det < -1e-10 * scale * scale)
    throw ContractViolation(std::string(what) + ": covariance not positive semidefinite");
}

/// Runs the time-varying Kalman filter over the dataset and accumulates the
/// squared innovations and the Gaussian innovation negative log-likelihood.
struct FilterStats {
  double sse = 0.0;  // sum of squared innovations
  double nll = 0.0;  // sum of log S_k + e_k^2 / S_k
  int count = 0;
};

FilterStats run_innovation_filter(const IoDataset& data, const LinearModel& m) {
  FilterStats stats;
  const Eigen::Matrix2d a_mat = m.state_matrix();
  const Eigen::Matrix2d b_mat = m.input_matrix();
  const Eigen::Matrix2d q = m.process_cov;
  const double r = m.measurement_var;

  Eigen::Vector2d x(data.y.front(), data.y.front());
  Eigen::Matrix2d p = Eigen::Matrix2d::Identity();
  for (std::size_t k = 1; k < data.y.size(); ++k) {
    const Eigen::Vector2d uvec(data.u[k - 1].heat, data.u[k - 1].cool);
    x = a_mat * x + b_mat * uvec;
    p = a_mat * p * a_mat.transpose() + q;

    const double innovation = data.y[k] - x(1);
    const double s = p(1, 1) + r;
    stats.sse += innovation * innovation;
    stats.nll += std::log(s) + innovation * innovation / s;
    ++stats.count;

    const Eigen::Vector2d gain = p.col(1) / s;
    x += gain * innovation;
    Eigen::Matrix2d ikc = Eigen::Matrix2d::Identity();
    ikc.col(1) -= gain;
    p = ikc * p * ikc.transpose() + gain * r * gain.transpose();
    p = 0.5 * (p + p.transpose());
  }
  return stats;
}

}  // namespace

Eigen::Matrix2d LinearModel::state_matrix() const {
  Eigen::Matrix2d m;
  m << 1.0, 0.0, a, 1.0 - a;
  return m;
}

Eigen::Matrix<double, 2, 2> LinearModel::input_matrix() const {
  Eigen::Matrix2d m;
  m << b_heat, b_cool, 0.0, 0.0;
  return m;
}

Eigen::Vector2d LinearModel::step(const Eigen::Vector2d& x, const AnalogPair& u) const {
  Eigen::Vector2d next;
  next(0) = x(0) + b_heat * u.heat + b_cool * u.cool;
  next(1) = x(1) + a * (x(0) - x(1));
  return next;
}

void LinearModel::validate() const {
  if (!(a > 0.0 && a < 2.0))
    throw ContractViolation("linear model: a must lie in (0, 2) for stability");
  if (measurement_var < 0.0) throw ContractViolation("linear model: R must be >= 0");
  check_psd2(process_cov, "linear model Q");
}

KalmanEstimate kalman_step(const LinearModel& model, const KalmanEstimate& est,
                           const AnalogPair& u, double y_meas) {
  check_psd2(est.cov, "kalman_step P");

  const Eigen::Matrix2d a_mat = model.state_matrix();
  Eigen::Vector2d x = a_mat * est.mean +
                      model.input_matrix() * Eigen::Vector2d(u.heat, u.cool);
  Eigen::Matrix2d p = a_mat * est.cov * a_mat.transpose() + model.process_cov;

  const double s = p(1, 1) + model.measurement_var;
  if (!(s > 0.0)) throw NumericalError("kalman_step: innovation variance not positive");
  const Eigen::Vector2d gain = p.col(1) / s;
  const double innovation = y_meas - x(1);

  KalmanEstimate out;
  out.mean = x + gain * innovation;
  Eigen::Matrix2d ikc = Eigen::Matrix2d::Identity();
  ikc.col(1) -= gain;
  out.cov = ikc * p * ikc.transpose() + gain * model.measurement_var * gain.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

LinearFitReport fit_linear(const IoDataset& data, const LinearFitOptions& opts) {
  if (data.y.size() < 100 || data.u.size() < data.y.size() - 1)
    throw InputDomainError("fit_linear: need at least 100 samples with matching inputs");

  // excitation check: a constant input channel leaves its gain unidentifiable
  auto channel_variance = [&](auto getter) {
    double mean = 0.0;
    for (const auto& u : data.u) mean += getter(u);
    mean /= static_cast<double>(data.u.size());
    double var = 0.0;
    for (const auto& u : data.u) var += (getter(u) - mean) * (getter(u) - mean);
    return var / static_cast<double>(data.u.size());
  };
  const double var_heat = channel_variance([](const AnalogPair& u) { return u.heat; });
  const double var_cool = channel_variance([](const AnalogPair& u) { return u.cool; });
  std::string dead;
  if (var_heat < 1e-10) dead += "u_heat (b_heat unidentifiable)";
  if (var_cool < 1e-10) dead += (dead.empty() ? "" : ", ") + std::string("u_cool (b_cool unidentifiable)");
  if (!dead.empty())
    throw IllConditionedError("fit_linear: no excitation on input channel(s): " + dead);

  LinearModel model;  // carries the evolving Q, R between stages
  model.sample_time_s = data.sample_time_s;
  model.process_cov = Eigen::Matrix2d::Identity() * 1e-4;
  model.measurement_var = 1e-2;

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);

  Eigen::Vector3d lower(1e-6, -10.0, -10.0);
  Eigen::Vector3d upper(2.0 - 1e-6, 10.0, 10.0);

  Eigen::Vector3d theta(0.1, 0.05, -0.05);
  LinearFitReport report;

  for (int refine = 0; refine < opts.covariance_refinements; ++refine) {
    // stage 1: parameters by innovation least squares
    auto sse_of = [&](const Eigen::VectorXd& th) {
      LinearModel cand = model;
      cand.a = th(0);
      cand.b_heat = th(1);
      cand.b_cool = th(2);
      return run_innovation_filter(data, cand).sse;
    };
    LbfgsOptions lopts;
    lopts.max_iterations = opts.max_iterations;
    lopts.grad_tol = opts.gradient_tol;

    double best_sse = std::numeric_limits<double>::infinity();
    Eigen::Vector3d best_theta = theta;
    const int starts = refine == 0 ? opts.multistarts : 1;
    for (int s = 0; s < starts; ++s) {
      Eigen::Vector3d init = theta;
      if (s > 0) {
        init(0) = 0.1 * (1.0 + jitter(rng));
        init(1) = 0.05 * (1.0 + jitter(rng));
        init(2) = -0.05 * (1.0 + jitter(rng));
      }
      auto res = minimize_projected_lbfgs(with_numeric_gradient(sse_of, 1e-7), init,
                                          lower, upper, lopts);
      if (res.f < best_sse) {
        best_sse = res.f;
        best_theta = res.x;
      }
      ++report.starts_used;
    }
    theta = best_theta;
    model.a = theta(0);
    model.b_heat = theta(1);
    model.b_cool = theta(2);

    // stage 2: noise covariances by innovation likelihood (log-space)
    auto nll_of = [&](const Eigen::VectorXd& lq) {
      LinearModel cand = model;
      cand.process_cov = Eigen::Vector2d(std::exp(lq(0)), std::exp(lq(1))).asDiagonal();
      cand.measurement_var = std::exp(lq(2));
      return run_innovation_filter(data, cand).nll;
    };
    Eigen::Vector3d lq0(std::log(std::max(model.process_cov(0, 0), kCovFloor)),
                        std::log(std::max(model.process_cov(1, 1), kCovFloor)),
                        std::log(std::max(model.measurement_var, kCovFloor)));
    Eigen::Vector3d lq_lower = Eigen::Vector3d::Constant(std::log(kCovFloor));
    Eigen::Vector3d lq_upper = Eigen::Vector3d::Constant(std::log(1e4));
    LbfgsOptions nopts;
    nopts.max_iterations = 200;
    nopts.grad_tol = 1e-9;
    auto nres = minimize_projected_lbfgs(with_numeric_gradient(nll_of, 1e-6), lq0,
                                         lq_lower, lq_upper, nopts);
    model.process_cov =
        Eigen::Vector2d(std::exp(nres.x(0)), std::exp(nres.x(1))).asDiagonal();
    model.measurement_var = std::exp(nres.x(2));
  }

  const FilterStats final_stats = run_innovation_filter(data, model);
  report.innovation_mse = final_stats.sse / std::max(1, final_stats.count);
  report.model = model;
  report.model.validate();
  return report;
}

std::string linear_model_to_json(const LinearModel& model) {
  nlohmann::json j;
  j["type"] = "linear";
  j["a"] = model.a;
  j["b_h"] = model.b_heat;
  j["b_c"] = model.b_cool;
  j["Q"] = {{model.process_cov(0, 0), model.process_cov(0, 1)},
            {model.process_cov(1, 0), model.process_cov(1, 1)}};
  j["R"] = model.measurement_var;
  j["sample_time"] = model.sample_time_s;
  return j.dump(2);
}

LinearModel linear_model_from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("type", "") != "linear")
    throw IoError("linear model JSON: expected type=linear");
  LinearModel m;
  m.a = j.at("a").get<double>();
  m.b_heat = j.at("b_h").get<double>();
  m.b_cool = j.at("b_c").get<double>();
  const auto& q = j.at("Q");
  m.process_cov << q[0][0].get<double>(), q[0][1].get<double>(), q[1][0].get<double>(),
      q[1][1].get<double>();
  m.measurement_var = j.at("R").get<double>();
  m.sample_time_s = j.at("sample_time").get<double>();
  m.validate();
  return m;
}

void save_linear_model(const LinearModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write linear model file: " + path);
  out << linear_model_to_json(model) << "\n";
}

LinearModel load_linear_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read linear model file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return linear_model_from_json_text(text);
}

}  // namespace tcu
