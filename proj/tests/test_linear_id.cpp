#include <doctest.h>

#include <cmath>
#include <random>

#include "tcu/errors.hpp"
#include "tcu/linear_id.hpp"

using namespace tcu;

namespace {

LinearModel make_model(double a, double b_h, double b_c) {
  LinearModel m;
  m.a = a;
  m.b_heat = b_h;
  m.b_cool = b_c;
  return m;
}

/// Simulates the model with independently uniform duty pairs; optional
/// process/measurement noise with the given stds.
IoDataset simulate(const LinearModel& m, int steps, std::uint64_t seed, double n1_std,
                   double n2_std, double ny_std, double y0 = 40.0) {
  IoDataset data;
  data.sample_time_s = m.sample_time_s;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> duty(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Vector2d x(y0, y0);
  for (int k = 0; k < steps; ++k) {
    data.y.push_back(x(1) + ny_std * gauss(rng));
    const AnalogPair u{duty(rng), duty(rng)};
    data.u.push_back(u);
    x = m.step(x, u);
    x(0) += n1_std * gauss(rng);
    x(1) += n2_std * gauss(rng);
  }
  return data;
}

}  // namespace

TEST_CASE("linear step structure") {
  const LinearModel m = make_model(0.3, 1.0, -0.5);

  SUBCASE("equal states with zero input are a fixed point") {
    Eigen::Vector2d x(55.0, 55.0);
    for (int k = 0; k < 10; ++k) x = m.step(x, {0.0, 0.0});
    CHECK(x(0) == doctest::Approx(55.0));
    CHECK(x(1) == doctest::Approx(55.0));
  }

  SUBCASE("unit heat gain integrates to a ramp") {
    Eigen::Vector2d x(0.0, 0.0);
    for (int k = 1; k <= 5; ++k) {
      x = m.step(x, {1.0, 0.0});
      CHECK(x(0) == doctest::Approx(static_cast<double>(k)));
    }
  }

  SUBCASE("a = 1 tracks the reservoir in one step") {
    const LinearModel fast = make_model(1.0, 0.05, -0.05);
    const Eigen::Vector2d x = fast.step(Eigen::Vector2d(47.0, 12.0), {0.0, 0.0});
    CHECK(x(1) == doctest::Approx(47.0));
  }
}

TEST_CASE("noise-free responses superpose for deviation variables") {
  const LinearModel m = make_model(0.2, 0.7, -0.4);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> duty(0.0, 1.0);
  Eigen::Vector2d xa = Eigen::Vector2d::Zero();
  Eigen::Vector2d xb = Eigen::Vector2d::Zero();
  Eigen::Vector2d xs = Eigen::Vector2d::Zero();
  for (int k = 0; k < 50; ++k) {
    const AnalogPair ua{duty(rng), 0.0};
    const AnalogPair ub{0.0, duty(rng)};
    // 2*ua + ub drives the superposed trajectory (inputs may leave the box;
    // the nominal map itself is linear)
    xa = m.step(xa, ua);
    xb = m.step(xb, ub);
    AnalogPair combined{2.0 * ua.heat + ub.heat, 2.0 * ua.cool + ub.cool};
    xs = m.step(xs, combined);
    CHECK((xs - (2.0 * xa + xb)).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("kalman limit cases") {
  const LinearModel base = make_model(0.2, 0.5, -0.3);

  SUBCASE("huge R leaves the prediction untouched") {
    LinearModel m = base;
    m.measurement_var = 1e12;
    KalmanEstimate est;
    est.mean << 40.0, 40.0;
    est.cov = Eigen::Matrix2d::Identity();
    const auto out = kalman_step(m, est, {0.2, 0.1}, 90.0);
    const Eigen::Vector2d predicted = m.step(est.mean, {0.2, 0.1});
    CHECK((out.mean - predicted).lpNorm<Eigen::Infinity>() < 1e-6);
  }

  SUBCASE("R = 0 trusts the measurement completely") {
    LinearModel m = base;
    m.measurement_var = 0.0;
    KalmanEstimate est;
    est.mean << 40.0, 40.0;
    est.cov = Eigen::Matrix2d::Identity();
    const auto out = kalman_step(m, est, {0.0, 0.0}, 43.7);
    CHECK(out.mean(1) == doctest::Approx(43.7).epsilon(1e-12));
  }
}

TEST_CASE("kalman estimate converges on the noise-free plant") {
  const LinearModel m = make_model(0.15, 0.4, -0.3);  // default covariances
  Eigen::Vector2d x_true(50.0, 50.0);
  KalmanEstimate est;
  est.mean << 30.0, 65.0;  // deliberately wrong
  est.cov = Eigen::Matrix2d::Identity() * 10.0;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> duty(0.0, 0.5);
  double err = 1e9;
  for (int k = 0; k < 200; ++k) {
    const AnalogPair u{duty(rng), duty(rng)};
    x_true = m.step(x_true, u);
    est = kalman_step(m, est, u, x_true(1));
    err = std::fabs(est.mean(1) - x_true(1));
  }
  CHECK(err < 1e-3);
}

TEST_CASE("kalman covariance stays symmetric psd over noisy steps") {
  const LinearModel m = make_model(0.2, 0.5, -0.4);
  KalmanEstimate est;
  est.mean << 40.0, 40.0;
  est.cov = Eigen::Matrix2d::Identity();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> duty(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < 10000; ++k) {
    est = kalman_step(m, est, {duty(rng), duty(rng)}, 40.0 + 5.0 * gauss(rng));
    CHECK(est.cov(0, 1) == doctest::Approx(est.cov(1, 0)).epsilon(1e-12));
    CHECK(est.cov(0, 0) >= 0.0);
    CHECK(est.cov.determinant() >= -1e-12);
  }
}

TEST_CASE("kalman step rejects a non-psd covariance") {
  const LinearModel m = make_model(0.2, 0.5, -0.4);
  KalmanEstimate est;
  est.mean << 40.0, 40.0;
  est.cov << 1.0, 3.0, 3.0, 1.0;  // indefinite
  CHECK_THROWS_AS(kalman_step(m, est, {0.0, 0.0}, 40.0), ContractViolation);
}

TEST_CASE("noise-free generate-then-fit recovers the parameters") {
  const LinearModel truth = make_model(0.1, 0.05, -0.08);
  const IoDataset data = simulate(truth, 4000, 21, 0.0, 0.0, 0.0);
  LinearFitOptions opts;
  opts.multistarts = 2;
  const LinearModel fit = fit_linear(data, opts).model;
  CHECK(std::fabs(fit.a - truth.a) / truth.a < 1e-6);
  CHECK(std::fabs(fit.b_heat - truth.b_heat) / truth.b_heat < 1e-6);
  CHECK(std::fabs(fit.b_cool - truth.b_cool) / std::fabs(truth.b_cool) < 1e-6);
}

TEST_CASE("noisy fit stays within five percent") {
  const LinearModel truth = make_model(0.1, 0.05, -0.08);
  const IoDataset data = simulate(truth, 10000, 22, 0.01, 0.01, 0.05);
  LinearFitOptions opts;
  opts.multistarts = 2;
  const LinearModel fit = fit_linear(data, opts).model;
  CHECK(std::fabs(fit.a - truth.a) / truth.a < 0.05);
  CHECK(std::fabs(fit.b_heat - truth.b_heat) / truth.b_heat < 0.05);
  CHECK(std::fabs(fit.b_cool - truth.b_cool) / std::fabs(truth.b_cool) < 0.05);
}

TEST_CASE("constant inputs are rejected as unidentifiable") {
  const LinearModel truth = make_model(0.1, 0.05, -0.08);
  IoDataset data = simulate(truth, 500, 23, 0.0, 0.0, 0.0);
  for (auto& u : data.u) u = {0.4, 0.2};
  CHECK_THROWS_AS(fit_linear(data), IllConditionedError);
  try {
    fit_linear(data);
  } catch (const IllConditionedError& e) {
    const std::string what = e.what();
    CHECK(what.find("u_heat") != std::string::npos);
    CHECK(what.find("u_cool") != std::string::npos);
  }
}

TEST_CASE("short datasets are rejected") {
  const LinearModel truth = make_model(0.1, 0.05, -0.08);
  const IoDataset data = simulate(truth, 50, 24, 0.0, 0.0, 0.0);
  CHECK_THROWS_AS(fit_linear(data), InputDomainError);
}

TEST_CASE("fit is deterministic for fixed options") {
  const LinearModel truth = make_model(0.12, 0.06, -0.07);
  const IoDataset data = simulate(truth, 1500, 25, 0.005, 0.005, 0.02);
  LinearFitOptions opts;
  opts.multistarts = 2;
  const auto first = fit_linear(data, opts);
  const auto second = fit_linear(data, opts);
  CHECK(first.model.a == second.model.a);
  CHECK(first.model.b_heat == second.model.b_heat);
  CHECK(first.model.b_cool == second.model.b_cool);
}

TEST_CASE("linear model json round trip") {
  LinearModel m = make_model(0.123, 0.456, -0.789);
  m.process_cov << 1e-4, 1e-6, 1e-6, 2e-4;
  m.measurement_var = 3e-3;
  const LinearModel back = linear_model_from_json_text(linear_model_to_json(m));
  CHECK(back.a == m.a);
  CHECK(back.b_heat == m.b_heat);
  CHECK(back.b_cool == m.b_cool);
  CHECK(back.process_cov(0, 1) == m.process_cov(0, 1));
  CHECK(back.measurement_var == m.measurement_var);
}
