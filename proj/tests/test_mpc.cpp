#include <doctest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <random>

#include "tcu/mpc.hpp"
#include "tcu/prediction_model.hpp"

using namespace tcu;

namespace {

LinearModel thermal_linear() {
  LinearModel m;
  m.a = 0.25;
  m.b_heat = 0.6;
  m.b_cool = -0.5;
  return m;
}

/// Small contraction NNARX fixture with a nontrivial normalizer.
NnarxModel small_nnarx(std::uint64_t seed) {
  NnarxModel m = NnarxModel::random_init(4, {8}, seed);
  m.unpack_parameters(m.pack_parameters() * 0.5);
  m.norm.u_mean << 0.3, 0.3;
  m.norm.u_std << 0.2, 0.2;
  m.norm.y_mean = 50.0;
  m.norm.y_std = 10.0;
  return m;
}

/// Damped fixed-point iteration for the all-equal-window equilibrium, used
/// as the brute-force oracle's per-cell solver.
std::optional<double> fixed_point_iterate(const NnarxModel& m, const Eigen::Vector2d& u_n,
                                          double y_init) {
  double y = y_init;
  for (int it = 0; it < 3000; ++it) {
    Eigen::VectorXd x(m.state_dim());
    for (int i = 0; i < m.past_window; ++i) {
      x(3 * i) = y;
      x(3 * i + 1) = u_n(0);
      x(3 * i + 2) = u_n(1);
    }
    const double next = ffnn_eval(m, x, u_n);
    const double y_new = 0.5 * y + 0.5 * next;
    if (std::fabs(y_new - y) < 1e-13) return y_new;
    y = y_new;
    if (!std::isfinite(y) || std::fabs(y) > 25.0) return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("stage cost formula") {
  StageCostParams p;  // lambda = 50
  CHECK(stage_cost(50.0, {0.0, 0.0}, 50.0, p) == 0.0);
  CHECK(stage_cost(52.0, {1.0, 0.0}, 50.0, p) == doctest::Approx(54.0));
  StageCostParams tracking_only{0.0};
  CHECK(stage_cost(52.0, {1.0, 1.0}, 50.0, tracking_only) == doctest::Approx(4.0));
}

TEST_CASE("linear equilibrium is the zero-input fixed point at the reference") {
  const LinearModel m = thermal_linear();
  StageCostParams p;
  const EquilibriumTarget t = solve_equilibrium(m, 57.0, p);
  CHECK(t.x_eq(0) == 57.0);
  CHECK(t.x_eq(1) == 57.0);
  CHECK(t.u_eq.norm() == 0.0);
  CHECK(t.cost == 0.0);
  CHECK(t.residual < 1e-12);
}

TEST_CASE("nnarx equilibrium matches the duty-grid oracle") {
  const NnarxModel m = small_nnarx(1001);
  const NnarxPrediction pred(m);
  StageCostParams p;
  const double r = 52.0;
  const EquilibriumTarget t = solve_equilibrium(pred, r, p);
  CHECK(t.residual < 1e-8);
  // residual of the packed state against one model step, scaled units
  const Eigen::VectorXd stepped = pred.step(t.x_eq, t.u_eq);
  CHECK((stepped - t.x_eq).lpNorm<Eigen::Infinity>() < 1e-8);

  // brute force: 0.01 duty grid with damped fixed-point iteration per cell
  double best = std::numeric_limits<double>::infinity();
  for (int ih = 0; ih <= 100; ++ih) {
    for (int ic = 0; ic <= 100; ++ic) {
      const AnalogPair u{ih / 100.0, ic / 100.0};
      const Eigen::Vector2d u_n = m.norm.normalize_u(u);
      const auto y = fixed_point_iterate(m, u_n, 0.0);
      if (!y) continue;
      best = std::min(best, stage_cost(m.norm.denormalize_y(*y), u, r, p));
    }
  }
  CHECK(t.cost <= best + 1e-4);
}

TEST_CASE("ocp at the linear equilibrium returns the constant plan") {
  const LinearModel lin = thermal_linear();
  const LinearPrediction model(lin);
  StageCostParams cost;
  const double r = 55.0;
  const EquilibriumTarget target = solve_equilibrium(lin, r, cost);
  OcpOptions opts;
  opts.horizon = 30;
  const OcpSolution sol = solve_ocp(model, target.x_eq, r, target, cost, opts);
  CHECK(sol.status == SolverStatus::converged);
  CHECK(sol.terminal_residual < 1e-6);
  CHECK(sol.objective == doctest::Approx(30.0 * target.cost).epsilon(1e-10));
  for (const auto& u : sol.u_plan) {
    CHECK(u.heat == doctest::Approx(target.u_eq(0)).epsilon(1e-9));
    CHECK(u.cool == doctest::Approx(target.u_eq(1)).epsilon(1e-9));
  }
}

TEST_CASE("planned inputs always stay inside the duty box") {
  const LinearModel lin = thermal_linear();
  const LinearPrediction model(lin);
  StageCostParams cost;
  const EquilibriumTarget target = solve_equilibrium(lin, 60.0, cost);
  OcpOptions opts;
  opts.horizon = 12;
  const OcpSolution sol =
      solve_ocp(model, Eigen::Vector2d(40.0, 40.0), 60.0, target, cost, opts);
  for (const auto& u : sol.u_plan) {
    CHECK(u.heat >= 0.0);
    CHECK(u.heat <= 1.0);
    CHECK(u.cool >= 0.0);
    CHECK(u.cool <= 1.0);
  }
}

TEST_CASE("terminal-free solve beats the exhaustive duty grid") {
  // two-stage problem; the grid minimum decomposes exactly because the
  // trailing input only adds its own linear penalty
  StageCostParams cost;
  OcpOptions opts;
  opts.horizon = 2;
  opts.with_terminal = false;
  opts.max_total_iterations = 2000;

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> temp(45.0, 60.0);

  SUBCASE("linear model") {
    const LinearModel lin = thermal_linear();
    const LinearPrediction model(lin);
    const double r = 52.0;
    const EquilibriumTarget target = solve_equilibrium(lin, r, cost);
    for (int trial = 0; trial < 4; ++trial) {
      const Eigen::Vector2d x0(temp(rng), temp(rng));
      const OcpSolution sol = solve_ocp(model, x0, r, target, cost, opts);
      double grid_best = std::numeric_limits<double>::infinity();
      for (int ih = 0; ih <= 50; ++ih) {
        for (int ic = 0; ic <= 50; ++ic) {
          const AnalogPair u0{ih / 50.0, ic / 50.0};
          const double y0 = model.output(x0);
          const Eigen::VectorXd x1 = model.step(x0, Eigen::Vector2d(u0.heat, u0.cool));
          const double j = stage_cost(y0, u0, r, cost) +
                           stage_cost(model.output(x1), {0.0, 0.0}, r, cost);
          grid_best = std::min(grid_best, j);
        }
      }
      CHECK(sol.objective <= grid_best + 1e-3);
    }
  }

  SUBCASE("nnarx model") {
    const NnarxModel nn = small_nnarx(2002);
    const NnarxPrediction model(nn);
    const double r = 51.0;
    StageCostParams p;
    const EquilibriumTarget target = solve_equilibrium(model, r, p);
    std::normal_distribution<double> gauss(0.0, 0.5);
    for (int trial = 0; trial < 3; ++trial) {
      Eigen::VectorXd x0(model.state_dim());
      for (Eigen::Index i = 0; i < x0.size(); ++i) x0(i) = gauss(rng);
      const OcpSolution sol = solve_ocp(model, x0, r, target, cost, opts);
      double grid_best = std::numeric_limits<double>::infinity();
      for (int ih = 0; ih <= 50; ++ih) {
        for (int ic = 0; ic <= 50; ++ic) {
          const AnalogPair u0{ih / 50.0, ic / 50.0};
          const double y0 = model.output(x0);
          const Eigen::VectorXd x1 = model.step(x0, Eigen::Vector2d(u0.heat, u0.cool));
          const double j = stage_cost(y0, u0, r, cost) +
                           stage_cost(model.output(x1), {0.0, 0.0}, r, cost);
          grid_best = std::min(grid_best, j);
        }
      }
      CHECK(sol.objective <= grid_best + 1e-3);
    }
  }
}

TEST_CASE("shifted warm start stays feasible for the next problem") {
  const LinearModel lin = thermal_linear();
  const LinearPrediction model(lin);
  StageCostParams cost;
  const double r = 50.0;
  const EquilibriumTarget target = solve_equilibrium(lin, r, cost);
  OcpOptions opts;
  opts.horizon = 15;
  opts.terminal_tol = 1e-10;
  opts.max_outer_iterations = 30;
  opts.max_total_iterations = 20000;
  const Eigen::Vector2d x0(48.0, 50.0);
  const OcpSolution sol = solve_ocp(model, x0, r, target, cost, opts);
  REQUIRE(sol.status == SolverStatus::converged);

  // drop the first input, append u_eq, simulate from the successor state
  Eigen::VectorXd x = model.step(x0, Eigen::Vector2d(sol.u_plan[0].heat, sol.u_plan[0].cool));
  for (int i = 1; i < opts.horizon; ++i)
    x = model.step(x, Eigen::Vector2d(sol.u_plan[i].heat, sol.u_plan[i].cool));
  x = model.step(x, target.u_eq);
  const double shifted_residual =
      ((x - target.x_eq).cwiseQuotient(model.state_scale())).lpNorm<Eigen::Infinity>();
  CHECK(shifted_residual < 1e-8);
}

TEST_CASE("policy holds the equilibrium input at the equilibrium") {
  const LinearModel lin = thermal_linear();
  auto model = std::make_shared<LinearPrediction>(lin);
  StageCostParams cost;
  OcpOptions opts;
  opts.horizon = 20;
  MpcController controller(
      model, [&](double r) { return solve_equilibrium(lin, r, cost); }, cost, opts);

  const double r = 53.0;
  Eigen::VectorXd x = Eigen::Vector2d(r, r);
  for (int k = 0; k < 10; ++k) {
    MpcDiagnostics diag;
    const AnalogPair u = controller.control(x, r, &diag);
    CHECK(diag.status == SolverStatus::converged);
    CHECK_FALSE(diag.fallback);
    CHECK(u.heat == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(u.cool == doctest::Approx(0.0).epsilon(1e-10));
    x = model->step(x, Eigen::Vector2d(u.heat, u.cool));
  }
}

TEST_CASE("zero iteration budget falls back to the previous input") {
  const LinearModel lin = thermal_linear();
  auto model = std::make_shared<LinearPrediction>(lin);
  StageCostParams cost;
  OcpOptions opts;
  opts.horizon = 10;
  MpcController controller(
      model, [&](double r) { return solve_equilibrium(lin, r, cost); }, cost, opts);

  Eigen::VectorXd x = Eigen::Vector2d(48.0, 48.0);
  MpcDiagnostics diag;
  const AnalogPair first = controller.control(x, 52.0, &diag);
  REQUIRE(diag.status == SolverStatus::converged);
  CHECK(first.heat > 0.0);

  controller.force_iteration_budget(0);
  x = model->step(x, Eigen::Vector2d(first.heat, first.cool));
  const AnalogPair held = controller.control(x, 52.0, &diag);
  CHECK(diag.fallback);
  CHECK(diag.status == SolverStatus::max_iterations);
  CHECK(held.heat == first.heat);
  CHECK(held.cool == first.cool);
}

TEST_CASE("nominal closed loop never increases the optimal value") {
  const LinearModel lin = thermal_linear();
  auto model = std::make_shared<LinearPrediction>(lin);
  StageCostParams cost;
  OcpOptions opts;
  opts.horizon = 20;
  MpcController controller(
      model, [&](double r) { return solve_equilibrium(lin, r, cost); }, cost, opts);

  const double r = 55.0;
  Eigen::VectorXd x = Eigen::Vector2d(50.0, 50.0);
  double prev_value = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 25; ++k) {
    MpcDiagnostics diag;
    const AnalogPair u = controller.control(x, r, &diag);
    REQUIRE(diag.status == SolverStatus::converged);
    CHECK(diag.objective <= prev_value + 1e-6);
    prev_value = diag.objective;
    x = model->step(x, Eigen::Vector2d(u.heat, u.cool));
  }
}

TEST_CASE("warm-started resolve needs far fewer iterations") {
  const LinearModel lin = thermal_linear();
  auto model = std::make_shared<LinearPrediction>(lin);
  StageCostParams cost;
  OcpOptions opts;
  opts.horizon = 20;
  const double r = 58.0;
  const EquilibriumTarget target = solve_equilibrium(lin, r, cost);

  const Eigen::Vector2d x0(50.0, 50.0);
  const OcpSolution cold = solve_ocp(*model, x0, r, target, cost, opts);
  REQUIRE(cold.status == SolverStatus::converged);

  OcpWarmStart warm;
  warm.u_flat.resize(2 * opts.horizon);
  for (int i = 0; i + 1 < opts.horizon; ++i) {
    warm.u_flat(2 * i) = cold.u_plan[i + 1].heat;
    warm.u_flat(2 * i + 1) = cold.u_plan[i + 1].cool;
  }
  warm.u_flat.tail<2>() = target.u_eq;
  warm.multipliers = cold.multipliers;
  warm.penalty = cold.penalty;
  warm.valid = true;

  const Eigen::VectorXd x1 =
      model->step(x0, Eigen::Vector2d(cold.u_plan[0].heat, cold.u_plan[0].cool));
  const OcpSolution rewarm = solve_ocp(*model, x1, r, target, cost, opts, &warm);
  CHECK(rewarm.status == SolverStatus::converged);
  CHECK(rewarm.iterations < cold.iterations);
}
