#include "tcu/mpc.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "tcu/errors.hpp"
#include "tcu/optim.hpp"

namespace tcu {

double stage_cost(double y_c, const AnalogPair& u, double r_c, const StageCostParams& params) {
  const double e = y_c - r_c;
  return e * e + params.lambda * (u.heat + u.cool);
}

const char* to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::converged: return "converged";
    case SolverStatus::max_iterations: return "max-iter";
    case SolverStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

EquilibriumTarget solve_equilibrium(const LinearModel& model, double r_c,
                                    const StageCostParams& params) {
  EquilibriumTarget target;
  target.x_eq = Eigen::Vector2d(r_c, r_c);
  target.u_eq = Eigen::Vector2d::Zero();
  target.y_eq_c = r_c;
  target.cost = stage_cost(r_c, AnalogPair{0.0, 0.0}, r_c, params);
  target.residual = (target.x_eq - model.step(target.x_eq, AnalogPair{0.0, 0.0}))
                        .cwiseAbs()
                        .maxCoeff();
  return target;
}

namespace {

/// All fixed points of the packed realization have the all-equal window form,
/// so the condition collapses to eta(pack(y..., u...), u) = y in the scalar y.
double window_regression(const NnarxModel& m, double y_n, const Eigen::Vector2d& u_n) {
  const int n = m.past_window;
  Eigen::VectorXd x(3 * n);
  for (int i = 0; i < n; ++i) {
    x(3 * i) = y_n;
    x(3 * i + 1) = u_n(0);
    x(3 * i + 2) = u_n(1);
  }
  return ffnn_eval(m, x, u_n);
}

/// Sign-change bracketing plus bisection of g(y) = eta(...) - y over the band.
std::vector<double> scalar_fixed_points(const NnarxModel& m, const Eigen::Vector2d& u_n,
                                        double lo, double hi, int scan_points) {
  std::vector<double> roots;
  auto g = [&](double y) { return window_regression(m, y, u_n) - y; };
  double prev_y = lo;
  double prev_g = g(lo);
  if (prev_g == 0.0) roots.push_back(lo);
  for (int i = 1; i < scan_points; ++i) {
    const double y = lo + (hi - lo) * i / (scan_points - 1);
    const double gy = g(y);
    if (gy == 0.0) {
      roots.push_back(y);
    } else if (prev_g * gy < 0.0) {
      double a = prev_y, b = y, ga = prev_g;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        const double gm = g(mid);
        if (gm == 0.0) {
          a = b = mid;
          break;
        }
        if (ga * gm < 0.0) {
          b = mid;
        } else {
          a = mid;
          ga = gm;
        }
        if (b - a < 1e-15 * std::max(1.0, std::fabs(a))) break;
      }
      roots.push_back(0.5 * (a + b));
    }
    prev_y = y;
    prev_g = gy;
  }
  return roots;
}

Eigen::VectorXd equilibrium_state(const NnarxModel& m, double y_n, const Eigen::Vector2d& u_n) {
  const int n = m.past_window;
  Eigen::VectorXd x(3 * n);
  for (int i = 0; i < n; ++i) {
    x(3 * i) = y_n;
    x(3 * i + 1) = u_n(0);
    x(3 * i + 2) = u_n(1);
  }
  return x;
}

}  // namespace

EquilibriumTarget solve_equilibrium(const NnarxPrediction& pred, double r_c,
                                    const StageCostParams& params,
                                    const EquilibriumOptions& opts) {
  const NnarxModel& m = pred.model();
  const double lo = -opts.y_band_sigma;
  const double hi = opts.y_band_sigma;

  // objective over the duty box with the fixed point picked per cell:
  // among the cell's fixed points keep the cheapest.
  auto best_for_u = [&](const Eigen::Vector2d& u_raw) -> std::optional<std::pair<double, double>> {
    const Eigen::Vector2d u_n = m.norm.normalize_u(AnalogPair{u_raw(0), u_raw(1)});
    const auto roots = scalar_fixed_points(m, u_n, lo, hi, opts.scan_points);
    if (roots.empty()) return std::nullopt;
    double best_cost = std::numeric_limits<double>::infinity();
    double best_y = roots.front();
    for (double y_n : roots) {
      const double c =
          stage_cost(m.norm.denormalize_y(y_n), AnalogPair{u_raw(0), u_raw(1)}, r_c, params);
      if (c < best_cost) {
        best_cost = c;
        best_y = y_n;
      }
    }
    return std::make_pair(best_cost, best_y);
  };

  // multistart over the duty grid
  double best_cost = std::numeric_limits<double>::infinity();
  Eigen::Vector2d best_u = Eigen::Vector2d::Zero();
  double best_y_n = 0.0;
  bool found = false;
  const int g = std::max(2, opts.grid_per_axis);
  for (int ih = 0; ih < g; ++ih) {
    for (int ic = 0; ic < g; ++ic) {
      const Eigen::Vector2d u_raw(static_cast<double>(ih) / (g - 1),
                                  static_cast<double>(ic) / (g - 1));
      const auto cell = best_for_u(u_raw);
      if (!cell) continue;
      found = true;
      if (cell->first < best_cost) {
        best_cost = cell->first;
        best_u = u_raw;
        best_y_n = cell->second;
      }
    }
  }
  if (!found)
    throw IllConditionedError(
        "solve_equilibrium: no fixed point of the NNARX model inside the trained output band "
        "for any duty pair; the model may be unstable or the band too narrow");

  // projected descent polish on the duty pair (numeric gradient, 2 variables)
  auto phi = [&](const Eigen::VectorXd& u) -> double {
    const auto cell = best_for_u(Eigen::Vector2d(u(0), u(1)));
    return cell ? cell->first : 1e12;
  };
  LbfgsOptions lopts;
  lopts.max_iterations = opts.polish_iterations;
  lopts.grad_tol = 1e-12;
  const auto res = minimize_projected_lbfgs(with_numeric_gradient(phi, 1e-7),
                                            best_u, Eigen::Vector2d::Zero(),
                                            Eigen::Vector2d::Ones(), lopts);
  if (res.f < best_cost) {
    const auto cell = best_for_u(Eigen::Vector2d(res.x(0), res.x(1)));
    if (cell) {
      best_cost = cell->first;
      best_u = res.x;
      best_y_n = cell->second;
    }
  }

  EquilibriumTarget target;
  const Eigen::Vector2d u_n = m.norm.normalize_u(AnalogPair{best_u(0), best_u(1)});
  target.x_eq = equilibrium_state(m, best_y_n, u_n);
  target.u_eq = best_u;
  target.y_eq_c = m.norm.denormalize_y(best_y_n);
  target.cost = best_cost;
  target.residual = std::fabs(window_regression(m, best_y_n, u_n) - best_y_n);
  target.reference_reached = std::fabs(target.y_eq_c - r_c) <= opts.reference_tol_c;
  return target;
}

namespace {

struct Rollout {
  std::vector<Eigen::VectorXd> states;  // horizon + 1
  std::vector<double> outputs;          // horizon (stage outputs)
  double stage_sum = 0.0;
  Eigen::VectorXd residual;             // scaled terminal residual
};

Rollout rollout(const PredictionModel& model, const Eigen::VectorXd& x0,
                const Eigen::VectorXd& u_flat, double r_c, const StageCostParams& cost,
                const EquilibriumTarget& target, const Eigen::VectorXd& inv_scale,
                bool with_terminal) {
  const int np = static_cast<int>(u_flat.size() / 2);
  Rollout out;
  out.states.reserve(np + 1);
  out.outputs.reserve(np);
  Eigen::VectorXd x = x0;
  for (int i = 0; i < np; ++i) {
    out.states.push_back(x);
    const double y = model.output(x);
    out.outputs.push_back(y);
    const AnalogPair u{u_flat(2 * i), u_flat(2 * i + 1)};
    out.stage_sum += stage_cost(y, u, r_c, cost);
    x = model.step(x, Eigen::Vector2d(u.heat, u.cool));
  }
  out.states.push_back(x);
  if (with_terminal)
    out.residual = (x - target.x_eq).cwiseProduct(inv_scale);
  else
    out.residual = Eigen::VectorXd::Zero(x.size());
  return out;
}

}  // namespace

OcpSolution solve_ocp(const PredictionModel& model, const Eigen::VectorXd& x0, double r_c,
                      const EquilibriumTarget& target, const StageCostParams& cost,
                      const OcpOptions& opts, const OcpWarmStart* warm) {
  if (x0.size() != model.state_dim())
    throw InputDomainError("solve_ocp: initial state dimension mismatch");
  const int np = opts.horizon;
  const int nu = 2 * np;
  const int nx = model.state_dim();
  const Eigen::VectorXd inv_scale = model.state_scale().cwiseInverse();

  Eigen::VectorXd u_flat(nu);
  if (warm && warm->valid && warm->u_flat.size() == nu) {
    u_flat = warm->u_flat;
  } else {
    for (int i = 0; i < np; ++i) u_flat.segment<2>(2 * i) = target.u_eq;
  }
  Eigen::VectorXd nu_mult = Eigen::VectorXd::Zero(nx);
  double mu = opts.penalty_init;
  if (warm && warm->valid && warm->multipliers.size() == nx) {
    nu_mult = warm->multipliers;
    if (warm->penalty > 0.0) mu = warm->penalty;
  }

  const Eigen::VectorXd lower = Eigen::VectorXd::Zero(nu);
  const Eigen::VectorXd upper = Eigen::VectorXd::Ones(nu);

  // augmented-Lagrangian objective with exact reverse-mode gradient
  auto make_objective = [&](double mu_k, const Eigen::VectorXd& nu_k) {
    return [&, mu_k, nu_k](const Eigen::VectorXd& u, Eigen::VectorXd& grad) -> double {
      const Rollout ro = rollout(model, x0, u, r_c, cost, target, inv_scale,
                                 opts.with_terminal);
      double f = ro.stage_sum;
      Eigen::VectorXd w = Eigen::VectorXd::Zero(x0.size());
      if (opts.with_terminal) {
        f += nu_k.dot(ro.residual) + 0.5 * mu_k * ro.residual.squaredNorm();
        w = (nu_k + mu_k * ro.residual).cwiseProduct(inv_scale);
      }
      if (!std::isfinite(f))
        throw NumericalError("solve_ocp: non-finite model output along the rollout");
      grad.setZero();
      for (int i = np - 1; i >= 0; --i) {
        Eigen::VectorXd x_bar = Eigen::VectorXd::Zero(x0.size());
        Eigen::Vector2d u_bar(cost.lambda, cost.lambda);
        model.step_vjp(ro.states[i], u.segment<2>(2 * i), w, x_bar, u_bar);
        grad.segment<2>(2 * i) = u_bar;
        w = x_bar +
            2.0 * (ro.outputs[i] - r_c) * model.output_gradient(ro.states[i]);
      }
      return f;
    };
  };

  OcpSolution sol;
  const auto t_start = std::chrono::steady_clock::now();
  auto wall_clock_exceeded = [&]() {
    if (opts.wall_clock_cap_s <= 0.0) return false;
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - t_start;
    return elapsed.count() > opts.wall_clock_cap_s;
  };

  auto finalize = [&](int iterations_used) {
    const Rollout ro =
        rollout(model, x0, u_flat, r_c, cost, target, inv_scale, opts.with_terminal);
    sol.objective = ro.stage_sum;
    sol.terminal_residual = ro.residual.lpNorm<Eigen::Infinity>();
    sol.x_plan = ro.states;
    sol.u_plan.clear();
    sol.u_plan.reserve(np);
    for (int i = 0; i < np; ++i) sol.u_plan.push_back({u_flat(2 * i), u_flat(2 * i + 1)});
    sol.iterations = iterations_used;
    sol.multipliers = nu_mult;
    sol.penalty = mu;
  };

  if (opts.max_total_iterations <= 0) {
    finalize(0);
    sol.status = SolverStatus::max_iterations;
    return sol;
  }

  int iterations_used = 0;
  bool out_of_budget = false;
  bool last_inner_done = false;  // PG tolerance met or line search stalled
  const int outer_rounds = opts.with_terminal ? opts.max_outer_iterations : 1;

  for (int outer = 0; outer < outer_rounds; ++outer) {
    const int remaining = opts.max_total_iterations - iterations_used;
    if (remaining <= 0 || wall_clock_exceeded()) {
      out_of_budget = true;
      break;
    }
    LbfgsOptions lopts;
    lopts.max_iterations = remaining;
    lopts.grad_tol = opts.inner_grad_tol;
    const auto inner =
        minimize_projected_lbfgs(make_objective(mu, nu_mult), u_flat, lower, upper, lopts);
    iterations_used += inner.iterations;
    u_flat = inner.x;
    last_inner_done = inner.converged || inner.iterations < remaining;

    if (!opts.with_terminal) break;

    const Rollout ro = rollout(model, x0, u_flat, r_c, cost, target, inv_scale, true);
    const double viol = ro.residual.lpNorm<Eigen::Infinity>();
    if (viol < opts.terminal_tol && last_inner_done) break;
    if (!last_inner_done) {
      out_of_budget = true;
      break;
    }
    nu_mult += mu * ro.residual;
    mu = std::min(mu * opts.penalty_growth, opts.penalty_max);
  }
  if (iterations_used >= opts.max_total_iterations || wall_clock_exceeded())
    out_of_budget = true;

  finalize(iterations_used);
  const bool terminal_ok = !opts.with_terminal || sol.terminal_residual < opts.terminal_tol;
  if (terminal_ok && last_inner_done)
    sol.status = SolverStatus::converged;
  else if (out_of_budget)
    sol.status = SolverStatus::max_iterations;
  else
    sol.status = SolverStatus::infeasible;
  return sol;
}

MpcController::MpcController(std::shared_ptr<const PredictionModel> model,
                             std::function<EquilibriumTarget(double)> equilibrium_solver,
                             StageCostParams cost, OcpOptions opts)
    : model_(std::move(model)),
      equilibrium_solver_(std::move(equilibrium_solver)),
      cost_(cost),
      opts_(opts) {}

AnalogPair MpcController::control(const Eigen::VectorXd& x, double r_c,
                                  MpcDiagnostics* diag) {
  MpcDiagnostics local;
  if (!target_ || r_c != target_r_) {
    target_ = equilibrium_solver_(r_c);
    target_r_ = r_c;
    warm_ = OcpWarmStart{};  // stale plan and duals are dropped with the target
    local.target_recomputed = true;
  }

  OcpOptions opts = opts_;
  if (forced_budget_) opts.max_total_iterations = *forced_budget_;

  const OcpSolution sol =
      solve_ocp(*model_, x, r_c, *target_, cost_, opts, warm_.valid ? &warm_ : nullptr);
  local.status = sol.status;
  local.iterations = sol.iterations;
  local.objective = sol.objective;
  local.terminal_residual = sol.terminal_residual;

  AnalogPair u;
  if (sol.status == SolverStatus::max_iterations) {
    // budget or wall clock exhausted: leave the input unchanged
    u = previous_input_;
    local.fallback = true;
  } else {
    // converged, or least-infeasible best effort when the terminal set is
    // out of reach (pushes toward the target instead of stalling)
    u = sol.u_plan.front();
    warm_.u_flat.resize(2 * opts_.horizon);
    for (int i = 0; i + 1 < opts_.horizon; ++i) {
      warm_.u_flat(2 * i) = sol.u_plan[i + 1].heat;
      warm_.u_flat(2 * i + 1) = sol.u_plan[i + 1].cool;
    }
    warm_.u_flat.tail<2>() = target_->u_eq;
    warm_.multipliers = sol.multipliers;
    warm_.penalty = sol.penalty;
    warm_.valid = true;
    previous_input_ = u;
  }
  if (diag) *diag = local;
  return u;
}

}  // namespace tcu
