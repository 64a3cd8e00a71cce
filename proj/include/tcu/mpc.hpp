#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "tcu/pi_control.hpp"
#include "tcu/prediction_model.hpp"

namespace tcu {

/// Economic stage cost: squared tracking error plus a linear input penalty.
struct StageCostParams {
  double lambda = 50.0;  // degC^2 per unit duty
};

double stage_cost(double y_c, const AnalogPair& u, double r_c, const StageCostParams& params);

/// Fixed point of a model minimizing the stage cost for a given reference;
/// used as the terminal constraint of the receding-horizon problem.
struct EquilibriumTarget {
  Eigen::VectorXd x_eq;
  Eigen::Vector2d u_eq = Eigen::Vector2d::Zero();  // raw duty
  double y_eq_c = 0.0;
  double cost = 0.0;      // stage cost at the equilibrium
  double residual = 0.0;  // scaled fixed-point residual, inf norm
  bool reference_reached = true;  // false when y_eq ends up far from r
};

/// The two-state linear model is a driven integrator: it holds any level with
/// zero input, so the cost-minimizing equilibrium is x = (r, r), u = 0.
EquilibriumTarget solve_equilibrium(const LinearModel& model, double r_c,
                                    const StageCostParams& params);

struct EquilibriumOptions {
  int grid_per_axis = 5;        // multistart grid over the duty box
  int scan_points = 81;         // fixed-point bracketing resolution over y
  double y_band_sigma = 4.0;    // normalized output search band half-width
  int polish_iterations = 200;  // projected descent steps over u
  double reference_tol_c = 5.0; // |y_eq - r| beyond this flags the target
};

/// Equilibria of the NNARX realization all have the all-equal window
/// structure, so the fixed-point condition reduces to a scalar root problem
/// per duty pair. Multistarts over a duty grid, polishes the best cell by
/// projected descent, then re-solves the scalar fixed point to machine
/// precision. Throws IllConditionedError when no duty pair admits a fixed
/// point inside the trained output band.
EquilibriumTarget solve_equilibrium(const NnarxPrediction& model, double r_c,
                                    const StageCostParams& params,
                                    const EquilibriumOptions& opts = {});

enum class SolverStatus { converged, max_iterations, infeasible };

const char* to_string(SolverStatus status);

struct OcpOptions {
  int horizon = 30;                 // N_p
  int max_total_iterations = 4000;  // inner-iteration budget across outer loops
  int max_outer_iterations = 10;    // augmented-Lagrangian rounds
  double terminal_tol = 1e-6;       // scaled inf-norm of the terminal residual
  double inner_grad_tol = 1e-9;     // projected-gradient tolerance
  double penalty_init = 10.0;
  double penalty_growth = 2.0;      // doubling per outer round
  double penalty_max = 1e10;
  bool with_terminal = true;        // disable for box-only solves
  double wall_clock_cap_s = 0.0;    // optional; 0 disables the cap
};

struct OcpWarmStart {
  Eigen::VectorXd u_flat;       // 2*horizon, interleaved (heat, cool)
  Eigen::VectorXd multipliers;  // terminal constraint duals
  double penalty = 0.0;
  bool valid = false;
};

struct OcpSolution {
  std::vector<AnalogPair> u_plan;        // horizon inputs
  std::vector<Eigen::VectorXd> x_plan;   // horizon + 1 states
  double objective = 0.0;                // stage-cost sum, no penalty terms
  SolverStatus status = SolverStatus::max_iterations;
  int iterations = 0;                    // inner iterations spent
  double terminal_residual = 0.0;        // scaled inf norm
  Eigen::VectorXd multipliers;
  double penalty = 0.0;
};

/// Terminal-constrained optimal control by single shooting: the decision
/// variables are the duty pairs, states are eliminated by forward simulation,
/// the box is handled by projection and the terminal equality by an
/// augmented-Lagrangian outer loop with penalty doubling. Gradients are exact
/// reverse-mode through the model step.
OcpSolution solve_ocp(const PredictionModel& model, const Eigen::VectorXd& x0, double r_c,
                      const EquilibriumTarget& target, const StageCostParams& cost,
                      const OcpOptions& opts, const OcpWarmStart* warm = nullptr);

struct MpcDiagnostics {
  SolverStatus status = SolverStatus::max_iterations;
  int iterations = 0;
  double objective = 0.0;
  double terminal_residual = 0.0;
  bool fallback = false;           // previous input was applied
  bool target_recomputed = false;  // equilibrium re-solved this call
};

/// Receding-horizon policy: re-solves the OCP each call, applies the first
/// planned input, and shifts the remaining plan (appending the equilibrium
/// input) as the next warm start. The equilibrium target is recomputed only
/// when the reference changes. When the iteration or wall-clock budget runs
/// out the previously applied input is returned unchanged and the event is
/// flagged; an infeasible solve (terminal set out of reach) applies the
/// least-infeasible plan's first input instead.
class MpcController {
 public:
  MpcController(std::shared_ptr<const PredictionModel> model,
                std::function<EquilibriumTarget(double)> equilibrium_solver,
                StageCostParams cost, OcpOptions opts);

  AnalogPair control(const Eigen::VectorXd& x, double r_c, MpcDiagnostics* diag = nullptr);

  /// Overrides the OCP iteration budget; std::nullopt restores the default.
  void force_iteration_budget(std::optional<int> budget) { forced_budget_ = budget; }

  const std::optional<EquilibriumTarget>& current_target() const { return target_; }
  const AnalogPair& previous_input() const { return previous_input_; }

 private:
  std::shared_ptr<const PredictionModel> model_;
  std::function<EquilibriumTarget(double)> equilibrium_solver_;
  StageCostParams cost_;
  OcpOptions opts_;
  std::optional<int> forced_budget_;
  std::optional<EquilibriumTarget> target_;
  double target_r_ = 0.0;
  OcpWarmStart warm_;
  AnalogPair previous_input_{0.0, 0.0};
};

}  // namespace tcu
