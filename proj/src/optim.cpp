#include "tcu/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace tcu {

namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lower,
                        const Eigen::VectorXd& upper) {
  if (lower.size() == 0) return x;
  return x.cwiseMax(lower).cwiseMin(upper);
}

struct Pair {
  Eigen::VectorXd s;
  Eigen::VectorXd y;
  double rho;
};

Eigen::VectorXd two_loop(const std::deque<Pair>& mem, const Eigen::VectorXd& grad) {
  Eigen::VectorXd q = grad;
  std::vector<double> alpha(mem.size());
  for (int i = static_cast<int>(mem.size()) - 1; i >= 0; --i) {
    alpha[i] = mem[i].rho * mem[i].s.dot(q);
    q -= alpha[i] * mem[i].y;
  }
  if (!mem.empty()) {
    const Pair& last = mem.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const double beta = mem[i].rho * mem[i].y.dot(q);
    q += (alpha[i] - beta) * mem[i].s;
  }
  return -q;
}

}  // namespace

LbfgsResult minimize_projected_lbfgs(const GradObjective& objective,
                                     const Eigen::VectorXd& x0,
                                     const Eigen::VectorXd& lower,
                                     const Eigen::VectorXd& upper,
                                     const LbfgsOptions& opts) {
  LbfgsResult res;
  Eigen::VectorXd x = project(x0, lower, upper);
  Eigen::VectorXd grad(x.size());
  double f = objective(x, grad);
  std::deque<Pair> mem;

  for (int it = 0; it < opts.max_iterations; ++it) {
    const Eigen::VectorXd pg = x - project(x - grad, lower, upper);
    if (pg.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
      res.converged = true;
      break;
    }

    bool accepted = false;
    Eigen::VectorXd x_new, grad_new(x.size());
    double f_new = 0.0;

    // try the quasi-Newton direction first, then steepest descent
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      const Eigen::VectorXd dir = (attempt == 0 && !mem.empty()) ? two_loop(mem, grad)
                                                                 : Eigen::VectorXd(-grad);
      double alpha = 1.0;
      for (int bt = 0; bt < opts.max_backtracks; ++bt, alpha *= 0.5) {
        Eigen::VectorXd cand = project(x + alpha * dir, lower, upper);
        const Eigen::VectorXd step = cand - x;
        const double slope = grad.dot(step);
        if (slope >= 0.0 || step.lpNorm<Eigen::Infinity>() == 0.0) continue;
        const double f_cand = objective(cand, grad_new);
        if (std::isfinite(f_cand) && f_cand <= f + opts.armijo_c1 * slope) {
          x_new = std::move(cand);
          f_new = f_cand;
          accepted = true;
          break;
        }
      }
    }

    if (!accepted) break;  // line search stalled

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd ygrad = grad_new - grad;
    const double sy = s.dot(ygrad);
    if (sy > 1e-12 * s.norm() * ygrad.norm()) {
      mem.push_back({s, ygrad, 1.0 / sy});
      if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
    }

    x = std::move(x_new);
    f = f_new;
    grad = grad_new;
    ++res.iterations;
  }

  res.x = std::move(x);
  res.f = f;
  return res;
}

Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double rel_step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(std::fabs(x(i)), 1.0);
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

GradObjective with_numeric_gradient(std::function<double(const Eigen::VectorXd&)> f,
                                    double rel_step) {
  return [f = std::move(f), rel_step](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad = numeric_gradient(f, x, rel_step);
    return f(x);
  };
}

}  // namespace tcu
