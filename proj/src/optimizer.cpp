#include "spglm/optimizer.hpp"

#include "spglm/data_model.hpp"

#include <algorithm>
#include <cmath>

namespace spglm::optim {

Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double fx, double rel_step,
                                   long* evaluations) {
  const Eigen::Index d = x.size();
  Eigen::VectorXd g(d);
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    if (evaluations) *evaluations += 2;
    const bool okp = std::isfinite(fp), okm = std::isfinite(fm);
    if (okp && okm)
      g[i] = (fp - fm) / (2.0 * h);
    else if (okp)
      g[i] = (fp - fx) / h;
    else if (okm)
      g[i] = (fx - fm) / h;
    else
      g[i] = 0.0;
  }
  return g;
}

namespace {

struct LineSearchOutcome {
  bool ok = false;
  double step = 0.0;
  double f = 0.0;
};

LineSearchOutcome backtrack(const Objective& f, const Eigen::VectorXd& x, double fx, const Eigen::VectorXd& g,
                            const Eigen::VectorXd& dir, double max_step, long& evals) {
  const double slope = g.dot(dir);
  double a = 1.0;
  const double dmax = dir.cwiseAbs().maxCoeff();
  if (dmax * a > max_step) a = max_step / dmax;
  constexpr double c1 = 1e-4;
  for (int k = 0; k < 60; ++k) {
    const double ft = f(x + a * dir);
    ++evals;
    if (std::isfinite(ft) && ft <= fx + c1 * a * slope) return {true, a, ft};
    if (std::isfinite(ft)) {
      // Safeguarded quadratic interpolation of phi(a) = f(x + a dir).
      const double denom = 2.0 * (ft - fx - slope * a);
      double an = denom > 0 ? -slope * a * a / denom : 0.5 * a;
      a = std::clamp(an, 0.1 * a, 0.5 * a);
    } else {
      a *= 0.25;
    }
  }
  return {};
}

}  // namespace

Result minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0, const Options& opt) {
  Result res;
  res.x = x0;
  res.f = f(x0);
  res.evaluations = 1;
  if (!std::isfinite(res.f)) throw ConvergenceError("objective is not finite at the starting point");
  const Eigen::Index d = x0.size();
  if (d == 0) {
    res.converged = true;
    res.gradient = Eigen::VectorXd();
    res.message = "no free parameters";
    return res;
  }

  Eigen::VectorXd g = numerical_gradient(f, res.x, res.f, opt.grad_step, &res.evaluations);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d, d);
  bool fresh = true;  // H is a (scaled) identity
  int stalls = 0;
  int flat = 0;  // consecutive iterations without progress

  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    Eigen::VectorXd dir = -H * g;
    if (!(g.dot(dir) < 0)) {
      H.setIdentity();
      fresh = true;
      dir = -g;
    }
    if (g.lpNorm<Eigen::Infinity>() == 0.0) {
      res.converged = true;
      res.message = "zero gradient";
      break;
    }
    const LineSearchOutcome ls = backtrack(f, res.x, res.f, g, dir, opt.max_step, res.evaluations);
    if (!ls.ok) {
      if (!fresh && stalls == 0) {
        H.setIdentity();
        fresh = true;
        ++stalls;
        continue;
      }
      res.converged = g.lpNorm<Eigen::Infinity>() <= opt.gtol;
      res.message = "line search stalled";
      break;
    }
    stalls = 0;
    const Eigen::VectorXd s = ls.step * dir;
    const double f_old = res.f;
    res.x += s;
    res.f = ls.f;
    const Eigen::VectorXd g_new = numerical_gradient(f, res.x, res.f, opt.grad_step, &res.evaluations);
    const Eigen::VectorXd yv = g_new - g;
    g = g_new;

    const bool small_change = std::abs(f_old - res.f) <= opt.ftol * std::max(1.0, std::abs(res.f));
    const bool small_grad = g.lpNorm<Eigen::Infinity>() <= opt.gtol;
    if (small_change && small_grad) {
      res.converged = true;
      res.message = "converged";
      ++res.iterations;
      break;
    }
    // Numerical gradients have a noise floor; at it the objective stops moving.
    const bool no_progress = std::abs(f_old - res.f) <= opt.stall_ftol * std::max(1.0, std::abs(res.f));
    flat = no_progress ? flat + 1 : 0;
    if (flat >= opt.stall_iterations) {
      res.converged = g.lpNorm<Eigen::Infinity>() <= opt.stall_gtol_factor * opt.gtol;
      res.message = "objective stationary";
      ++res.iterations;
      break;
    }

    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (fresh) {
        H *= sy / yv.squaredNorm();
        fresh = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd Hy = H * yv;
      const double yHy = yv.dot(Hy);
      H += ((1.0 + rho * yHy) * rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
    }
  }
  if (res.message.empty()) res.message = "iteration limit reached";
  res.gradient = g;
  return res;
}

Hessian numerical_hessian(const Objective& f, const Eigen::VectorXd& x, double rel_step) {
  const Eigen::Index d = x.size();
  Eigen::MatrixXd H(d, d);
  Eigen::VectorXd xp = x;
  constexpr double inner_step = 1e-5;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const Eigen::VectorXd gp = numerical_gradient(f, xp, f(xp), inner_step);
    xp[i] = x[i] - h;
    const Eigen::VectorXd gm = numerical_gradient(f, xp, f(xp), inner_step);
    xp[i] = x[i];
    H.col(i) = (gp - gm) / (2.0 * h);
  }
  Hessian out;
  // Asymmetry measured on the correlation scale sqrt(|H_ii H_jj|).
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double scale = std::sqrt(std::abs(H(i, i) * H(j, j)));
      if (!(scale > 0)) continue;
      out.max_asymmetry = std::max(out.max_asymmetry, std::abs(H(i, j) - H(j, i)) / scale);
    }
  out.matrix = 0.5 * (H + H.transpose());
  return out;
}

}  // namespace spglm::optim
