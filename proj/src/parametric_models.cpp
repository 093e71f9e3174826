#include "spglm/parametric_models.hpp"

#include "param_map.hpp"
#include "spglm/glarma_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spglm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double poisson_sum(const TimeSeries& ts, const FittedState& st) {
  double l = 0.0;
  for (std::size_t t = 0; t < ts.y.size(); ++t) l += ts.y[t] * st.W[t] - st.mu[t] - std::lgamma(ts.y[t] + 1.0);
  return l;
}

double negbin_sum(const TimeSeries& ts, const FittedState& st, double alpha) {
  const double lga = std::lgamma(alpha);
  double l = 0.0;
  for (std::size_t t = 0; t < ts.y.size(); ++t) {
    const double y = ts.y[t], mu = st.mu[t];
    const double log_a_mu = std::log(alpha + mu);
    l += std::lgamma(y + alpha) - lga - std::lgamma(y + 1.0) - alpha * std::log1p(mu / alpha) +
         y * (st.W[t] - log_a_mu);
  }
  return l;
}

}  // namespace

double poisson_loglik(const TimeSeries& ts, const MeanModelSpec& spec, const ModelParams& params) {
  return poisson_sum(ts, recurse(ts, spec, params, PoissonVariance{}));
}

double negbin_loglik(const TimeSeries& ts, const MeanModelSpec& spec, const ModelParams& params) {
  if (!params.aux || !(*params.aux > 0)) throw InputError("negative-binomial loglik requires alpha > 0");
  return negbin_sum(ts, recurse(ts, spec, params, NegBinVariance{*params.aux}), *params.aux);
}

std::vector<double> irls_poisson(const TimeSeries& ts, int max_iterations) {
  const Eigen::Index n = ts.x.rows(), q = ts.x.cols();
  const Eigen::Map<const Eigen::VectorXd> y(ts.y.data(), n);
  Eigen::VectorXd mu = (y.array() + 0.1).matrix();
  Eigen::VectorXd eta = mu.array().log().matrix();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd z = eta + ((y - mu).array() / mu.array()).matrix();
    const Eigen::MatrixXd XtW = ts.x.transpose() * mu.asDiagonal();
    const Eigen::VectorXd next = (XtW * ts.x).ldlt().solve(XtW * z);
    if (!next.allFinite()) break;
    const double change = (next - beta).lpNorm<Eigen::Infinity>();
    beta = next;
    eta = ts.x * beta;
    eta = eta.cwiseMax(-kStateGuard).cwiseMin(kStateGuard);
    mu = eta.array().exp().matrix();
    if (change < 1e-10) break;
  }
  return {beta.data(), beta.data() + beta.size()};
}

ParametricFitResult fit_parametric(Family family, const TimeSeries& ts, const MeanModelSpec& spec,
                                   const ParametricOptions& opt) {
  spec.validate();
  const bool nb = family == Family::NegBin;
  const std::size_t m = spec.mean_param_count();
  const std::size_t dim = m + (nb ? 1 : 0);

  ModelParams start;
  if (opt.start) {
    start = *opt.start;
  } else {
    start.beta = irls_poisson(ts);
    for (double& b : start.beta) b = std::clamp(b, -0.999 * spec.bounds.beta_abs, 0.999 * spec.bounds.beta_abs);
    start.phi.assign(spec.ar_lags.size(), 0.0);
    start.psi.assign(spec.ma_lags.size(), 0.0);
  }
  if (nb && !start.aux) start.aux = 10.0;
  if (!nb) start.aux.reset();

  // Optimization coordinates: flatten() with alpha replaced by log(alpha).
  std::vector<double> full = start.flatten();
  std::vector<bool> frozen(dim, false);
  for (const FrozenParam& f : opt.frozen) {
    if (f.index >= dim) throw InputError("frozen parameter index out of range");
    frozen[f.index] = true;
    full[f.index] = f.value;
  }
  if (nb) {
    if (!(full[m] > 0)) throw InputError("alpha must be positive");
    full[m] = std::log(full[m]);
  }
  const detail::ParamMap map(full, frozen);

  auto to_params = [&](const std::vector<double>& v) {
    std::vector<double> w = v;
    if (nb) w[m] = std::exp(w[m]);
    return ModelParams::unflatten(spec, w, nb);
  };
  const double log_alpha_lo = std::log(spec.bounds.alpha_lo), log_alpha_hi = std::log(spec.bounds.alpha_hi);
  auto in_bounds = [&](const std::vector<double>& v) {
    for (std::size_t i = 0; i < m; ++i) {
      if (frozen[i]) continue;
      const double lim = i < spec.q ? spec.bounds.beta_abs : spec.bounds.arma_abs;
      if (i < spec.q ? !(std::abs(v[i]) <= lim) : !(std::abs(v[i]) < lim)) return false;
    }
    if (nb && !frozen[m] && !(v[m] > log_alpha_lo && v[m] < log_alpha_hi)) return false;
    return true;
  };
  auto loglik_of = [&](const std::vector<double>& v) -> double {
    const ModelParams p = to_params(v);
    if (nb) {
      NegBinVariance vp(*p.aux);
      return negbin_sum(ts, recurse(ts, spec, p, vp), *p.aux);
    }
    return poisson_sum(ts, recurse(ts, spec, p, PoissonVariance{}));
  };
  const optim::Objective objective = [&](const Eigen::VectorXd& z) -> double {
    const std::vector<double> v = map.expand(z);
    if (!in_bounds(v)) return kInf;
    try {
      const double l = loglik_of(v);
      return std::isfinite(l) ? -l : kInf;
    } catch (const StateExplosion&) {
      return kInf;
    }
  };

  ParametricFitResult res;
  res.family = family;
  const Eigen::VectorXd z0 = map.free_part(full);
  if (!std::isfinite(objective(z0))) throw ConvergenceError("log-likelihood not finite at the starting values");
  const optim::Result opt_res = optim::minimize_bfgs(objective, z0, opt.optimizer);

  const std::vector<double> v_hat = map.expand(opt_res.x);
  res.params = to_params(v_hat);
  res.loglik = -opt_res.f;
  res.start_loglik = -objective(z0);
  res.iterations = opt_res.iterations;
  res.converged = opt_res.converged;
  res.message = opt_res.message;
  if (nb) {
    res.state = recurse(ts, spec, res.params, NegBinVariance{*res.params.aux});
    if (!frozen[m] && v_hat[m] > log_alpha_hi - 0.05) {
      res.poisson_limit_boundary = true;
      res.converged = false;
      res.message = "Poisson-limit boundary: alpha diverged to its upper bound";
    }
  } else {
    res.state = recurse(ts, spec, res.params, PoissonVariance{});
  }
  res.state.check_invariants(false);

  res.se.assign(dim, kNaN);
  res.se_expected.assign(dim, kNaN);
  const auto& free_idx = map.free_indices();
  if (opt.compute_se && !free_idx.empty()) {
    const optim::Hessian h = optim::numerical_hessian(objective, opt_res.x);
    res.hessian_asymmetry = h.max_asymmetry;
    res.conditioning_warning = h.max_asymmetry > 1e-3;
    Eigen::LLT<Eigen::MatrixXd> llt(h.matrix);
    if (llt.info() == Eigen::Success && h.matrix.allFinite()) {
      const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(h.matrix.rows(), h.matrix.cols()));
      res.se_available = true;
      for (std::size_t k = 0; k < free_idx.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        double s = cov(kk, kk) > 0 ? std::sqrt(cov(kk, kk)) : kNaN;
        if (nb && free_idx[k] == m) s *= *res.params.aux;  // delta method from log(alpha)
        res.se[free_idx[k]] = s;
        if (!(s > 0)) res.se_available = false;
      }
    }

    // Fisher-scoring information over the free mean parameters.
    std::vector<std::size_t> mean_free;
    for (std::size_t i : free_idx)
      if (i < m) mean_free.push_back(i);
    if (!mean_free.empty()) {
      const auto n = static_cast<Eigen::Index>(ts.y.size());
      Eigen::MatrixXd J(n, static_cast<Eigen::Index>(mean_free.size()));
      bool ok = true;
      for (std::size_t k = 0; k < mean_free.size() && ok; ++k) {
        const std::size_t i = mean_free[k];
        const double h = 1e-6 * std::max(1.0, std::abs(v_hat[i]));
        std::vector<double> vp = v_hat, vm = v_hat;
        vp[i] += h;
        vm[i] -= h;
        try {
          const ModelParams pp = to_params(vp), pm = to_params(vm);
          const FittedState sp = nb ? recurse(ts, spec, pp, NegBinVariance{*pp.aux})
                                    : recurse(ts, spec, pp, PoissonVariance{});
          const FittedState sm = nb ? recurse(ts, spec, pm, NegBinVariance{*pm.aux})
                                    : recurse(ts, spec, pm, PoissonVariance{});
          for (Eigen::Index t = 0; t < n; ++t)
            J(t, static_cast<Eigen::Index>(k)) = (sp.W[static_cast<std::size_t>(t)] - sm.W[static_cast<std::size_t>(t)]) / (2 * h);
        } catch (const Error&) {
          ok = false;
        }
      }
      if (ok) {
        Eigen::VectorXd w(n);
        for (Eigen::Index t = 0; t < n; ++t) {
          const auto tt = static_cast<std::size_t>(t);
          w[t] = res.state.mu[tt] * res.state.mu[tt] / res.state.var[tt];
        }
        const Eigen::MatrixXd info = J.transpose() * w.asDiagonal() * J;
        Eigen::LLT<Eigen::MatrixXd> illt(info);
        if (illt.info() == Eigen::Success) {
          const Eigen::MatrixXd icov = illt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
          for (std::size_t k = 0; k < mean_free.size(); ++k)
            res.se_expected[mean_free[k]] = std::sqrt(icov(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)));
        }
      }
    }
  }
  return res;
}

ParametricFitResult fit_poisson(const TimeSeries& ts, const MeanModelSpec& spec, const ParametricOptions& opt) {
  return fit_parametric(Family::Poisson, ts, spec, opt);
}

ParametricFitResult fit_negbin(const TimeSeries& ts, const MeanModelSpec& spec, const ParametricOptions& opt) {
  return fit_parametric(Family::NegBin, ts, spec, opt);
}

}  // namespace spglm
