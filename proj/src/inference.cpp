#include "spglm/inference.hpp"

#include "parallel.hpp"
#include "spglm/simulation.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace spglm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_null(const MeanModelSpec& spec, std::size_t target, double null_value, bool has_aux) {
  const std::size_t m = spec.mean_param_count();
  if (target >= m + (has_aux ? 1 : 0)) throw InputError("LRT parameter index out of range");
  if (!std::isfinite(null_value)) throw InputError("LRT null value must be finite");
  bool inside = false;
  if (target < spec.q) {
    inside = std::abs(null_value) < spec.bounds.beta_abs;
  } else if (target < m) {
    inside = std::abs(null_value) < spec.bounds.arma_abs;
  } else {
    inside = null_value > spec.bounds.alpha_lo && null_value < spec.bounds.alpha_hi;
  }
  if (!inside) throw InputError("LRT null value lies on or outside the parameter-space boundary");
}

ModelParams with_value(const MeanModelSpec& spec, const ModelParams& p, std::size_t index, double value) {
  std::vector<double> v = p.flatten();
  v[index] = value;
  return ModelParams::unflatten(spec, v, p.aux.has_value());
}

// Random perturbation of the mean parameters, kept inside the bounds.
ModelParams perturbed(const MeanModelSpec& spec, const ModelParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<double> v = p.flatten();
  for (std::size_t i = 0; i < spec.mean_param_count(); ++i) {
    const double lim = i < spec.q ? spec.bounds.beta_abs : spec.bounds.arma_abs;
    v[i] = std::clamp(v[i] + noise(rng), -0.95 * lim, 0.95 * lim);
  }
  return ModelParams::unflatten(spec, v, p.aux.has_value());
}

}  // namespace

const char* to_string(FitMethod m) noexcept {
  switch (m) {
    case FitMethod::Poisson: return "poisson";
    case FitMethod::NegBin: return "negbin";
    case FitMethod::Semiparametric: return "semiparametric";
  }
  return "unknown";
}

FitMethod parse_fit_method(const std::string& name) {
  if (name == "poisson") return FitMethod::Poisson;
  if (name == "negbin") return FitMethod::NegBin;
  if (name == "semiparametric") return FitMethod::Semiparametric;
  throw InputError("unknown method '" + name + "' (expected poisson, negbin or semiparametric)");
}

LrtResult lrt_from_logliks(double loglik_full, double loglik_null, double estimate, double null_value, double level,
                           double neg_tol) {
  if (!(level > 0 && level < 1)) throw InputError("LRT level must lie in (0, 1)");
  LrtResult r;
  r.estimate = estimate;
  r.null_value = null_value;
  r.level = level;
  double stat = 2.0 * (loglik_full - loglik_null);
  if (!std::isfinite(stat)) throw ConvergenceError("LRT statistic is not finite");
  if (stat < -neg_tol) throw ConvergenceError("negative LRT statistic " + std::to_string(stat));
  if (stat < 0) {
    stat = 0.0;
    r.clamped = true;
  }
  r.lrt_stat = stat;
  const boost::math::chi_squared chi2(1.0);
  r.pvalue = stat == 0 ? 1.0 : boost::math::cdf(boost::math::complement(chi2, stat));
  if (stat == 0) {
    r.se_eq = kInf;
    r.ci_lo = -kInf;
    r.ci_hi = kInf;
    return r;
  }
  r.se_eq = std::abs(estimate - null_value) / std::sqrt(stat);
  const double z = boost::math::quantile(boost::math::complement(boost::math::normal(), level / 2));
  r.ci_lo = estimate - z * r.se_eq;
  r.ci_hi = estimate + z * r.se_eq;
  return r;
}

LrtResult lrt_single(const TimeSeries& ts, const MeanModelSpec& spec, const SemiparametricFitResult& full,
                     std::size_t target, double null_value, const LrtOptions& opt) {
  check_null(spec, target, null_value, false);
  MeleOptions mo = opt.mele;
  mo.frozen = {{target, null_value}};
  mo.start = with_value(spec, full.params, target, null_value);
  mo.start_dist = full.dist;
  SemiparametricFitResult con = fit_semiparametric(ts, spec, mo);
  if (!con.converged) throw ConvergenceError("constrained semiparametric refit did not converge: " + con.message);

  double l_full = full.loglik;
  double estimate = full.params.flatten()[target];
  bool restarted = false;
  if (2.0 * (l_full - con.loglik) < -opt.neg_tol) {
    restarted = true;
    // The constrained optimum is a feasible start for the unconstrained fit.
    MeleOptions mf = opt.mele;
    mf.frozen.clear();
    mf.start = con.params;
    mf.start_dist = con.dist;
    const SemiparametricFitResult refit = fit_semiparametric(ts, spec, mf);
    if (refit.loglik > l_full) {
      l_full = refit.loglik;
      estimate = refit.params.flatten()[target];
    }
    mo.start = with_value(spec, perturbed(spec, full.params, opt.restart_seed), target, null_value);
    mo.start_dist.reset();
    try {
      SemiparametricFitResult con2 = fit_semiparametric(ts, spec, mo);
      if (con2.converged && con2.loglik > con.loglik) con = std::move(con2);
    } catch (const Error&) {
    }
  }
  LrtResult r = lrt_from_logliks(l_full, con.loglik, estimate, null_value, opt.level, opt.neg_tol);
  r.restarted = restarted;
  const auto& masses = con.dist.masses();
  r.p_floor_hit = *std::min_element(masses.begin(), masses.end()) < 1e3 * kMassFloor;
  return r;
}

LrtResult lrt_single(const TimeSeries& ts, const MeanModelSpec& spec, const ParametricFitResult& full,
                     std::size_t target, double null_value, const LrtOptions& opt) {
  const bool nb = full.family == Family::NegBin;
  check_null(spec, target, null_value, nb);
  ParametricOptions po = opt.parametric;
  po.compute_se = false;
  po.frozen = {{target, null_value}};
  po.start = with_value(spec, full.params, target, null_value);
  ParametricFitResult con = fit_parametric(full.family, ts, spec, po);
  if (!con.converged && !con.poisson_limit_boundary)
    throw ConvergenceError("constrained refit did not converge: " + con.message);

  double l_full = full.loglik;
  double estimate = full.params.flatten()[target];
  bool restarted = false;
  if (2.0 * (l_full - con.loglik) < -opt.neg_tol) {
    restarted = true;
    ParametricOptions pf = opt.parametric;
    pf.compute_se = false;
    pf.frozen.clear();
    pf.start = con.params;
    const ParametricFitResult refit = fit_parametric(full.family, ts, spec, pf);
    if (refit.loglik > l_full) {
      l_full = refit.loglik;
      estimate = refit.params.flatten()[target];
    }
    po.start = with_value(spec, perturbed(spec, full.params, opt.restart_seed), target, null_value);
    try {
      const ParametricFitResult con2 = fit_parametric(full.family, ts, spec, po);
      if (con2.loglik > con.loglik) con = con2;
    } catch (const Error&) {
    }
  }
  LrtResult r = lrt_from_logliks(l_full, con.loglik, estimate, null_value, opt.level, opt.neg_tol);
  r.restarted = restarted;
  return r;
}

std::vector<LrtResult> lrt_all(const TimeSeries& ts, const MeanModelSpec& spec, const SemiparametricFitResult& full,
                               const LrtOptions& opt) {
  std::vector<LrtResult> out;
  for (std::size_t i = 0; i < spec.mean_param_count(); ++i) out.push_back(lrt_single(ts, spec, full, i, 0.0, opt));
  return out;
}

std::vector<LrtResult> lrt_all(const TimeSeries& ts, const MeanModelSpec& spec, const ParametricFitResult& full,
                               const LrtOptions& opt) {
  std::vector<LrtResult> out;
  for (std::size_t i = 0; i < spec.mean_param_count(); ++i) out.push_back(lrt_single(ts, spec, full, i, 0.0, opt));
  return out;
}

Type1Result type1_error_study(const SimSpec& sim, std::size_t target, const std::vector<double>& nominal_levels,
                              std::size_t reps, std::uint64_t seed, const Type1Options& opt) {
  if (reps < 100) throw InputError("type-I error study needs at least 100 replications");
  sim.validate();
  for (double a : nominal_levels)
    if (!(a > 0 && a <= 1)) throw InputError("nominal levels must lie in (0, 1]");
  const MeanModelSpec spec = fitting_spec(sim.model);
  if (target >= spec.mean_param_count()) throw InputError("tested parameter index out of range");
  if (sim.true_params.flatten()[target] != 0.0) throw InputError("tested coefficient must be zero in the truth");

  Type1Result res;
  res.levels = nominal_levels;
  res.reps = reps;
  res.pvalues.assign(reps, kNaN);
  detail::parallel_for(reps, opt.threads, [&](std::size_t r) {
    try {
      SimSpec s = sim;
      s.seed = replication_seed(seed, r);
      const TimeSeries ts = simulate(s);
      LrtResult lr;
      if (opt.method == FitMethod::Semiparametric) {
        const SemiparametricFitResult fit = fit_semiparametric(ts, spec, opt.lrt.mele);
        if (!fit.converged) return;
        lr = lrt_single(ts, spec, fit, target, 0.0, opt.lrt);
      } else {
        ParametricOptions po = opt.lrt.parametric;
        po.compute_se = false;
        const ParametricFitResult fit =
            fit_parametric(opt.method == FitMethod::NegBin ? Family::NegBin : Family::Poisson, ts, spec, po);
        if (!fit.converged) return;
        lr = lrt_single(ts, spec, fit, target, 0.0, opt.lrt);
      }
      res.pvalues[r] = lr.pvalue;
    } catch (const Error&) {
    }
  });

  std::size_t ok = 0;
  for (double p : res.pvalues)
    if (std::isnan(p)) ++res.failures; else ++ok;
  res.failure_flag = static_cast<double>(res.failures) > 0.02 * static_cast<double>(reps);
  for (double a : nominal_levels) {
    std::size_t rejected = 0;
    for (double p : res.pvalues)
      if (!std::isnan(p) && (a >= 1.0 || p <= a)) ++rejected;
    const double rate = ok ? static_cast<double>(rejected) / static_cast<double>(ok) : kNaN;
    res.rejection_rates.push_back(rate);
    res.mc_se.push_back(ok ? std::sqrt(rate * (1 - rate) / static_cast<double>(ok)) : kNaN);
  }
  return res;
}

}  // namespace spglm
