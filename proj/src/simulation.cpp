#include "spglm/simulation.hpp"

#include "parallel.hpp"
#include "spglm/glarma_engine.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <random>

namespace spglm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::size_t design_columns(SimModel m) {
  switch (m) {
    case SimModel::M1:
    case SimModel::M1pp: return 1;
    case SimModel::M1p:
    case SimModel::M2: return 2;
    case SimModel::M3: return 4;
  }
  return 1;
}

bool is_negbin(SimModel m) { return m == SimModel::M3; }

double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? kNaN : s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return kNaN;
  const double m = sample_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

const char* to_string(SimModel m) noexcept {
  switch (m) {
    case SimModel::M1: return "M1";
    case SimModel::M1p: return "M1p";
    case SimModel::M1pp: return "M1pp";
    case SimModel::M2: return "M2";
    case SimModel::M3: return "M3";
  }
  return "unknown";
}

SimModel parse_sim_model(const std::string& name) {
  if (name == "M1" || name == "1") return SimModel::M1;
  if (name == "M1p" || name == "M1'") return SimModel::M1p;
  if (name == "M1pp" || name == "M1''") return SimModel::M1pp;
  if (name == "M2" || name == "2") return SimModel::M2;
  if (name == "M3" || name == "3") return SimModel::M3;
  throw InputError("unknown simulation model '" + name + "' (expected M1, M1p, M1pp, M2 or M3)");
}

MeanModelSpec fitting_spec(SimModel model) {
  MeanModelSpec spec;
  spec.q = design_columns(model);
  switch (model) {
    case SimModel::M1:
    case SimModel::M1p:
    case SimModel::M2: spec.ma_lags = {1}; break;
    case SimModel::M1pp: spec.ma_lags = {1, 2}; break;
    case SimModel::M3: spec.ar_lags = {1}; break;
  }
  return spec;
}

std::vector<std::string> design_labels(SimModel model) {
  switch (model) {
    case SimModel::M1:
    case SimModel::M1pp: return {"Intercept"};
    case SimModel::M1p:
    case SimModel::M2: return {"Intercept", "Trend"};
    case SimModel::M3: return {"Intercept", "Trend", "Cos6", "Sin6"};
  }
  return {};
}

Eigen::MatrixXd model_design(SimModel model, long t_first, std::size_t rows, std::size_t n) {
  const std::size_t q = design_columns(model);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(q));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    const double t = static_cast<double>(t_first + static_cast<long>(r));
    x(i, 0) = 1.0;
    if (q >= 2) x(i, 1) = t / static_cast<double>(n);
    if (q >= 4) {
      x(i, 2) = std::cos(2.0 * std::numbers::pi * t / 6.0);
      x(i, 3) = std::sin(2.0 * std::numbers::pi * t / 6.0);
    }
  }
  return x;
}

void SimSpec::validate() const {
  if (n < 1) throw InputError("simulation length n must be at least 1");
  const MeanModelSpec spec = fitting_spec(model);
  true_params.validate(spec);
  if (is_negbin(model) && !(true_params.aux && *true_params.aux > 0))
    throw InputError("model M3 needs a positive dispersion alpha");
}

SimSpec default_sim_spec(SimModel model, std::size_t n, std::uint64_t seed) {
  SimSpec s;
  s.model = model;
  s.n = n;
  s.seed = seed;
  switch (model) {
    case SimModel::M1: s.true_params.beta = {0.5}; s.true_params.psi = {0.3}; break;
    case SimModel::M1p: s.true_params.beta = {0.5, 0.0}; s.true_params.psi = {0.3}; break;
    case SimModel::M1pp: s.true_params.beta = {0.5}; s.true_params.psi = {0.3, 0.0}; break;
    case SimModel::M2: s.true_params.beta = {0.5, 1.0}; s.true_params.psi = {0.3}; break;
    case SimModel::M3:
      s.true_params.beta = {0.1, 0.2, 0.3, 0.4};
      s.true_params.phi = {0.25};
      s.true_params.aux = 4.0;
      break;
  }
  return s;
}

std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t rep) noexcept {
  return splitmix64(splitmix64(seed) ^ (rep + 1) * 0xD1B54A32D192ED03ULL);
}

SimulatedSeries simulate_with_state(const SimSpec& s) {
  s.validate();
  const MeanModelSpec spec = fitting_spec(s.model);
  const std::size_t rows = s.burn_in + s.n;
  const long t_first = 1 - static_cast<long>(s.burn_in);

  SimulatedSeries out;
  out.full.x = model_design(s.model, t_first, rows, s.n);
  out.full.labels = design_labels(s.model);
  out.full.y.assign(rows, 0.0);

  std::mt19937_64 rng(splitmix64(s.seed));
  const bool nb = is_negbin(s.model);
  const double alpha = nb ? *s.true_params.aux : 0.0;
  auto draw = [&](std::size_t t, double mu, double) {
    double rate = mu;
    if (nb) rate = std::gamma_distribution<double>(alpha, mu / alpha)(rng);
    const double y = rate > 0 ? static_cast<double>(std::poisson_distribution<long long>(rate)(rng)) : 0.0;
    out.full.y[t] = y;
    return y;
  };
  try {
    if (nb) {
      out.generator = run_recursion(out.full.x, spec, s.true_params, NegBinVariance{alpha}, draw);
    } else {
      out.generator = run_recursion(out.full.x, spec, s.true_params, PoissonVariance{}, draw);
    }
  } catch (const StateExplosion& e) {
    throw StateExplosion(e.time(), e.state(), "seed " + std::to_string(s.seed));
  }

  out.series.labels = out.full.labels;
  out.series.y.assign(out.full.y.begin() + static_cast<long>(s.burn_in), out.full.y.end());
  out.series.x = out.full.x.bottomRows(static_cast<Eigen::Index>(s.n));
  return out;
}

TimeSeries simulate(const SimSpec& spec) { return simulate_with_state(spec).series; }

unsigned default_thread_count() {
  if (const char* env = std::getenv("SPGLM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 1024) return static_cast<unsigned>(v);
  }
  return 1;
}

ExperimentResult run_experiment(const SimSpec& base, std::size_t reps, const std::vector<FitMethod>& methods,
                                std::uint64_t seed, const ExperimentOptions& opt) {
  if (reps < 10) throw InputError("an experiment needs at least 10 replications");
  if (methods.empty()) throw InputError("no fitting methods requested");
  base.validate();
  const MeanModelSpec spec = fitting_spec(base.model);
  const std::size_t m = spec.mean_param_count();

  ExperimentResult res;
  res.parameter_names = parameter_names(spec, design_labels(base.model), false);
  const std::vector<double> truth_all = base.true_params.flatten();
  res.truth.assign(truth_all.begin(), truth_all.begin() + static_cast<long>(m));
  const std::size_t M = methods.size();
  res.estimates.assign(M, std::vector<std::vector<double>>(reps, std::vector<double>(m, kNaN)));
  res.standard_errors = res.estimates;
  // Interval bounds per method, rep, parameter.
  auto lo = res.estimates, hi = res.estimates;

  std::vector<bool> want_lrt(m, opt.lrt_params.empty());
  for (std::size_t i : opt.lrt_params)
    if (i < m) want_lrt[i] = true;
  const double z = boost::math::quantile(boost::math::complement(boost::math::normal(), opt.level / 2));

  detail::parallel_for(reps, opt.threads, [&](std::size_t r) {
    SimSpec s = base;
    s.seed = replication_seed(seed, r);
    TimeSeries ts;
    try {
      ts = simulate(s);
    } catch (const Error&) {
      return;
    }
    for (std::size_t k = 0; k < M; ++k) {
      try {
        std::vector<double> est, se(m, kNaN), l(m, kNaN), h(m, kNaN);
        if (methods[k] == FitMethod::Semiparametric) {
          const SemiparametricFitResult fit = fit_semiparametric(ts, spec);
          if (!fit.converged) continue;
          est = fit.params.flatten();
          if (opt.intervals) {
            LrtOptions lo_opt;
            lo_opt.level = opt.level;
            for (std::size_t i = 0; i < m; ++i) {
              if (!want_lrt[i]) continue;
              const LrtResult lr = lrt_single(ts, spec, fit, i, 0.0, lo_opt);
              se[i] = lr.se_eq;
              l[i] = lr.ci_lo;
              h[i] = lr.ci_hi;
            }
          }
        } else {
          ParametricOptions po;
          po.compute_se = opt.intervals;
          const ParametricFitResult fit =
              fit_parametric(methods[k] == FitMethod::NegBin ? Family::NegBin : Family::Poisson, ts, spec, po);
          if (!fit.converged) continue;
          est = fit.params.flatten();
          if (opt.intervals) {
            for (std::size_t i = 0; i < m; ++i) {
              se[i] = fit.se[i];
              l[i] = est[i] - z * se[i];
              h[i] = est[i] + z * se[i];
            }
          }
        }
        est.resize(m);
        res.estimates[k][r] = est;
        res.standard_errors[k][r] = se;
        lo[k][r] = l;
        hi[k][r] = h;
      } catch (const Error&) {
      }
    }
  });

  for (std::size_t k = 0; k < M; ++k) {
    CoverageReport rep;
    rep.method = methods[k];
    rep.reps = reps;
    for (std::size_t r = 0; r < reps; ++r)
      if (std::isnan(res.estimates[k][r][0])) ++rep.failures;
    rep.failure_flag = static_cast<double>(rep.failures) > 0.05 * static_cast<double>(reps);
    for (std::size_t i = 0; i < m; ++i) {
      CoverageRow row;
      row.parameter = res.parameter_names[i];
      row.truth = res.truth[i];
      row.rep_count = reps;
      row.failure_count = rep.failures;
      std::vector<double> ests, ses;
      std::size_t covered = 0, with_ci = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        const double e = res.estimates[k][r][i];
        if (std::isnan(e)) continue;
        ests.push_back(e);
        const double s = res.standard_errors[k][r][i];
        if (std::isfinite(s)) ses.push_back(s);
        const double a = lo[k][r][i], b = hi[k][r][i];
        if (std::isnan(a) || std::isnan(b)) continue;
        ++with_ci;
        if (a <= row.truth && row.truth <= b) ++covered;
      }
      row.mean_estimate = sample_mean(ests);
      row.se_emp = sample_sd(ests);
      row.se_bar = sample_mean(ses);
      row.coverage = with_ci ? static_cast<double>(covered) / static_cast<double>(with_ci) : kNaN;
      rep.rows.push_back(row);
    }
    res.reports.push_back(std::move(rep));
  }
  return res;
}

}  // namespace spglm
