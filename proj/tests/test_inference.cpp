#include "support.hpp"

#include "spglm/inference.hpp"
#include "spglm/simulation.hpp"

#include <doctest.h>

#include <cmath>

using namespace spglm;

TEST_CASE("equivalent standard error from the defining identity") {
  const LrtResult r = lrt_from_logliks(-100.0, -100.0 - 3.8416 / 2, 0.196, 0.0);
  CHECK(r.lrt_stat == doctest::Approx(3.8416).epsilon(1e-12));
  CHECK(r.se_eq == doctest::Approx(0.100).epsilon(1e-4));
  CHECK(r.ci_lo == doctest::Approx(0.0).epsilon(1e-3));
  CHECK(std::abs(r.ci_lo) < 1e-3);
  CHECK(r.ci_hi == doctest::Approx(0.392).epsilon(1e-3));
  CHECK(r.pvalue == doctest::Approx(0.05).epsilon(1e-4));
  CHECK(std::pow((r.estimate - r.null_value) / r.se_eq, 2) == doctest::Approx(r.lrt_stat));
}

TEST_CASE("interval width scales with the normal quantile") {
  const LrtResult a = lrt_from_logliks(0.0, -2.0, 0.5, 0.0, 0.05);
  const LrtResult b = lrt_from_logliks(0.0, -2.0, 0.5, 0.0, 0.10);
  CHECK(a.se_eq == doctest::Approx(b.se_eq));
  CHECK((a.ci_hi - a.ci_lo) / (b.ci_hi - b.ci_lo) == doctest::Approx(1.959963985 / 1.644853627).epsilon(1e-8));
  CHECK(a.ci_lo < a.estimate);
  CHECK(a.estimate < a.ci_hi);
}

TEST_CASE("small negative statistics are clamped, large ones are errors") {
  const LrtResult r = lrt_from_logliks(-10.0, -10.0 + 2e-7, 0.0, 0.0);
  CHECK(r.clamped);
  CHECK(r.lrt_stat == 0.0);
  CHECK(r.pvalue == 1.0);
  CHECK(std::isinf(r.se_eq));
  CHECK(std::isinf(r.ci_lo));
  CHECK(std::isinf(r.ci_hi));
  CHECK_THROWS_AS(lrt_from_logliks(-10.0, -9.99, 0.1, 0.0), ConvergenceError);
}

TEST_CASE("null values on the boundary are rejected") {
  const TimeSeries ts = test::polio();
  const MeanModelSpec spec = test::polio_spec();
  const ParametricFitResult fit = fit_poisson(ts, spec);
  CHECK_THROWS_AS(lrt_single(ts, spec, fit, 6, 0.99), InputError);
  CHECK_THROWS_AS(lrt_single(ts, spec, fit, 6, -1.0), InputError);
  CHECK_THROWS_AS(lrt_single(ts, spec, fit, 0, 50.0), InputError);
  CHECK_THROWS_AS(lrt_single(ts, spec, fit, 9, 0.0), InputError);
}

TEST_CASE("LRT with the target already at the null is zero") {
  const TimeSeries ts = test::polio();
  const MeanModelSpec spec = test::polio_spec();
  ParametricOptions opt;
  opt.frozen = {{8, 0.0}};
  ParametricFitResult fit = fit_poisson(ts, spec, opt);
  const LrtResult r = lrt_single(ts, spec, fit, 8, 0.0);
  CHECK(r.lrt_stat < 1e-6);
  CHECK(r.pvalue > 0.99);
}

TEST_CASE("Poisson se_eq and Hessian se agree near the estimate") {
  const SimSpec sim = default_sim_spec(SimModel::M2, 400, 31);
  const TimeSeries ts = simulate(sim);
  const MeanModelSpec spec = fitting_spec(SimModel::M2);
  const ParametricFitResult fit = fit_poisson(ts, spec);
  REQUIRE(fit.converged);
  // Within two standard errors the profile is close to quadratic; far from
  // the estimate (psi here has z near 10) it is not.
  const std::vector<double> est = fit.params.flatten();
  for (std::size_t i = 0; i < est.size(); ++i) {
    INFO("parameter " << i);
    const LrtResult r = lrt_single(ts, spec, fit, i, est[i] - 2.0 * fit.se[i]);
    CHECK(std::abs(r.se_eq / fit.se[i] - 1.0) < 0.1);
  }
}

TEST_CASE("semiparametric LRT statistic does not depend on the gauge") {
  const SimSpec sim = default_sim_spec(SimModel::M1p, 120, 8);
  const TimeSeries ts = simulate(sim);
  const MeanModelSpec spec = fitting_spec(SimModel::M1p);
  const SemiparametricFitResult full = fit_semiparametric(ts, spec);
  MeleOptions con_opt;
  con_opt.frozen = {{1, 0.0}};
  const SemiparametricFitResult con = fit_semiparametric(ts, spec, con_opt);
  const double stat = 2 * (full.loglik - con.loglik);
  const LrtResult r = lrt_single(ts, spec, full, 1, 0.0);
  CHECK(r.lrt_stat == doctest::Approx(stat).epsilon(1e-5));
  for (double c : {-1.5, 0.8}) {
    const double shifted = 2 * (loglik_at(ts, spec, full.params, full.dist.tilted(c)) -
                                loglik_at(ts, spec, con.params, con.dist.tilted(c)));
    CHECK(std::abs(shifted - stat) < 1e-8);
  }
  MeleOptions pen;
  pen.gauge = Gauge::Penalty;
  const SemiparametricFitResult full_pen = fit_semiparametric(ts, spec, pen);
  pen.frozen = con_opt.frozen;
  const SemiparametricFitResult con_pen = fit_semiparametric(ts, spec, pen);
  CHECK(std::abs(2 * (full_pen.loglik - con_pen.loglik) - stat) < 1e-3);
}

TEST_CASE("type-I error study bookkeeping") {
  SimSpec sim = default_sim_spec(SimModel::M1p, 150, 0);
  Type1Options opt;
  opt.method = FitMethod::Poisson;
  const Type1Result r = type1_error_study(sim, 1, {0.05, 1.0}, 100, 77, opt);
  CHECK(r.reps == 100);
  CHECK(r.rejection_rates.size() == 2);
  CHECK(r.rejection_rates[1] == 1.0);
  CHECK(r.rejection_rates[0] >= 0.0);
  CHECK(r.rejection_rates[0] <= 0.15);
  CHECK(r.mc_se[0] == doctest::Approx(std::sqrt(r.rejection_rates[0] * (1 - r.rejection_rates[0]) /
                                                static_cast<double>(r.reps - r.failures))));
  CHECK_THROWS_AS(type1_error_study(sim, 1, {0.05}, 50, 1, opt), InputError);
  CHECK_THROWS_AS(type1_error_study(sim, 0, {0.05}, 100, 1, opt), InputError);

  const Type1Result again = type1_error_study(sim, 1, {0.05, 1.0}, 100, 77, opt);
  CHECK(again.rejection_rates == r.rejection_rates);
}
