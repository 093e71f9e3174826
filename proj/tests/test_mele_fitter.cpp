#include "support.hpp"

#include "spglm/glarma_engine.hpp"
#include "spglm/mele_fitter.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace spglm;

namespace {

// Empirical log-likelihood by direct summation over observations, with theta
// found by bisection on the tilted mean.
double oracle_loglik(const TimeSeries& ts, const MeanModelSpec& spec, const ModelParams& p,
                     const AtomicDistribution& dist) {
  const FittedState st = semiparametric_state(ts, spec, p, dist);
  double l = 0.0;
  for (std::size_t t = 0; t < ts.y.size(); ++t) {
    const double mu = st.mu[t];
    double lo = -50, hi = 50;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (tilted_moments(dist, mid).mean < mu ? lo : hi) = mid;
    }
    const double theta = 0.5 * (lo + hi);
    double s = 0.0;
    for (std::size_t j = 0; j < dist.size(); ++j) s += dist.masses()[j] * std::exp(theta * dist.atoms()[j]);
    l += std::log(dist.masses()[t]) - std::log(s) + theta * ts.y[t];
  }
  return l;
}

}  // namespace

TEST_CASE("loglik_at agrees with direct summation") {
  const TimeSeries ts = test::polio();
  const MeanModelSpec spec = test::polio_spec();
  ModelParams p;
  p.beta = {0.1, -3.0, -0.1, -0.5, 0.2, -0.4};
  p.psi = {0.2, 0.1, 0.05};
  std::mt19937_64 rng(2);
  std::vector<double> w(ts.y.size());
  for (double& v : w) v = std::uniform_real_distribution<double>(0.5, 1.5)(rng);
  const AtomicDistribution dist = AtomicDistribution::from_weights(ts.y, w);
  CHECK(loglik_at(ts, spec, p, dist) == doctest::Approx(oracle_loglik(ts, spec, p, dist)).epsilon(1e-9));
}

TEST_CASE("loglik_at is invariant under tilting the base distribution") {
  const TimeSeries ts = test::polio();
  const MeanModelSpec spec = test::polio_spec();
  ModelParams p;
  p.beta = {0.15, -4.0, -0.1, -0.5, 0.3, -0.3};
  p.psi = {0.3, 0.2, 0.0};
  const AtomicDistribution dist = AtomicDistribution::uniform(ts.y);
  const double l0 = loglik_at(ts, spec, p, dist);
  for (double c : {-1.0, -0.7, 0.4, 1.0}) CHECK(std::abs(loglik_at(ts, spec, p, dist.tilted(c)) - l0) < 1e-9);
  // Counts reach 14, so a shift of 2 pushes masses below the floor.
  CHECK_THROWS_AS(dist.tilted(2.0), InputError);
}

TEST_CASE("intercept-only MELE attains the unconstrained empirical likelihood bound") {
  // With only an intercept the model is iid from F, so the maximum over p is
  // the empirical distribution and the maximized value is -(n+1) log(n+1).
  std::vector<double> y;
  for (int i = 0; i < 40; ++i) y.push_back((i * 7) % 11);
  const TimeSeries ts = test::intercept_series(y);
  const SemiparametricFitResult fit = fit_semiparametric(ts, MeanModelSpec{});
  const double N = static_cast<double>(y.size());
  CHECK(fit.converged);
  CHECK(fit.loglik == doctest::Approx(-N * std::log(N)).epsilon(1e-7));
  double ybar = 0.0;
  for (double v : y) ybar += v / N;
  CHECK(std::exp(fit.params.beta[0]) == doctest::Approx(ybar).epsilon(1e-4));
  for (double m : fit.dist.masses()) CHECK(m == doctest::Approx(1.0 / N).epsilon(1e-3));
}

TEST_CASE("fit result respects the gauge and the constraints") {
  const TimeSeries ts = test::polio();
  const MeanModelSpec spec = test::polio_spec();
  const SemiparametricFitResult fit = fit_semiparametric(ts, spec);
  CHECK(fit.converged);
  CHECK(fit.state.theta[0] == 0.0);
  CHECK(fit.state.b[0] == 0.0);
  CHECK(fit.gauge_residual < 1e-8);
  CHECK(fit.loglik > fit.start_loglik);
  CHECK(loglik_at(ts, spec, fit.params, fit.dist) == doctest::Approx(fit.loglik).epsilon(1e-9));
  double s = 0.0;
  for (double m : fit.dist.masses()) s += m;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t t = 0; t < ts.y.size(); ++t) {
    const TiltMoments m = tilted_moments(fit.dist, fit.state.theta[t]);
    CHECK(m.mean == doctest::Approx(fit.state.mu[t]).epsilon(1e-8));
  }
  // Ties share their mass equally.
  for (std::size_t j = 1; j < ts.y.size(); ++j)
    if (ts.y[j] == ts.y[0]) CHECK(fit.dist.masses()[j] == doctest::Approx(fit.dist.masses()[0]).epsilon(1e-12));
}

TEST_CASE("frozen coefficients and degenerate data") {
  const TimeSeries ts = test::polio();
  const MeanModelSpec spec = test::polio_spec();
  MeleOptions opt;
  opt.frozen = {{8, 0.0}};
  const SemiparametricFitResult fit = fit_semiparametric(ts, spec, opt);
  CHECK(fit.params.psi[2] == 0.0);

  CHECK_THROWS_AS(fit_semiparametric(test::intercept_series({2, 2, 2, 2}), MeanModelSpec{}), DegenerateSupport);
}

TEST_CASE("step cdf of the fitted base distribution") {
  const AtomicDistribution d({0, 2, 2, 5}, {0.1, 0.2, 0.3, 0.4});
  const StepCdf F(d);
  CHECK(F(-1) == 0.0);
  CHECK(F(0) == doctest::Approx(0.1));
  CHECK(F(1.9) == doctest::Approx(0.1));
  CHECK(F(2) == doctest::Approx(0.6));
  CHECK(F(5) == doctest::Approx(1.0));
  CHECK(F.values() == std::vector<double>{0, 2, 5});
}
