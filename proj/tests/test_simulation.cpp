#include "support.hpp"

#include "spglm/glarma_engine.hpp"
#include "spglm/simulation.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace spglm;

TEST_CASE("Model 1 without feedback is iid Poisson(e^beta0)") {
  SimSpec s = default_sim_spec(SimModel::M1, 100000, 12);
  s.true_params.beta = {1.0};
  s.true_params.psi = {0.0};
  const TimeSeries ts = simulate(s);
  double mean = 0.0;
  for (double y : ts.y) mean += y;
  mean /= static_cast<double>(ts.y.size());
  const double mc_sd = std::sqrt(std::exp(1.0) / static_cast<double>(ts.y.size()));
  CHECK(std::abs(mean - std::exp(1.0)) < 3 * mc_sd);
}

TEST_CASE("Model 3 is overdispersed") {
  const TimeSeries ts = simulate(default_sim_spec(SimModel::M3, 20000, 5));
  double mean = 0.0, sq = 0.0;
  for (double y : ts.y) mean += y;
  mean /= static_cast<double>(ts.y.size());
  for (double y : ts.y) sq += (y - mean) * (y - mean);
  const double var = sq / static_cast<double>(ts.y.size() - 1);
  CHECK(var / mean > 1.2);
}

TEST_CASE("simulation is deterministic in the seed") {
  for (SimModel m : {SimModel::M1, SimModel::M2, SimModel::M3}) {
    const TimeSeries a = simulate(default_sim_spec(m, 300, 42));
    const TimeSeries b = simulate(default_sim_spec(m, 300, 42));
    const TimeSeries c = simulate(default_sim_spec(m, 300, 43));
    CHECK(a.y == b.y);
    CHECK(a.y != c.y);
  }
  CHECK(replication_seed(1, 0) != replication_seed(1, 1));
  CHECK(replication_seed(1, 0) != replication_seed(2, 0));
}

TEST_CASE("generator and fitting recursion agree exactly") {
  for (SimModel m : {SimModel::M1, SimModel::M1pp, SimModel::M2, SimModel::M3}) {
    const SimSpec s = default_sim_spec(m, 200, 9);
    const SimulatedSeries out = simulate_with_state(s);
    const MeanModelSpec spec = fitting_spec(m);
    const FittedState st = m == SimModel::M3 ? recurse(out.full, spec, s.true_params, NegBinVariance{*s.true_params.aux})
                                             : recurse(out.full, spec, s.true_params, PoissonVariance{});
    REQUIRE(st.W.size() == out.generator.W.size());
    for (std::size_t t = 0; t < st.W.size(); ++t) CHECK(st.W[t] == out.generator.W[t]);
  }
}

TEST_CASE("designs and burn-in") {
  const std::size_t n = 120;
  const SimulatedSeries m2 = simulate_with_state(default_sim_spec(SimModel::M2, n, 3));
  CHECK(m2.full.y.size() == n + 100);
  CHECK(m2.series.y.size() == n);
  CHECK(m2.series.x(0, 1) == doctest::Approx(1.0 / n));
  CHECK(m2.series.x(static_cast<Eigen::Index>(n - 1), 1) == doctest::Approx(1.0));
  CHECK(m2.full.x(0, 1) == doctest::Approx(-99.0 / n));

  const TimeSeries m3 = simulate(default_sim_spec(SimModel::M3, 12, 3));
  for (Eigen::Index i = 0; i < 12; ++i) {
    const double t = static_cast<double>(i + 1);
    CHECK(m3.x(i, 2) == doctest::Approx(std::cos(2 * std::numbers::pi * t / 6)));
    CHECK(m3.x(i, 3) == doctest::Approx(std::sin(2 * std::numbers::pi * t / 6)));
  }
  CHECK(fitting_spec(SimModel::M1pp).ma_lags == std::vector<int>{1, 2});
  CHECK(fitting_spec(SimModel::M3).ar_lags == std::vector<int>{1});
}

TEST_CASE("invalid specs and state explosion") {
  SimSpec s = default_sim_spec(SimModel::M1, 100, 1);
  s.true_params.psi = {0.3, 0.1};
  CHECK_THROWS_AS(s.validate(), InputError);
  SimSpec m3 = default_sim_spec(SimModel::M3, 100, 1);
  m3.true_params.aux.reset();
  CHECK_THROWS_AS(simulate(m3), InputError);

  SimSpec boom = default_sim_spec(SimModel::M2, 50, 77);
  boom.true_params.beta = {0.0, 35.0};
  try {
    simulate(boom);
    FAIL("expected StateExplosion");
  } catch (const StateExplosion& e) {
    CHECK(std::string(e.what()).find("seed 77") != std::string::npos);
  }
}

TEST_CASE("experiment report shape and determinism") {
  const SimSpec s = default_sim_spec(SimModel::M2, 150, 0);
  ExperimentOptions one;
  const ExperimentResult a = run_experiment(s, 10, {FitMethod::Poisson, FitMethod::Semiparametric}, 5, one);
  REQUIRE(a.reports.size() == 2);
  for (const CoverageReport& rep : a.reports) {
    CHECK(rep.rows.size() == 3);
    for (const CoverageRow& row : rep.rows) {
      CHECK(row.rep_count == 10);
      CHECK(row.failure_count == rep.failures);
      CHECK(row.coverage >= 0.0);
      CHECK(row.coverage <= 1.0);
      CHECK(row.se_emp > 0.0);
      CHECK(row.se_bar > 0.0);
    }
  }
  ExperimentOptions two;
  two.threads = 2;
  const ExperimentResult b = run_experiment(s, 10, {FitMethod::Poisson, FitMethod::Semiparametric}, 5, two);
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t r = 0; r < 10; ++r)
      for (std::size_t i = 0; i < 3; ++i) {
        const double x = a.estimates[k][r][i], y = b.estimates[k][r][i];
        CHECK(((std::isnan(x) && std::isnan(y)) || x == y));
      }
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.reports[k].rows[i].mean_estimate == b.reports[k].rows[i].mean_estimate);
  }
  CHECK_THROWS_AS(run_experiment(s, 9, {FitMethod::Poisson}, 5), InputError);
}
