#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace spglm;

namespace {

// Independent oracle: tilted mean by direct log-sum-exp summation, theta by
// plain bisection.
double oracle_mean(const std::vector<double>& y, const std::vector<double>& p, double theta) {
  double m = -INFINITY;
  for (double v : y) m = std::max(m, theta * v);
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double w = p[j] * std::exp(theta * y[j] - m);
    num += w * y[j];
    den += w;
  }
  return num / den;
}

double oracle_theta(const std::vector<double>& y, const std::vector<double>& p, double target) {
  double lo = -1.0, hi = 1.0;
  while (oracle_mean(y, p, lo) > target) lo *= 2;
  while (oracle_mean(y, p, hi) < target) hi *= 2;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (oracle_mean(y, p, mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("AtomicDistribution validation") {
  CHECK_NOTHROW(AtomicDistribution({0, 1, 1}, {0.5, 0.25, 0.25}));
  CHECK_THROWS_AS(AtomicDistribution({0, 1}, {0.5, 0.6}), InputError);
  CHECK_THROWS_AS(AtomicDistribution({0, 1}, {1.0, 0.0}), InputError);
  CHECK_THROWS_AS(AtomicDistribution({0, 1}, {1.0}), DimensionMismatch);
  CHECK_THROWS_AS(AtomicDistribution({2, 2, 2}, {0.2, 0.3, 0.5}), DegenerateSupport);

  const AtomicDistribution d({3, 1, 3, 0}, {0.1, 0.2, 0.3, 0.4});
  CHECK(d.support_values() == std::vector<double>{0, 1, 3});
  CHECK(d.support_masses()[2] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(d.support_counts() == std::vector<std::size_t>{1, 1, 2});
  CHECK(d.support_values()[d.support_index(0)] == 3);
}

TEST_CASE("two-point tilt matches the logistic closed forms") {
  const AtomicDistribution d({0, 1}, {0.5, 0.5});
  const double e = std::exp(1.0);
  const TiltMoments m = tilted_moments(d, 1.0);
  CHECK(m.b == doctest::Approx(-std::log((1 + e) / 2)).epsilon(1e-14));
  CHECK(m.b == doctest::Approx(-0.62011).epsilon(1e-5));
  CHECK(m.mean == doctest::Approx(e / (1 + e)).epsilon(1e-14));
  CHECK(m.mean == doctest::Approx(0.731059).epsilon(1e-6));
  CHECK(m.variance == doctest::Approx(e / ((1 + e) * (1 + e))).epsilon(1e-13));
  CHECK(m.variance == doctest::Approx(0.196612).epsilon(1e-6));

  const TiltSolution s = solve_tilt(d, 1.0 / (1.0 + e));
  CHECK(s.theta == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(1.0 / (1.0 + e) == doctest::Approx(0.268941).epsilon(1e-6));
  CHECK_FALSE(s.capped);
}

TEST_CASE("normalizer tends to -log of the smallest atom's mass") {
  const AtomicDistribution d = AtomicDistribution::uniform({0, 1, 2});
  CHECK(tilted_normalizer(d, -60.0) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(tilted_normalizer(d, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("moments stay finite for extreme theta") {
  const AtomicDistribution d = AtomicDistribution::uniform({0, 5, 100, 400});
  for (double theta : {-500.0, -50.0, 50.0, 500.0}) {
    const TiltMoments m = tilted_moments(d, theta);
    CHECK(std::isfinite(m.b));
    CHECK(std::isfinite(m.mean));
    CHECK(m.variance >= 0);
  }
  CHECK(tilted_moments(d, 500.0).mean == doctest::Approx(400.0));
  CHECK(tilted_moments(d, -500.0).mean == doctest::Approx(0.0));
}

TEST_CASE("solve_tilt agrees with the bisection oracle") {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t k = 3 + static_cast<std::size_t>(u(rng) * 18);
    const AtomicDistribution d = test::random_distribution(rng, k);
    const auto& v = d.support_values();
    const double lo = v.front(), hi = v.back();
    const double target = lo + (hi - lo) * (0.02 + 0.96 * u(rng));
    const TiltSolution s = solve_tilt(d, target, 3.0 * (u(rng) - 0.5));
    const double expected = oracle_theta(d.support_values(), d.support_masses(), target);
    CHECK(std::abs(s.theta - expected) < 1e-6);
    CHECK(std::abs(s.moments.mean - target) < 1e-8);
    CHECK(std::abs(tilted_moments(d, s.theta).mean - target) < 1e-8);
  }
}

TEST_CASE("solve_tilt rejects targets outside the open hull") {
  const AtomicDistribution d = AtomicDistribution::uniform({1, 2, 4});
  CHECK_THROWS_AS(solve_tilt(d, 0.5), InfeasibleMean);
  CHECK_THROWS_AS(solve_tilt(d, 4.0), InfeasibleMean);
  CHECK_THROWS_AS(solve_tilt(d, 1.0), InfeasibleMean);
  CHECK_NOTHROW(solve_tilt(d, 3.999));
}

TEST_CASE("tilted variance is the derivative of the tilted mean") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const AtomicDistribution d = test::random_distribution(rng, 6, 3.0);
    const double theta = std::uniform_real_distribution<double>(-1.5, 1.5)(rng);
    const double h = 1e-5;
    const double fd = (tilted_moments(d, theta + h).mean - tilted_moments(d, theta - h).mean) / (2 * h);
    CHECK(tilted_moments(d, theta).variance == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("tilted cdf and weights") {
  const AtomicDistribution d({0, 1, 1, 3}, {0.1, 0.2, 0.3, 0.4});
  const auto w = tilted_weights(d.view(), 0.7);
  double s = 0.0;
  for (double x : w) s += x;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(tilted_cdf(d, 0.7, -1.0) == 0.0);
  CHECK(tilted_cdf(d, 0.7, 0.0) == doctest::Approx(w[0]));
  CHECK(tilted_cdf(d, 0.7, 2.5) == doctest::Approx(w[0] + w[1]));
  CHECK(tilted_cdf(d, 0.7, 3.0) == 1.0);

  // Tilting the base by c and then by theta - c is the same tilt.
  const AtomicDistribution t = d.tilted(0.4);
  const auto w2 = tilted_weights(t.view(), 0.3);
  for (std::size_t k = 0; k < w.size(); ++k) CHECK(w2[k] == doctest::Approx(w[k]).epsilon(1e-12));
}
