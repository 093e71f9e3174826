#include "spglm/diagnostics.hpp"

#include <boost/math/distributions/negative_binomial.hpp>
#include <boost/math/distributions/poisson.hpp>

#include <algorithm>
#include <cmath>
#include <utility>

namespace spglm {

namespace {

constexpr double kTailMass = 1e-12;

}  // namespace

PredictiveModel PredictiveModel::parametric(Family family, std::vector<double> y, std::vector<double> mu,
                                            double alpha) {
  if (y.size() != mu.size()) throw DimensionMismatch("response and mean lengths differ");
  PredictiveModel m;
  m.kind_ = family == Family::NegBin ? Kind::NegBin : Kind::Poisson;
  if (m.kind_ == Kind::NegBin && !(alpha > 0)) throw InputError("negative-binomial predictive needs alpha > 0");
  m.y_ = std::move(y);
  m.mu_ = std::move(mu);
  m.alpha_ = alpha;
  return m;
}

PredictiveModel PredictiveModel::semiparametric(std::vector<double> y, std::vector<double> mu,
                                                const AtomicDistribution& dist, std::vector<double> theta,
                                                std::vector<double> b) {
  if (y.size() != mu.size() || theta.size() != y.size() || b.size() != y.size())
    throw DimensionMismatch("fitted state lengths differ");
  PredictiveModel m;
  m.kind_ = Kind::Semiparametric;
  m.y_ = std::move(y);
  m.mu_ = std::move(mu);
  m.values_ = dist.support_values();
  m.masses_ = dist.support_masses();
  m.theta_ = std::move(theta);
  m.b_ = std::move(b);
  return m;
}

PredictiveModel PredictiveModel::from_fit(const ParametricFitResult& fit, const TimeSeries& ts) {
  return parametric(fit.family, ts.y, fit.state.mu, fit.params.aux.value_or(0.0));
}

PredictiveModel PredictiveModel::from_fit(const SemiparametricFitResult& fit, const TimeSeries& ts) {
  if (fit.dist.size() != ts.y.size()) throw DimensionMismatch("fit and series lengths differ");
  return semiparametric(ts.y, fit.state.mu, fit.dist, fit.state.theta, fit.state.b);
}

double PredictiveModel::cdf(std::size_t t, double y) const {
  const double mu = mu_.at(t);
  switch (kind_) {
    case Kind::Poisson:
      if (y < 0) return 0.0;
      return boost::math::cdf(boost::math::poisson_distribution<double>(mu), std::floor(y));
    case Kind::NegBin:
      if (y < 0) return 0.0;
      return boost::math::cdf(boost::math::negative_binomial_distribution<double>(alpha_, alpha_ / (alpha_ + mu)),
                              std::floor(y));
    case Kind::Semiparametric: {
      double s = 0.0;
      for (std::size_t k = 0; k < values_.size() && values_[k] <= y; ++k)
        s += masses_[k] * std::exp(b_[t] + theta_[t] * values_[k]);
      return std::min(s, 1.0);
    }
  }
  return 0.0;
}

double PredictiveModel::cdf_below(std::size_t t, double y) const {
  if (kind_ == Kind::Semiparametric) {
    double s = 0.0;
    for (std::size_t k = 0; k < values_.size() && values_[k] < y; ++k)
      s += masses_[k] * std::exp(b_[t] + theta_[t] * values_[k]);
    return std::min(s, 1.0);
  }
  const double k = std::ceil(y) - 1.0;
  return k < 0 ? 0.0 : cdf(t, k);
}

std::vector<PmfPoint> PredictiveModel::pmf(std::size_t t) const {
  std::vector<PmfPoint> out;
  const double mu = mu_.at(t);
  if (kind_ == Kind::Semiparametric) {
    for (std::size_t k = 0; k < values_.size(); ++k) {
      const double p = masses_[k] * std::exp(b_[t] + theta_[t] * values_[k]);
      if (p > 0) out.push_back({values_[k], p});
    }
    return out;
  }
  double cum = 0.0;
  for (long k = 0; cum < 1.0 - kTailMass; ++k) {
    const auto kk = static_cast<double>(k);
    const double p = kind_ == Kind::Poisson
                         ? boost::math::pdf(boost::math::poisson_distribution<double>(mu), kk)
                         : boost::math::pdf(
                               boost::math::negative_binomial_distribution<double>(alpha_, alpha_ / (alpha_ + mu)), kk);
    cum += p;
    out.push_back({kk, p});
    if (k > 10'000'000) break;
  }
  return out;
}

PitHistogram pit_histogram(const PredictiveModel& model, std::size_t bins) {
  if (bins == 0) throw InputError("number of PIT bins must be positive");
  PitHistogram h;
  h.bins = bins;
  h.observations = model.size();
  h.grid.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.grid[i] = static_cast<double>(i) / static_cast<double>(bins);
  h.mean_pit.assign(bins + 1, 0.0);
  for (std::size_t t = 0; t < model.size(); ++t) {
    const double y = model.observed(t);
    const double lo = model.cdf_below(t, y);
    const double hi = std::max(model.cdf(t, y), lo);
    if (!(hi > lo)) ++h.degenerate;
    for (std::size_t i = 0; i <= bins; ++i) {
      const double u = h.grid[i];
      double f;
      if (u <= lo) f = 0.0;
      else if (u >= hi) f = 1.0;
      else f = (u - lo) / (hi - lo);
      h.mean_pit[i] += f;
    }
  }
  const auto n = static_cast<double>(std::max<std::size_t>(model.size(), 1));
  for (double& v : h.mean_pit) v /= n;
  h.mean_pit.front() = 0.0;
  h.mean_pit.back() = 1.0;
  h.heights.resize(bins);
  for (std::size_t i = 0; i < bins; ++i)
    h.heights[i] = (h.mean_pit[i + 1] - h.mean_pit[i]) * static_cast<double>(bins);
  return h;
}

double sup_deviation(const PitHistogram& h) {
  double d = 0.0;
  for (double v : h.heights) d = std::max(d, std::abs(v - 1.0));
  return d;
}

double pit_chi_square(const PitHistogram& h) {
  double s = 0.0;
  for (double v : h.heights) s += (v - 1.0) * (v - 1.0);
  return static_cast<double>(h.observations) / static_cast<double>(h.bins) * s;
}

std::vector<PmfPoint> conditional_pmf(const PredictiveModel& model, std::size_t t) {
  if (t >= model.size()) throw InputError("time index out of range");
  return model.pmf(t);
}

}  // namespace spglm
