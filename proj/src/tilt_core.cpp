#include "spglm/tilt_core.hpp"

#include "spglm/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace spglm {

AtomicDistribution::AtomicDistribution(std::vector<double> atoms, std::vector<double> masses)
    : atoms_(std::move(atoms)), masses_(std::move(masses)) {
  if (atoms_.size() != masses_.size()) throw DimensionMismatch("atoms and masses differ in length");
  double total = 0.0;
  for (std::size_t j = 0; j < atoms_.size(); ++j) {
    if (!std::isfinite(atoms_[j]) || !std::isfinite(masses_[j])) throw NonFiniteValue("non-finite atom or mass");
    if (masses_[j] < kMassFloor) throw InputError("mass below floor at atom " + std::to_string(j));
    total += masses_[j];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "masses sum to " << total << ", not 1";
    throw InputError(os.str());
  }

  std::map<double, std::size_t> slot;
  for (double a : atoms_) slot.emplace(a, 0);
  values_.reserve(slot.size());
  for (auto& [v, k] : slot) {
    k = values_.size();
    values_.push_back(v);
  }
  if (values_.size() < 2) throw DegenerateSupport("fewer than two distinct support values");
  agg_masses_.assign(values_.size(), 0.0);
  counts_.assign(values_.size(), 0);
  index_.resize(atoms_.size());
  for (std::size_t j = 0; j < atoms_.size(); ++j) {
    const std::size_t k = slot[atoms_[j]];
    index_[j] = k;
    agg_masses_[k] += masses_[j];
    ++counts_[k];
  }
}

AtomicDistribution AtomicDistribution::from_weights(std::vector<double> atoms, std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0) || !std::isfinite(w)) throw InputError("weights must be positive and finite");
    total += w;
  }
  for (double& w : weights) w /= total;
  return AtomicDistribution(std::move(atoms), std::move(weights));
}

AtomicDistribution AtomicDistribution::uniform(std::vector<double> atoms) {
  const std::size_t n = atoms.size();
  return AtomicDistribution(std::move(atoms), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

AtomicDistribution AtomicDistribution::tilted(double c) const {
  double m = -std::numeric_limits<double>::infinity();
  for (double a : atoms_) m = std::max(m, c * a);
  std::vector<double> w(atoms_.size());
  for (std::size_t j = 0; j < atoms_.size(); ++j) w[j] = masses_[j] * std::exp(c * atoms_[j] - m);
  return from_weights(atoms_, std::move(w));
}

namespace {

double max_exponent(SupportView s, double theta) {
  // Values are sorted, so the extreme exponent is at one end.
  return std::max(theta * s.values.front(), theta * s.values.back());
}

}  // namespace

double tilted_normalizer(SupportView s, double theta) {
  const double m = max_exponent(s, theta);
  double sum = 0.0;
  for (std::size_t k = 0; k < s.values.size(); ++k) sum += s.masses[k] * std::exp(theta * s.values[k] - m);
  return -(m + std::log(sum));
}

double tilted_normalizer(const AtomicDistribution& d, double theta) { return tilted_normalizer(d.view(), theta); }

TiltMoments tilted_moments(SupportView s, double theta) {
  // Single pass, weighted incremental (West) update of mean and sum of squares.
  const double m = max_exponent(s, theta);
  double sum = 0.0, mean = 0.0, ss = 0.0;
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    const double w = s.masses[k] * std::exp(theta * s.values[k] - m);
    if (w == 0.0) continue;
    sum += w;
    const double d = s.values[k] - mean;
    mean += (w / sum) * d;
    ss += w * d * (s.values[k] - mean);
  }
  return {-(m + std::log(sum)), mean, std::max(ss / sum, 0.0)};
}

TiltMoments tilted_moments(const AtomicDistribution& d, double theta) { return tilted_moments(d.view(), theta); }

TiltSolution solve_tilt(SupportView s, double target, double hint) {
  const double lo_v = s.values.front();
  const double hi_v = s.values.back();
  if (!(target > lo_v + kHullMargin && target < hi_v - kHullMargin)) {
    std::ostringstream os;
    os << "target mean " << target << " outside the open hull (" << lo_v << ", " << hi_v << ")";
    throw InfeasibleMean(os.str());
  }
  if (!std::isfinite(hint)) hint = 0.0;
  hint = std::clamp(hint, -kThetaCap, kThetaCap);

  TiltSolution sol;
  TiltMoments mom = tilted_moments(s, hint);
  double theta = hint;
  const double tol = 1e-14 * std::max(1.0, std::abs(target));
  if (std::abs(mom.mean - target) <= tol) {
    sol.theta = theta;
    sol.moments = mom;
    return sol;
  }

  // Grow a bracket [lo, hi] with mean(lo) < target < mean(hi).
  double lo, hi;
  int evals = 1;
  if (mom.mean < target) {
    lo = theta;
    double step = 1.0;
    hi = std::min(theta + step, kThetaCap);
    while (tilted_moments(s, hi).mean < target) {
      ++evals;
      lo = hi;
      if (hi >= kThetaCap) {
        sol.theta = kThetaCap;
        sol.moments = tilted_moments(s, kThetaCap);
        sol.capped = true;
        sol.iterations = evals;
        return sol;
      }
      step *= 2.0;
      hi = std::min(hi + step, kThetaCap);
    }
  } else {
    hi = theta;
    double step = 1.0;
    lo = std::max(theta - step, -kThetaCap);
    while (tilted_moments(s, lo).mean > target) {
      ++evals;
      hi = lo;
      if (lo <= -kThetaCap) {
        sol.theta = -kThetaCap;
        sol.moments = tilted_moments(s, -kThetaCap);
        sol.capped = true;
        sol.iterations = evals;
        return sol;
      }
      step *= 2.0;
      lo = std::max(lo - step, -kThetaCap);
    }
  }

  // Newton from the current point, bisecting whenever a step leaves the bracket.
  for (int it = 0; it < 200; ++it) {
    ++sol.iterations;
    const double resid = mom.mean - target;
    if (resid < 0)
      lo = std::max(lo, theta);
    else
      hi = std::min(hi, theta);
    double next = (mom.variance > 0) ? theta - resid / mom.variance : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double delta = next - theta;
    theta = next;
    mom = tilted_moments(s, theta);
    if (std::abs(mom.mean - target) <= tol || std::abs(delta) <= 1e-15 * std::max(1.0, std::abs(theta)) ||
        hi - lo <= 1e-15 * std::max(1.0, std::abs(theta)))
      break;
  }
  sol.theta = theta;
  sol.moments = mom;
  sol.iterations += evals;
  return sol;
}

TiltSolution solve_tilt(const AtomicDistribution& d, double target, double hint) {
  return solve_tilt(d.view(), target, hint);
}

double tilted_cdf(SupportView s, double theta, double y) {
  if (y < s.values.front()) return 0.0;
  if (y >= s.values.back()) return 1.0;
  const double b = tilted_normalizer(s, theta);
  double acc = 0.0;
  for (std::size_t k = 0; k < s.values.size() && s.values[k] <= y; ++k)
    acc += s.masses[k] * std::exp(b + theta * s.values[k]);
  return std::clamp(acc, 0.0, 1.0);
}

double tilted_cdf(const AtomicDistribution& d, double theta, double y) { return tilted_cdf(d.view(), theta, y); }

std::vector<double> tilted_weights(SupportView s, double theta) {
  const double b = tilted_normalizer(s, theta);
  std::vector<double> w(s.values.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = s.masses[k] * std::exp(b + theta * s.values[k]);
  return w;
}

}  // namespace spglm
