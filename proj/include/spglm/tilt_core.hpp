#pragma once

// Exponential tilting of a discrete base distribution.
//
// For atoms y_j with masses p_j the tilt at theta has weights
//   w_j = p_j exp(b + theta y_j),   b = -log sum_j p_j exp(theta y_j),
// and the tilted mean is strictly increasing in theta with derivative equal
// to the tilted variance. All sums are evaluated with max-subtraction so
// |theta * y| up to several hundred stays finite.

#include <cstddef>
#include <span>
#include <vector>

namespace spglm {

inline constexpr double kMassFloor = 1e-12;
inline constexpr double kHullMargin = 1e-8;
inline constexpr double kThetaCap = 500.0;

/// Distinct sorted support values with aggregated masses. This is the form
/// every tilt computation runs on; duplicate atoms only matter for the
/// per-observation likelihood.
struct SupportView {
  std::span<const double> values;
  std::span<const double> masses;
};

/// One atom per observation (duplicates permitted) with masses p_0..p_n.
class AtomicDistribution {
 public:
  /// Validates: equal lengths, masses >= kMassFloor summing to 1 within
  /// 1e-12, at least two distinct atom values.
  AtomicDistribution(std::vector<double> atoms, std::vector<double> masses);

  /// Normalizes positive weights to masses before validating.
  static AtomicDistribution from_weights(std::vector<double> atoms, std::vector<double> weights);
  static AtomicDistribution uniform(std::vector<double> atoms);

  const std::vector<double>& atoms() const noexcept { return atoms_; }
  const std::vector<double>& masses() const noexcept { return masses_; }
  std::size_t size() const noexcept { return atoms_.size(); }

  /// Distinct values (ascending), their aggregated masses and multiplicities.
  const std::vector<double>& support_values() const noexcept { return values_; }
  const std::vector<double>& support_masses() const noexcept { return agg_masses_; }
  const std::vector<std::size_t>& support_counts() const noexcept { return counts_; }
  /// Index into support_values() of atom j.
  std::size_t support_index(std::size_t j) const noexcept { return index_[j]; }

  SupportView view() const noexcept { return {values_, agg_masses_}; }

  /// p_j -> p_j e^{c y_j} / sum_k p_k e^{c y_k}.
  AtomicDistribution tilted(double c) const;

 private:
  std::vector<double> atoms_, masses_;
  std::vector<double> values_, agg_masses_;
  std::vector<std::size_t> counts_, index_;
};

struct TiltMoments {
  double b = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

/// b = -log sum_j p_j e^{theta y_j}.
double tilted_normalizer(SupportView s, double theta);
double tilted_normalizer(const AtomicDistribution& d, double theta);

/// Normalizer, mean and variance of the tilt at theta.
TiltMoments tilted_moments(SupportView s, double theta);
TiltMoments tilted_moments(const AtomicDistribution& d, double theta);

struct TiltSolution {
  double theta = 0.0;
  TiltMoments moments;
  int iterations = 0;
  bool capped = false;  // |theta| hit kThetaCap before the mean was reached
};

/// Finds theta with tilted mean == target. Safeguarded Newton inside a
/// bracket grown by doubling from `hint`. Throws InfeasibleMean when target is
/// not at least kHullMargin inside (min value, max value).
TiltSolution solve_tilt(SupportView s, double target, double hint = 0.0);
TiltSolution solve_tilt(const AtomicDistribution& d, double target, double hint = 0.0);

/// sum_j p_j e^{b + theta y_j} 1(y_j <= y); right-continuous, exactly 1 at or
/// above the largest atom.
double tilted_cdf(SupportView s, double theta, double y);
double tilted_cdf(const AtomicDistribution& d, double theta, double y);

/// Tilted weights per support value (sum to one).
std::vector<double> tilted_weights(SupportView s, double theta);

}  // namespace spglm
