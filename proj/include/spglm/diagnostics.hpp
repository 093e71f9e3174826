#pragma once

// Predictive-distribution diagnostics: conditional pmfs of fitted models and
// the nonrandomized PIT histogram for discrete predictive distributions.
//
// For observation t with predictive cdf F_t, the PIT of y_t is the
// piecewise-linear cdf
//
//   F_t(u | y_t) = 0                             u <= P(Y < y_t)
//                = (u - P(Y < y_t)) / P(Y = y_t)  in between
//                = 1                             u >= P(Y <= y_t)
//
// and the histogram heights are increments of the mean of these cdfs over
// equal bins, scaled by the bin count (so uniformity gives heights of 1).

#include "spglm/mele_fitter.hpp"
#include "spglm/parametric_models.hpp"

#include <cstddef>
#include <vector>

namespace spglm {

struct PmfPoint {
  double value = 0.0;
  double prob = 0.0;
};

/// Conditional distributions of Y_t given the past under a fitted model.
class PredictiveModel {
 public:
  static PredictiveModel from_fit(const ParametricFitResult& fit, const TimeSeries& ts);
  static PredictiveModel from_fit(const SemiparametricFitResult& fit, const TimeSeries& ts);
  /// From stored fitted quantities; alpha is ignored for Poisson.
  static PredictiveModel parametric(Family family, std::vector<double> y, std::vector<double> mu, double alpha = 0.0);
  static PredictiveModel semiparametric(std::vector<double> y, std::vector<double> mu, const AtomicDistribution& dist,
                                        std::vector<double> theta, std::vector<double> b);

  std::size_t size() const noexcept { return y_.size(); }
  double observed(std::size_t t) const { return y_.at(t); }
  double mean(std::size_t t) const { return mu_.at(t); }
  /// P(Y_t <= y).
  double cdf(std::size_t t, double y) const;
  /// P(Y_t < y).
  double cdf_below(std::size_t t, double y) const;
  /// Support points with positive probability. Parametric pmfs are truncated
  /// at the first k with cdf >= 1 - 1e-12.
  std::vector<PmfPoint> pmf(std::size_t t) const;

 private:
  enum class Kind { Poisson, NegBin, Semiparametric };
  Kind kind_ = Kind::Poisson;
  std::vector<double> y_, mu_;
  double alpha_ = 0.0;
  std::vector<double> values_, masses_;  // aggregated base support
  std::vector<double> theta_, b_;
};

struct PitHistogram {
  std::size_t bins = 10;
  std::vector<double> heights;   // bins entries, mean 1
  std::vector<double> grid;      // bins + 1 breakpoints 0, 1/bins, .., 1
  std::vector<double> mean_pit;  // mean PIT cdf at each grid point
  std::size_t observations = 0;
  std::size_t degenerate = 0;    // observations whose predictive pmf at y_t is 0
};

/// Throws InputError when bins == 0.
PitHistogram pit_histogram(const PredictiveModel& model, std::size_t bins = 10);

/// max_i |height_i - 1|.
double sup_deviation(const PitHistogram& h);

/// Pearson statistic (N / bins) sum_i (height_i - 1)^2 against uniform bin
/// probabilities, to be compared with chi-square(bins - 1).
double pit_chi_square(const PitHistogram& h);

/// Conditional pmf at 0-based time t. Throws InputError when t is out of range.
std::vector<PmfPoint> conditional_pmf(const PredictiveModel& model, std::size_t t);

}  // namespace spglm
