#pragma once

// Maximum empirical likelihood for the semiparametric GLARMA model.
//
// The base distribution F is discretized on the observed responses with
// masses p_0..p_n, and the empirical log-likelihood
//
//   l(beta, gamma, p) = sum_t { log p_t + b_t + theta_t Y_t }
//
// is maximized subject to the normalization and mean constraints at every t
// and the ARMA recursion. theta_t and b_t are never optimization variables:
// each objective evaluation solves them from the constraints (nested
// profiling).
//
// The objective only depends on p through the aggregated mass of each
// distinct response value, and for fixed aggregated masses the sum of
// log p_t over tied observations is maximized by an equal split. The
// optimizer therefore works on one logit per distinct value and ties share
// their mass equally in the returned distribution.
//
// Identifiability: l is invariant under p -> tilt(p, c), theta_t -> theta_t - c.
// Gauge::Profile optimizes with theta_0 solved like every other t, pins two
// logits (which removes exactly the tilt direction), and applies the tilt
// c = theta_0 afterwards so that theta_0 = b_0 = 0. Gauge::Penalty fixes
// theta_0 = b_0 = 0 throughout and enforces the induced t = 0 mean
// constraint sum_j p_j (Y_j - mu_0) = 0 with an augmented-Lagrangian penalty.

#include "spglm/data_model.hpp"
#include "spglm/optimizer.hpp"
#include "spglm/parametric_models.hpp"
#include "spglm/tilt_core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace spglm {

enum class Gauge { Profile, Penalty };

struct MeleOptions {
  optim::Options optimizer{.max_iterations = 3000};
  Gauge gauge = Gauge::Profile;
  /// Outer rounds: optimizer restarts (profile) or penalty escalations.
  int max_rounds = 6;
  /// Convergence: relative objective change across a full outer round.
  double round_ftol = 1e-8;
  std::vector<FrozenParam> frozen;        // indices into (beta, phi, psi)
  std::optional<ModelParams> start;       // default: Poisson MLE
  std::optional<AtomicDistribution> start_dist;  // default: uniform
};

struct SemiparametricFitResult {
  ModelParams params;
  AtomicDistribution dist;  // the MELE p-hat, gauge-fixed
  double loglik = 0.0;
  double start_loglik = 0.0;
  FittedState state;
  bool converged = false;
  double gauge_residual = 0.0;  // |sum_j p_j (Y_j - mu_0)|
  int iterations = 0;
  int rounds = 0;
  std::string message;
};

/// Throws DegenerateSupport when y has fewer than two distinct values and
/// ConvergenceError when no feasible starting point exists.
SemiparametricFitResult fit_semiparametric(const TimeSeries& ts, const MeanModelSpec& spec,
                                           const MeleOptions& opt = {});

/// Empirical log-likelihood at (params, dist) with theta_t, b_t solved from
/// the constraints at every t = 0..n (no gauge, no penalty). dist must have
/// one atom per observation, atoms equal to ts.y. Throws InfeasibleMean.
double loglik_at(const TimeSeries& ts, const MeanModelSpec& spec, const ModelParams& params,
                 const AtomicDistribution& dist);

/// State with theta_t, b_t solved at every t (no gauge).
FittedState semiparametric_state(const TimeSeries& ts, const MeanModelSpec& spec, const ModelParams& params,
                                 const AtomicDistribution& dist);

/// Right-continuous step cdf F-hat(y) = sum_j p_j 1(Y_j <= y).
class StepCdf {
 public:
  explicit StepCdf(const AtomicDistribution& dist);
  double operator()(double y) const;
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& cumulative() const noexcept { return cum_; }

 private:
  std::vector<double> values_, cum_;
};

StepCdf mele_cdf(const SemiparametricFitResult& fit);

}  // namespace spglm
