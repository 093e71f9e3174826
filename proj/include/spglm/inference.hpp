#pragma once

// Likelihood-ratio inference for single coefficients and the equivalent
// standard error: se_eq is defined so that ((estimate - null) / se_eq)^2
// equals the LRT statistic, and Wald-type intervals estimate +- z se_eq are
// then calibrated to the chi-square(1) test.

#include "spglm/mele_fitter.hpp"
#include "spglm/parametric_models.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace spglm {

struct SimSpec;

enum class FitMethod { Poisson, NegBin, Semiparametric };

const char* to_string(FitMethod m) noexcept;
/// Accepts "poisson", "negbin", "semiparametric"; throws InputError otherwise.
FitMethod parse_fit_method(const std::string& name);

struct LrtResult {
  double lrt_stat = 0.0;
  double pvalue = 1.0;
  double estimate = 0.0;
  double null_value = 0.0;
  double se_eq = 0.0;  // +inf when lrt_stat == 0
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double level = 0.05;  // CI has coverage 1 - level
  bool clamped = false;       // a small negative statistic was set to 0
  bool restarted = false;     // fits were rerun after a negative statistic
  bool p_floor_hit = false;   // constrained semiparametric fit has masses near the floor
};

/// Assembles an LrtResult from the two maximized log-likelihoods. Values in
/// [-neg_tol, 0) are clamped to 0; more negative values throw ConvergenceError.
LrtResult lrt_from_logliks(double loglik_full, double loglik_null, double estimate, double null_value,
                           double level = 0.05, double neg_tol = 1e-6);

struct LrtOptions {
  double level = 0.05;
  double neg_tol = 1e-6;
  MeleOptions mele{};
  ParametricOptions parametric{};
  std::uint64_t restart_seed = 0x5eedULL;
};

/// Refits with coefficient `target` (flatten() index) frozen at null_value,
/// warm-started from `full`. Throws InputError when null_value lies on or
/// outside the parameter-space boundary and ConvergenceError when the
/// constrained refit fails or the statistic stays negative after restarts.
LrtResult lrt_single(const TimeSeries& ts, const MeanModelSpec& spec, const SemiparametricFitResult& full,
                     std::size_t target, double null_value = 0.0, const LrtOptions& opt = {});
LrtResult lrt_single(const TimeSeries& ts, const MeanModelSpec& spec, const ParametricFitResult& full,
                     std::size_t target, double null_value = 0.0, const LrtOptions& opt = {});

/// LRT at null 0 for every mean parameter (beta, phi, psi).
std::vector<LrtResult> lrt_all(const TimeSeries& ts, const MeanModelSpec& spec, const SemiparametricFitResult& full,
                               const LrtOptions& opt = {});
std::vector<LrtResult> lrt_all(const TimeSeries& ts, const MeanModelSpec& spec, const ParametricFitResult& full,
                               const LrtOptions& opt = {});

struct Type1Result {
  std::vector<double> levels;
  std::vector<double> rejection_rates;
  std::vector<double> mc_se;  // binomial Monte Carlo standard errors
  std::vector<double> pvalues;  // per replication, NaN for failures
  std::size_t reps = 0;
  std::size_t failures = 0;
  bool failure_flag = false;  // failures exceed 2% of reps
};

struct Type1Options {
  FitMethod method = FitMethod::Semiparametric;
  unsigned threads = 1;
  LrtOptions lrt{};
};

/// Simulates `reps` series under `sim` (the tested coefficient must be 0 in
/// sim.true_params), tests coefficient `target` = 0 by LRT in each and
/// returns rejection rates at each nominal level. Requires reps >= 100.
Type1Result type1_error_study(const SimSpec& sim, std::size_t target, const std::vector<double>& nominal_levels,
                              std::size_t reps, std::uint64_t seed, const Type1Options& opt = {});

}  // namespace spglm
