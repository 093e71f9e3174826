#pragma once

// Data generators for the simulation models and the Monte Carlo experiment
// runner. Generation reuses the fitting recursion (run_recursion) with the
// response drawn from the conditional distribution instead of read from data.
//
//   M1   W_t = b0 + psi e_{t-1}                         Poisson, Pearson e
//   M1p  data from M1, fitted with an extra (redundant) trend t/n
//   M1pp data from M1, fitted with an extra (redundant) MA lag 2
//   M2   W_t = b0 + b1 t/n + psi e_{t-1}                Poisson
//   M3   W_t = b0 + b1 t/n + b2 cos(2 pi t/6) + b3 sin(2 pi t/6) + Z_t,
//        Z_t = phi (Z_{t-1} + e_{t-1})                  NegBin(alpha)

#include "spglm/data_model.hpp"
#include "spglm/inference.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace spglm {

enum class SimModel { M1, M1p, M1pp, M2, M3 };

const char* to_string(SimModel m) noexcept;
SimModel parse_sim_model(const std::string& name);

struct SimSpec {
  SimModel model = SimModel::M1;
  std::size_t n = 250;
  std::size_t burn_in = 100;
  ModelParams true_params;
  std::uint64_t seed = 0;

  /// Throws InputError when n < 1 or true_params do not fit the model.
  void validate() const;
};

/// SimSpec with the default truth: M1 (0.5; 0.3), M2 (0.5, 1.0; 0.3),
/// M3 (0.1, 0.2, 0.3, 0.4; 0.25; alpha 4); M1p/M1pp add a zero coefficient.
SimSpec default_sim_spec(SimModel model, std::size_t n, std::uint64_t seed);

/// Mean-model spec (design columns and lags) each model is fitted with.
MeanModelSpec fitting_spec(SimModel model);
std::vector<std::string> design_labels(SimModel model);

/// Design rows for times t = t_first .. t_first + rows - 1, trend t/n.
Eigen::MatrixXd model_design(SimModel model, long t_first, std::size_t rows, std::size_t n);

struct SimulatedSeries {
  TimeSeries series;       // retained n observations, t = 1..n
  TimeSeries full;         // burn-in followed by the retained part
  FittedState generator;   // generator state over `full`
};

/// Deterministic given spec.seed. Throws StateExplosion (with the seed in the
/// message) when the generated state diverges.
SimulatedSeries simulate_with_state(const SimSpec& spec);
TimeSeries simulate(const SimSpec& spec);

/// Counter-based seed for replication `rep` of an experiment seeded `seed`.
std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t rep) noexcept;

struct CoverageRow {
  std::string parameter;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double se_emp = 0.0;    // empirical sd of estimates
  double se_bar = 0.0;    // mean estimated (or equivalent) se
  double coverage = 0.0;  // fraction of intervals containing truth
  std::size_t rep_count = 0;
  std::size_t failure_count = 0;
};

struct CoverageReport {
  FitMethod method = FitMethod::Poisson;
  std::vector<CoverageRow> rows;
  std::size_t reps = 0;
  std::size_t failures = 0;
  bool failure_flag = false;  // failures exceed 5% of reps
};

struct ExperimentOptions {
  unsigned threads = 1;
  double level = 0.05;
  /// Compute intervals (Hessian se for parametric, LRT se_eq for
  /// semiparametric). Without it only estimates are collected.
  bool intervals = true;
  /// Restrict semiparametric LRTs to these parameter indices (empty = all).
  std::vector<std::size_t> lrt_params;
};

struct ExperimentResult {
  std::vector<CoverageReport> reports;  // one per requested method, in order
  std::vector<std::string> parameter_names;
  std::vector<double> truth;
  /// estimates[method][rep][param], NaN for failed replications.
  std::vector<std::vector<std::vector<double>>> estimates;
  std::vector<std::vector<std::vector<double>>> standard_errors;
};

/// Runs `reps` replications: simulate (seed replication_seed(seed, r)), fit
/// each method, collect estimates, standard errors and interval coverage for
/// the mean parameters. Requires reps >= 10.
ExperimentResult run_experiment(const SimSpec& spec, std::size_t reps, const std::vector<FitMethod>& methods,
                                std::uint64_t seed, const ExperimentOptions& opt = {});

/// Thread count from SPGLM_THREADS, else 1.
unsigned default_thread_count();

}  // namespace spglm
