#pragma once

#include "spglm/data_model.hpp"
#include "spglm/optimizer.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spglm {

enum class Family { Poisson, NegBin };

/// A parameter held fixed during a fit; `index` is into ModelParams::flatten()
/// order (beta, phi, psi, alpha).
struct FrozenParam {
  std::size_t index = 0;
  double value = 0.0;
};

struct ParametricOptions {
  optim::Options optimizer{};
  std::vector<FrozenParam> frozen;
  std::optional<ModelParams> start;  // default: IRLS beta, zero ARMA, alpha = 10
  bool compute_se = true;
};

struct ParametricFitResult {
  Family family = Family::Poisson;
  ModelParams params;
  double loglik = 0.0;
  double start_loglik = 0.0;
  /// Observed-information standard errors (inverse numerical Hessian of the
  /// log-likelihood), flatten() order; NaN for frozen parameters.
  std::vector<double> se;
  /// Fisher-scoring standard errors from sum_t w_t dW_t dW_t' with
  /// w_t = mu_t^2 / var_t; NaN for alpha and frozen parameters.
  std::vector<double> se_expected;
  bool se_available = false;
  double hessian_asymmetry = 0.0;
  bool conditioning_warning = false;
  FittedState state;
  bool converged = false;
  bool poisson_limit_boundary = false;
  int iterations = 0;
  std::string message;
};

double poisson_loglik(const TimeSeries& ts, const MeanModelSpec& spec, const ModelParams& params);
/// params.aux holds alpha.
double negbin_loglik(const TimeSeries& ts, const MeanModelSpec& spec, const ModelParams& params);

/// Poisson GLM (log link, no ARMA terms) by iteratively reweighted least squares.
std::vector<double> irls_poisson(const TimeSeries& ts, int max_iterations = 50);

ParametricFitResult fit_poisson(const TimeSeries& ts, const MeanModelSpec& spec, const ParametricOptions& opt = {});
ParametricFitResult fit_negbin(const TimeSeries& ts, const MeanModelSpec& spec, const ParametricOptions& opt = {});
ParametricFitResult fit_parametric(Family family, const TimeSeries& ts, const MeanModelSpec& spec,
                                   const ParametricOptions& opt = {});

}  // namespace spglm
