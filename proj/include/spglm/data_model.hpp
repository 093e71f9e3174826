#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spglm {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data or configuration does not satisfy a documented precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InputError {
 public:
  using InputError::InputError;
};

class NonIntegerCount : public InputError {
 public:
  using InputError::InputError;
};

class NonFiniteValue : public InputError {
 public:
  using InputError::InputError;
};

/// Fewer than two distinct response values: every tilt of the base
/// distribution is the same point mass.
class DegenerateSupport : public InputError {
 public:
  using InputError::InputError;
};

/// Requested conditional mean lies outside the open convex hull of the atoms.
class InfeasibleMean : public Error {
 public:
  using Error::Error;
};

/// |W_t| exceeded the explosion guard during the forward recursion.
class StateExplosion : public Error {
 public:
  StateExplosion(std::size_t t, double w);
  StateExplosion(std::size_t t, double w, const std::string& context);
  std::size_t time() const noexcept { return t_; }
  double state() const noexcept { return w_; }

 private:
  std::size_t t_;
  double w_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Responses y_0..y_n and the covariate row x_t for each of them.
struct TimeSeries {
  std::vector<double> y;
  Eigen::MatrixXd x;  // (n+1) x q
  std::vector<std::string> labels;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t covariates() const noexcept { return static_cast<std::size_t>(x.cols()); }
};

/// Compact parameter space. Defaults keep the optimizer inside a bounded
/// region without binding in practice.
struct ParamBounds {
  double beta_abs = 50.0;
  double arma_abs = 0.99;
  double alpha_lo = 1e-3;
  double alpha_hi = 1e3;
};

enum class Link { Log };

struct MeanModelSpec {
  std::size_t q = 1;
  std::vector<int> ar_lags;
  std::vector<int> ma_lags;
  double lambda = 0.5;
  Link link = Link::Log;
  ParamBounds bounds{};

  std::size_t r() const noexcept { return ar_lags.size() + ma_lags.size(); }
  std::size_t mean_param_count() const noexcept { return q + r(); }
  int max_lag() const noexcept;

  /// Throws InputError when lambda or the lag sets are invalid.
  void validate() const;
};

struct ModelParams {
  std::vector<double> beta;
  std::vector<double> phi;
  std::vector<double> psi;
  std::optional<double> aux;  // negative-binomial dispersion alpha

  /// Flattened (beta, phi, psi[, aux]).
  std::vector<double> flatten() const;
  static ModelParams unflatten(const MeanModelSpec& spec, const std::vector<double>& v, bool has_aux);

  /// Throws InputError on a dimension mismatch, a non-finite entry, a
  /// non-positive aux, or a coordinate outside the box bounds.
  void validate(const MeanModelSpec& spec) const;
  bool within_bounds(const MeanModelSpec& spec) const;
};

/// Human-readable names in flatten() order: covariate labels, "AR lag k",
/// "MA lag k", then "alpha" when has_aux.
std::vector<std::string> parameter_names(const MeanModelSpec& spec, const std::vector<std::string>& labels,
                                         bool has_aux);

/// Per-time fitted quantities from the forward recursion, all of length n+1.
/// theta and b are empty for parametric fits.
struct FittedState {
  std::vector<double> W, Z, e, mu, var, b, theta;

  std::size_t size() const noexcept { return mu.size(); }
  /// Checks mu_t > 0, var_t > 0 and, when `gauge` is set, theta_0 = b_0 = 0.
  void check_invariants(bool gauge) const;
};

enum class ResponseKind { Count, Continuous };

/// Returns a copy of `ts` if every invariant holds and its dimensions match
/// `spec`; otherwise throws DimensionMismatch, NonIntegerCount or
/// NonFiniteValue.
TimeSeries validate_dataset(const TimeSeries& ts, const MeanModelSpec& spec,
                            ResponseKind kind = ResponseKind::Count);

}  // namespace spglm
