#pragma once

// Forward recursion of the log-link GLARMA state equation
//
//   W_t = x_t' beta + Z_t
//   Z_t = sum_i phi_i (Z_{t-i} + e_{t-i}) + sum_j psi_j e_{t-j}
//   e_t = (Y_t - mu_t) / var_t^lambda,   mu_t = exp(W_t)
//
// with pre-sample Z and e equal to zero. The conditional variance comes from
// a VarianceProvider, so parametric and semiparametric fits share this code,
// and so does the simulator (which draws Y_t instead of reading it).

#include "spglm/data_model.hpp"
#include "spglm/tilt_core.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace spglm {

inline constexpr double kStateGuard = 30.0;

struct VarianceEval {
  double variance = 0.0;
  double theta = std::numeric_limits<double>::quiet_NaN();
  double b = std::numeric_limits<double>::quiet_NaN();
};

class VarianceProvider {
 public:
  virtual ~VarianceProvider() = default;

  /// Conditional variance at mean mu for time t. `theta_hint` is a warm start
  /// for providers that solve for a tilt; others ignore it.
  VarianceEval var_for(double mu, std::size_t t, double theta_hint = 0.0) const {
    return evaluate(mu, t, theta_hint);
  }
  /// True when the provider fills theta/b in VarianceEval.
  virtual bool has_tilts() const noexcept { return false; }

 protected:
  virtual VarianceEval evaluate(double mu, std::size_t t, double theta_hint) const = 0;
};

class PoissonVariance final : public VarianceProvider {
 protected:
  VarianceEval evaluate(double mu, std::size_t, double) const override { return {mu}; }
};

class NegBinVariance final : public VarianceProvider {
 public:
  explicit NegBinVariance(double alpha) : alpha_(alpha) {}
  double alpha() const noexcept { return alpha_; }

 protected:
  VarianceEval evaluate(double mu, std::size_t, double) const override { return {mu + mu * mu / alpha_}; }

 private:
  double alpha_;
};

/// Variance of the tilt of a base support whose mean equals mu.
///
/// With `gauge_at_origin` set, t = 0 uses theta_0 = b_0 = 0 and the untilted
/// spread sum_k p_k (y_k - mu_0)^2 instead of solving for a tilt; otherwise
/// every t, including 0, is solved from the mean constraint.
class SemiparametricVariance final : public VarianceProvider {
 public:
  SemiparametricVariance(SupportView support, bool gauge_at_origin)
      : support_(support), gauge_(gauge_at_origin) {}
  bool has_tilts() const noexcept override { return true; }

 protected:
  VarianceEval evaluate(double mu, std::size_t t, double theta_hint) const override;

 private:
  SupportView support_;
  bool gauge_;
};

/// Runs the recursion for params over the covariate rows of `x`, obtaining
/// Y_t from `response(t, mu_t, var_t)`. Throws StateExplosion when
/// |W_t| > kStateGuard and propagates InfeasibleMean from the provider.
template <class Response>
FittedState run_recursion(const Eigen::MatrixXd& x, const MeanModelSpec& spec, const ModelParams& params,
                          const VarianceProvider& vp, Response&& response) {
  const auto n = static_cast<std::size_t>(x.rows());
  FittedState st;
  st.W.resize(n);
  st.Z.resize(n);
  st.e.resize(n);
  st.mu.resize(n);
  st.var.resize(n);
  if (vp.has_tilts()) {
    st.b.resize(n);
    st.theta.resize(n);
  }
  const Eigen::Map<const Eigen::VectorXd> beta(params.beta.data(), static_cast<Eigen::Index>(params.beta.size()));
  double hint = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    double z = 0.0;
    for (std::size_t i = 0; i < spec.ar_lags.size(); ++i) {
      const auto lag = static_cast<std::size_t>(spec.ar_lags[i]);
      if (t >= lag) z += params.phi[i] * (st.Z[t - lag] + st.e[t - lag]);
    }
    for (std::size_t j = 0; j < spec.ma_lags.size(); ++j) {
      const auto lag = static_cast<std::size_t>(spec.ma_lags[j]);
      if (t >= lag) z += params.psi[j] * st.e[t - lag];
    }
    const double w = x.row(static_cast<Eigen::Index>(t)).dot(beta) + z;
    if (!(std::abs(w) <= kStateGuard)) throw StateExplosion(t, w);
    const double mu = std::exp(w);
    const VarianceEval ve = vp.var_for(mu, t, hint);
    if (vp.has_tilts()) {
      st.theta[t] = ve.theta;
      st.b[t] = ve.b;
      hint = ve.theta;
    }
    const double y = response(t, mu, ve.variance);
    st.W[t] = w;
    st.Z[t] = z;
    st.mu[t] = mu;
    st.var[t] = ve.variance;
    st.e[t] = (spec.lambda == 0.5)   ? (y - mu) / std::sqrt(ve.variance)
              : (spec.lambda == 1.0) ? (y - mu) / ve.variance
                                     : (y - mu) / std::pow(ve.variance, spec.lambda);
  }
  return st;
}

/// Fitted state of the observed series `ts` under `params`.
FittedState recurse(const TimeSeries& ts, const MeanModelSpec& spec, const ModelParams& params,
                    const VarianceProvider& vp);

}  // namespace spglm
