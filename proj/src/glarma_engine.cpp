#include "spglm/glarma_engine.hpp"

namespace spglm {

VarianceEval SemiparametricVariance::evaluate(double mu, std::size_t t, double theta_hint) const {
  if (gauge_ && t == 0) {
    if (!(mu > support_.values.front() + kHullMargin && mu < support_.values.back() - kHullMargin))
      throw InfeasibleMean("mean at t=0 outside the support hull");
    double v = 0.0;
    for (std::size_t k = 0; k < support_.values.size(); ++k) {
      const double d = support_.values[k] - mu;
      v += support_.masses[k] * d * d;
    }
    return {v, 0.0, 0.0};
  }
  const TiltSolution sol = solve_tilt(support_, mu, theta_hint);
  if (sol.capped) throw InfeasibleMean("tilt cap |theta| = 500 reached at t=" + std::to_string(t));
  return {sol.moments.variance, sol.theta, sol.moments.b};
}

FittedState recurse(const TimeSeries& ts, const MeanModelSpec& spec, const ModelParams& params,
                    const VarianceProvider& vp) {
  if (static_cast<std::size_t>(ts.x.rows()) != ts.y.size())
    throw DimensionMismatch("response and covariate rows differ");
  if (params.beta.size() != static_cast<std::size_t>(ts.x.cols()) || params.phi.size() != spec.ar_lags.size() ||
      params.psi.size() != spec.ma_lags.size())
    throw DimensionMismatch("parameter dimensions do not match the mean model");
  return run_recursion(ts.x, spec, params, vp, [&ts](std::size_t t, double, double) { return ts.y[t]; });
}

}  // namespace spglm
