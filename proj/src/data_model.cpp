#include "spglm/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace spglm {

StateExplosion::StateExplosion(std::size_t t, double w)
    : Error("state explosion at t=" + std::to_string(t) + " (W_t=" + std::to_string(w) + ")"), t_(t), w_(w) {}

StateExplosion::StateExplosion(std::size_t t, double w, const std::string& context)
    : Error("state explosion at t=" + std::to_string(t) + " (W_t=" + std::to_string(w) + "), " + context),
      t_(t),
      w_(w) {}

int MeanModelSpec::max_lag() const noexcept {
  int m = 0;
  for (int l : ar_lags) m = std::max(m, l);
  for (int l : ma_lags) m = std::max(m, l);
  return m;
}

namespace {

void check_lags(const std::vector<int>& lags, const char* what) {
  std::set<int> seen;
  for (int l : lags) {
    if (l <= 0) throw InputError(std::string(what) + " lags must be positive integers");
    if (!seen.insert(l).second) throw InputError(std::string("duplicate ") + what + " lag " + std::to_string(l));
  }
}

}  // namespace

void MeanModelSpec::validate() const {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw InputError("lambda must lie in (0, 1]");
  if (q == 0) throw InputError("at least one regression coefficient is required");
  check_lags(ar_lags, "AR");
  check_lags(ma_lags, "MA");
  if (!(bounds.beta_abs > 0) || !(bounds.arma_abs > 0) || !(bounds.alpha_lo > 0) ||
      !(bounds.alpha_hi > bounds.alpha_lo))
    throw InputError("invalid parameter bounds");
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> v;
  v.reserve(beta.size() + phi.size() + psi.size() + 1);
  v.insert(v.end(), beta.begin(), beta.end());
  v.insert(v.end(), phi.begin(), phi.end());
  v.insert(v.end(), psi.begin(), psi.end());
  if (aux) v.push_back(*aux);
  return v;
}

ModelParams ModelParams::unflatten(const MeanModelSpec& spec, const std::vector<double>& v, bool has_aux) {
  const std::size_t want = spec.mean_param_count() + (has_aux ? 1 : 0);
  if (v.size() != want)
    throw DimensionMismatch("parameter vector has " + std::to_string(v.size()) + " entries, expected " +
                            std::to_string(want));
  ModelParams p;
  auto it = v.begin();
  p.beta.assign(it, it + spec.q);
  it += spec.q;
  p.phi.assign(it, it + spec.ar_lags.size());
  it += spec.ar_lags.size();
  p.psi.assign(it, it + spec.ma_lags.size());
  it += spec.ma_lags.size();
  if (has_aux) p.aux = *it;
  return p;
}

bool ModelParams::within_bounds(const MeanModelSpec& spec) const {
  const auto& bd = spec.bounds;
  for (double b : beta)
    if (!(std::abs(b) <= bd.beta_abs)) return false;
  for (double a : phi)
    if (!(std::abs(a) < bd.arma_abs)) return false;
  for (double a : psi)
    if (!(std::abs(a) < bd.arma_abs)) return false;
  if (aux && !(*aux > bd.alpha_lo && *aux < bd.alpha_hi)) return false;
  return true;
}

void ModelParams::validate(const MeanModelSpec& spec) const {
  if (beta.size() != spec.q || phi.size() != spec.ar_lags.size() || psi.size() != spec.ma_lags.size())
    throw DimensionMismatch("parameter dimensions do not match the mean model");
  for (double v : flatten())
    if (!std::isfinite(v)) throw NonFiniteValue("non-finite parameter value");
  if (aux && !(*aux > 0)) throw InputError("dispersion must be strictly positive");
  if (!within_bounds(spec)) throw InputError("parameters outside the configured box bounds");
}

std::vector<std::string> parameter_names(const MeanModelSpec& spec, const std::vector<std::string>& labels,
                                         bool has_aux) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < spec.q; ++j)
    names.push_back(j < labels.size() && !labels[j].empty() ? labels[j] : "x" + std::to_string(j));
  for (int l : spec.ar_lags) names.push_back("AR lag " + std::to_string(l));
  for (int l : spec.ma_lags) names.push_back("MA lag " + std::to_string(l));
  if (has_aux) names.emplace_back("alpha");
  return names;
}

void FittedState::check_invariants(bool gauge) const {
  const std::size_t n = mu.size();
  if (W.size() != n || Z.size() != n || e.size() != n || var.size() != n)
    throw Error("fitted state vectors have inconsistent lengths");
  for (std::size_t t = 0; t < n; ++t) {
    if (!(mu[t] > 0)) throw Error("fitted mean not positive at t=" + std::to_string(t));
    if (!(var[t] > 0)) throw Error("fitted variance not positive at t=" + std::to_string(t));
  }
  if (gauge && (theta.empty() || b.empty() || theta[0] != 0.0 || b[0] != 0.0))
    throw Error("gauge theta_0 = b_0 = 0 violated");
}

TimeSeries validate_dataset(const TimeSeries& ts, const MeanModelSpec& spec, ResponseKind kind) {
  spec.validate();
  const auto rows = static_cast<std::size_t>(ts.x.rows());
  if (rows != ts.y.size())
    throw DimensionMismatch("response has " + std::to_string(ts.y.size()) + " rows but covariates have " +
                            std::to_string(rows));
  if (ts.covariates() != spec.q)
    throw DimensionMismatch("covariate matrix has " + std::to_string(ts.covariates()) + " columns, model expects " +
                            std::to_string(spec.q));
  if (ts.y.size() < static_cast<std::size_t>(spec.max_lag()) + 1 || ts.y.size() < 1)
    throw DimensionMismatch("series shorter than the largest ARMA lag + 1");
  if (!ts.labels.empty() && ts.labels.size() != spec.q)
    throw DimensionMismatch("label count does not match covariate columns");

  for (std::size_t t = 0; t < ts.y.size(); ++t) {
    const double v = ts.y[t];
    if (!std::isfinite(v)) throw NonFiniteValue("missing or non-finite response at t=" + std::to_string(t));
    if (kind == ResponseKind::Count && (v < 0 || v != std::floor(v))) {
      std::ostringstream os;
      os << "non-integer count " << v << " at t=" << t;
      throw NonIntegerCount(os.str());
    }
  }
  if (!ts.x.allFinite()) throw NonFiniteValue("missing or non-finite covariate value");
  return ts;
}

}  // namespace spglm
