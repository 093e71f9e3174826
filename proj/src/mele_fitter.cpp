#include "spglm/mele_fitter.hpp"

#include "param_map.hpp"
#include "spglm/glarma_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace spglm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Support {
  std::vector<double> values;
  std::vector<double> counts;
  std::vector<std::size_t> index;  // observation -> value slot
};

Support support_of(const std::vector<double>& y) {
  std::map<double, std::size_t> slot;
  for (double v : y) slot.emplace(v, 0);
  Support s;
  for (auto& [v, k] : slot) {
    k = s.values.size();
    s.values.push_back(v);
  }
  if (s.values.size() < 2) throw DegenerateSupport("responses take fewer than two distinct values");
  s.counts.assign(s.values.size(), 0.0);
  s.index.resize(y.size());
  for (std::size_t t = 0; t < y.size(); ++t) {
    s.index[t] = slot[y[t]];
    s.counts[s.index[t]] += 1.0;
  }
  return s;
}

void softmax(const std::vector<double>& logits, std::vector<double>& out) {
  const double m = *std::max_element(logits.begin(), logits.end());
  out.resize(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) sum += (out[k] = std::exp(logits[k] - m));
  for (double& p : out) p /= sum;
}

double data_term(const TimeSeries& ts, const FittedState& st, std::size_t from) {
  double l = 0.0;
  for (std::size_t t = from; t < ts.y.size(); ++t) l += st.b[t] + st.theta[t] * ts.y[t];
  return l;
}

/// Optimization layout: free mean parameters followed by free logits.
class Layout {
 public:
  Layout(const MeanModelSpec& spec, const std::vector<FrozenParam>& frozen, std::size_t n_values,
         std::vector<std::size_t> pinned)
      : m_(spec.mean_param_count()), k_(n_values), pinned_(std::move(pinned)) {
    frozen_.assign(m_, false);
    frozen_values_.assign(m_, 0.0);
    for (const FrozenParam& f : frozen) {
      if (f.index >= m_) throw InputError("frozen parameter index out of range");
      frozen_[f.index] = true;
      frozen_values_[f.index] = f.value;
    }
    for (std::size_t i = 0; i < m_; ++i)
      if (!frozen_[i]) free_mean_.push_back(i);
    for (std::size_t k = 0; k < k_; ++k)
      if (std::find(pinned_.begin(), pinned_.end(), k) == pinned_.end()) free_logit_.push_back(k);
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(free_mean_.size() + free_logit_.size()); }

  Eigen::VectorXd pack(const std::vector<double>& mean, const std::vector<double>& logits) const {
    Eigen::VectorXd z(size());
    Eigen::Index i = 0;
    for (std::size_t j : free_mean_) z[i++] = mean[j];
    for (std::size_t k : free_logit_) z[i++] = logits[k];
    return z;
  }
  void unpack(const Eigen::VectorXd& z, std::vector<double>& mean, std::vector<double>& logits) const {
    mean = frozen_values_;
    logits.assign(k_, 0.0);
    Eigen::Index i = 0;
    for (std::size_t j : free_mean_) mean[j] = z[i++];
    for (std::size_t k : free_logit_) logits[k] = z[i++];
  }
  bool frozen(std::size_t j) const { return frozen_[j]; }

 private:
  std::size_t m_, k_;
  std::vector<std::size_t> pinned_;
  std::vector<bool> frozen_;
  std::vector<double> frozen_values_;
  std::vector<std::size_t> free_mean_, free_logit_;
};

bool mean_in_bounds(const MeanModelSpec& spec, const Layout& layout, const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (layout.frozen(i)) continue;
    if (i < spec.q ? !(std::abs(v[i]) <= spec.bounds.beta_abs) : !(std::abs(v[i]) < spec.bounds.arma_abs))
      return false;
  }
  return true;
}

/// Logits reproducing masses P up to the tilt family, with the pinned slots at 0.
std::vector<double> pinned_logits(const std::vector<double>& values, const std::vector<double>& P,
                                  const std::vector<std::size_t>& pins) {
  std::vector<double> L(P.size());
  for (std::size_t k = 0; k < P.size(); ++k) L[k] = std::log(P[k]);
  double c = 0.0;
  if (pins.size() == 2) c = -(L[pins[0]] - L[pins[1]]) / (values[pins[0]] - values[pins[1]]);
  const double a = -(L[pins[0]] + c * values[pins[0]]);
  for (std::size_t k = 0; k < P.size(); ++k) L[k] += a + c * values[k];
  for (std::size_t p : pins) L[p] = 0.0;
  return L;
}

std::vector<std::size_t> most_frequent(const Support& s, std::size_t how_many) {
  std::vector<std::size_t> order(s.values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.counts[a] > s.counts[b]; });
  order.resize(how_many);
  return order;
}

AtomicDistribution per_observation(const TimeSeries& ts, const Support& s, const std::vector<double>& P) {
  std::vector<double> w(ts.y.size());
  for (std::size_t t = 0; t < ts.y.size(); ++t) w[t] = P[s.index[t]] / s.counts[s.index[t]];
  return AtomicDistribution::from_weights(ts.y, std::move(w));
}

std::vector<double> aggregated_masses(const AtomicDistribution& d, const Support& s) {
  std::vector<double> P(s.values.size(), 0.0);
  for (std::size_t j = 0; j < d.size(); ++j) P[s.index[j]] += d.masses()[j];
  return P;
}

ModelParams default_start(const TimeSeries& ts, const MeanModelSpec& spec, const std::vector<FrozenParam>& frozen) {
  ParametricOptions po;
  po.frozen = frozen;
  po.compute_se = false;
  try {
    return fit_poisson(ts, spec, po).params;
  } catch (const Error&) {
    ModelParams p;
    p.beta = irls_poisson(ts);
    p.phi.assign(spec.ar_lags.size(), 0.0);
    p.psi.assign(spec.ma_lags.size(), 0.0);
    std::vector<double> v = p.flatten();
    for (const FrozenParam& f : frozen) v[f.index] = f.value;
    return ModelParams::unflatten(spec, v, false);
  }
}

}  // namespace

FittedState semiparametric_state(const TimeSeries& ts, const MeanModelSpec& spec, const ModelParams& params,
                                 const AtomicDistribution& dist) {
  return recurse(ts, spec, params, SemiparametricVariance(dist.view(), false));
}

double loglik_at(const TimeSeries& ts, const MeanModelSpec& spec, const ModelParams& params,
                 const AtomicDistribution& dist) {
  if (dist.size() != ts.y.size()) throw DimensionMismatch("distribution must have one atom per observation");
  for (std::size_t t = 0; t < ts.y.size(); ++t)
    if (dist.atoms()[t] != ts.y[t]) throw InputError("distribution atoms must equal the observed responses");
  const FittedState st = semiparametric_state(ts, spec, params, dist);
  double l = 0.0;
  for (std::size_t t = 0; t < ts.y.size(); ++t) l += std::log(dist.masses()[t]);
  return l + data_term(ts, st, 0);
}

SemiparametricFitResult fit_semiparametric(const TimeSeries& ts, const MeanModelSpec& spec, const MeleOptions& opt) {
  spec.validate();
  const Support sup = support_of(ts.y);
  const std::size_t K = sup.values.size();
  const double N = static_cast<double>(ts.y.size());
  const bool profile = opt.gauge == Gauge::Profile;

  const std::vector<std::size_t> pins = most_frequent(sup, profile ? 2 : 1);
  const Layout layout(spec, opt.frozen, K, pins);

  // Objective pieces shared by both gauge modes.
  struct Eval {
    double loglik = -kInf;  // empirical loglik under the gauge's theta_0 convention
    double g = 0.0;         // t = 0 mean-constraint residual
  };
  std::vector<double> P;
  auto evaluate = [&](const std::vector<double>& mean, const std::vector<double>& logits) -> Eval {
    softmax(logits, P);
    double base = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      if (!(P[k] / sup.counts[k] >= kMassFloor)) return {};
      base += sup.counts[k] * std::log(P[k] / sup.counts[k]);
    }
    const ModelParams params = ModelParams::unflatten(spec, mean, false);
    const SupportView view{sup.values, P};
    try {
      const FittedState st = recurse(ts, spec, params, SemiparametricVariance(view, !profile));
      if (profile) {
        // The reported masses are the gauge-fixed tilt at theta_0; they must clear the floor too.
        for (std::size_t k = 0; k < K; ++k)
          if (!(P[k] / sup.counts[k] * std::exp(st.b[0] + st.theta[0] * sup.values[k]) >= kMassFloor)) return {};
      }
      Eval e;
      e.loglik = base + data_term(ts, st, profile ? 0 : 1);
      if (!profile) {
        for (std::size_t k = 0; k < K; ++k) e.g += P[k] * (sup.values[k] - st.mu[0]);
      }
      return e;
    } catch (const InfeasibleMean&) {
      return {};
    } catch (const StateExplosion&) {
      return {};
    }
  };

  // Starting point.
  ModelParams start = opt.start ? *opt.start : default_start(ts, spec, opt.frozen);
  std::vector<double> mean0 = start.flatten();
  mean0.resize(spec.mean_param_count());
  for (const FrozenParam& f : opt.frozen) mean0[f.index] = f.value;
  std::vector<double> P0(K);
  if (opt.start_dist) {
    if (opt.start_dist->size() != ts.y.size()) throw DimensionMismatch("start distribution size mismatch");
    P0 = aggregated_masses(*opt.start_dist, sup);
  } else {
    for (std::size_t k = 0; k < K; ++k) P0[k] = sup.counts[k] / N;
  }
  if (!profile) {
    // Penalty mode starts on the gauge constraint: tilt P0 so its mean is mu_0.
    try {
      const FittedState st =
          semiparametric_state(ts, spec, ModelParams::unflatten(spec, mean0, false), per_observation(ts, sup, P0));
      const std::vector<double> w = tilted_weights({sup.values, P0}, st.theta[0]);
      P0 = w;
    } catch (const Error&) {
    }
  }
  std::vector<double> logits0 = pinned_logits(sup.values, P0, pins);
  Eigen::VectorXd z = layout.pack(mean0, logits0);

  auto loglik_of = [&](const Eigen::VectorXd& zz) {
    std::vector<double> mean, logits;
    layout.unpack(zz, mean, logits);
    if (!mean_in_bounds(spec, layout, mean)) return Eval{};
    return evaluate(mean, logits);
  };

  Eval e0 = loglik_of(z);
  if (!std::isfinite(e0.loglik)) {
    // Fall back to the regression-only start with uniform masses.
    ModelParams p;
    p.beta = irls_poisson(ts);
    p.phi.assign(spec.ar_lags.size(), 0.0);
    p.psi.assign(spec.ma_lags.size(), 0.0);
    mean0 = p.flatten();
    for (const FrozenParam& f : opt.frozen) mean0[f.index] = f.value;
    for (std::size_t k = 0; k < K; ++k) P0[k] = sup.counts[k] / N;
    logits0 = pinned_logits(sup.values, P0, pins);
    z = layout.pack(mean0, logits0);
    e0 = loglik_of(z);
    if (!std::isfinite(e0.loglik)) throw ConvergenceError("no feasible starting point for the semiparametric fit");
  }

  int iterations = 0, rounds = 0;
  bool converged = false;
  std::string message;
  double last = -kInf;

  if (profile) {
    const optim::Objective f = [&](const Eigen::VectorXd& zz) {
      const double l = loglik_of(zz).loglik;
      return std::isfinite(l) ? -l : kInf;
    };
    for (rounds = 1; rounds <= opt.max_rounds; ++rounds) {
      const optim::Result r = optim::minimize_bfgs(f, z, opt.optimizer);
      iterations += r.iterations;
      z = r.x;
      message = r.message;
      const double l = -r.f;
      if (std::isfinite(last) && std::abs(l - last) <= opt.round_ftol * std::max(1.0, std::abs(l))) {
        converged = true;
        break;
      }
      last = l;
    }
  } else {
    double nu = 0.0;
    double rho = 10.0;
    for (rounds = 1; rounds <= opt.max_rounds; ++rounds) {
      const optim::Objective f = [&](const Eigen::VectorXd& zz) {
        const Eval e = loglik_of(zz);
        if (!std::isfinite(e.loglik)) return kInf;
        return -e.loglik + nu * e.g + rho * e.g * e.g;
      };
      const optim::Result r = optim::minimize_bfgs(f, z, opt.optimizer);
      iterations += r.iterations;
      z = r.x;
      message = r.message;
      const Eval e = loglik_of(z);
      std::vector<double> mean, logits;
      layout.unpack(z, mean, logits);
      const double mu0 = std::exp(ts.x.row(0).dot(Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(spec.q))));
      const bool feasible = std::abs(e.g) <= 1e-6 * (1.0 + mu0);
      if (feasible && std::isfinite(last) &&
          std::abs(e.loglik - last) <= opt.round_ftol * std::max(1.0, std::abs(e.loglik))) {
        converged = true;
        break;
      }
      last = e.loglik;
      nu += 2.0 * rho * e.g;
      rho = std::min(rho * 10.0, 1e6);
    }
  }

  // Final gauge-fixed quantities.
  std::vector<double> mean, logits, P_hat;
  layout.unpack(z, mean, logits);
  softmax(logits, P_hat);
  const ModelParams params = ModelParams::unflatten(spec, mean, false);
  FittedState state;
  if (profile) {
    // Shift to theta_0 = b_0 = 0 in closed form: p -> p e^{b_0 + theta_0 y},
    // theta_t -> theta_t - theta_0, b_t -> b_t - b_0. Means and variances are
    // unchanged, so nothing is re-solved.
    state = recurse(ts, spec, params, SemiparametricVariance({sup.values, P_hat}, false));
    const double theta0 = state.theta[0], b0 = state.b[0];
    for (std::size_t k = 0; k < K; ++k) P_hat[k] *= std::exp(b0 + theta0 * sup.values[k]);
    for (std::size_t t = 0; t < state.theta.size(); ++t) {
      state.theta[t] -= theta0;
      state.b[t] -= b0;
    }
  }
  AtomicDistribution dist = per_observation(ts, sup, P_hat);
  const SupportView view = dist.view();
  if (!profile) state = recurse(ts, spec, params, SemiparametricVariance(view, true));
  state.check_invariants(true);
  double g = 0.0;
  for (std::size_t k = 0; k < view.values.size(); ++k) g += view.masses[k] * (view.values[k] - state.mu[0]);

  double l = 0.0;
  for (double p : dist.masses()) l += std::log(p);
  l += data_term(ts, state, 1);

  SemiparametricFitResult res{.params = params, .dist = std::move(dist), .state = {}, .message = {}};
  res.loglik = l;
  res.start_loglik = e0.loglik;
  res.state = std::move(state);
  res.gauge_residual = std::abs(g);
  res.iterations = iterations;
  res.rounds = std::min(rounds, opt.max_rounds);
  res.converged = converged && res.gauge_residual <= 1e-6 * (1.0 + std::abs(res.state.mu[0]));
  res.message = converged ? "converged" : "round limit reached (" + message + ")";
  return res;
}

StepCdf::StepCdf(const AtomicDistribution& dist) : values_(dist.support_values()) {
  cum_.resize(values_.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k) cum_[k] = (acc += dist.support_masses()[k]);
  cum_.back() = 1.0;
}

double StepCdf::operator()(double y) const {
  const auto it = std::upper_bound(values_.begin(), values_.end(), y);
  if (it == values_.begin()) return 0.0;
  return std::min(1.0, cum_[static_cast<std::size_t>(it - values_.begin()) - 1]);
}

StepCdf mele_cdf(const SemiparametricFitResult& fit) { return StepCdf(fit.dist); }

}  // namespace spglm
