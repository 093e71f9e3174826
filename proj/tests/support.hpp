#pragma once

#include "spglm/cli_io.hpp"
#include "spglm/data_model.hpp"

#include "spglm/tilt_core.hpp"

#include <algorithm>
#include <random>
#include <string>
#include <vector>

namespace spglm::test {

inline std::string data_path(const std::string& name) { return std::string(SPGLM_DATA_DIR) + "/" + name; }

inline TimeSeries polio() { return load_series(data_path("polio.csv")); }

inline MeanModelSpec polio_spec() {
  MeanModelSpec spec;
  spec.q = 6;
  spec.ma_lags = {1, 2, 5};
  return spec;
}

/// Intercept-only series with the given counts.
inline TimeSeries intercept_series(const std::vector<double>& y) {
  TimeSeries ts;
  ts.y = y;
  ts.x = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(y.size()), 1);
  ts.labels = {"Intercept"};
  return ts;
}

/// Random masses on `k` random distinct atoms.
inline AtomicDistribution random_distribution(std::mt19937_64& rng, std::size_t k, double spread = 10.0) {
  std::uniform_real_distribution<double> u(0.05, 1.0), a(-spread, spread);
  std::vector<double> atoms, w;
  while (atoms.size() < k) {
    const double v = a(rng);
    if (std::find(atoms.begin(), atoms.end(), v) == atoms.end()) {
      atoms.push_back(v);
      w.push_back(u(rng));
    }
  }
  return AtomicDistribution::from_weights(atoms, w);
}

}  // namespace spglm::test
