#pragma once

// Maps between a full parameter vector and the free coordinates the
// optimizer sees when some entries are frozen.

#include <Eigen/Dense>

#include <vector>

namespace spglm::detail {

class ParamMap {
 public:
  ParamMap(std::vector<double> full, const std::vector<bool>& frozen) : full_(std::move(full)) {
    for (std::size_t i = 0; i < full_.size(); ++i)
      if (!frozen[i]) free_.push_back(i);
  }

  Eigen::VectorXd free_part(const std::vector<double>& full) const {
    Eigen::VectorXd z(static_cast<Eigen::Index>(free_.size()));
    for (std::size_t k = 0; k < free_.size(); ++k) z[static_cast<Eigen::Index>(k)] = full[free_[k]];
    return z;
  }
  std::vector<double> expand(const Eigen::VectorXd& z) const {
    std::vector<double> full = full_;
    for (std::size_t k = 0; k < free_.size(); ++k) full[free_[k]] = z[static_cast<Eigen::Index>(k)];
    return full;
  }
  const std::vector<std::size_t>& free_indices() const noexcept { return free_; }
  std::size_t size() const noexcept { return full_.size(); }

 private:
  std::vector<double> full_;
  std::vector<std::size_t> free_;
};

}  // namespace spglm::detail
