#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <utility>

namespace dcp {

// Regression training data: an n x p feature matrix with n responses.
struct Dataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd responses;

  Dataset() = default;
  Dataset(Eigen::MatrixXd x, Eigen::VectorXd y)
      : features(std::move(x)), responses(std::move(y)) {
    validate();
  }

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index p() const { return features.cols(); }

  void validate() const {
    if (features.rows() < 1 || features.cols() < 1)
      throw std::invalid_argument("dataset: need at least one row and one column");
    if (features.rows() != responses.size())
      throw std::invalid_argument("dataset: feature rows and response length differ");
    if (!features.allFinite() || !responses.allFinite())
      throw std::invalid_argument("dataset: entries must be finite");
  }
};

}  // namespace dcp
