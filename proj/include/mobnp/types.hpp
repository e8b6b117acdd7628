#pragma once

#include <Eigen/Dense>

#include <vector>

namespace mobnp {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;
using Eigen::VectorXi;

/// Cluster labels, one per item. Internally labels are 0-based and canonical
/// (numbered in order of first appearance); files use 1-based labels.
using Allocation = std::vector<int>;

} // namespace mobnp
