#pragma once

#include <Eigen/Dense>

namespace ents {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Ensemble storage: one row per member, variables contiguous within a row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowRef = Eigen::Ref<const RowMatrix>;

}  // namespace ents
