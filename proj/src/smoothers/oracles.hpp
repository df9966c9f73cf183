#pragma once

#include <vector>

#include "filters/filters.hpp"

namespace ents {

struct RtsResult {
  KalmanFilterResult filter;
  std::vector<GaussianBelief> smoothed;  // p(x_s | y*_{1:t})
  Vector joint_mean;                     // stacked smoothed means, time-major
  Matrix joint_cov;                      // full t*D x t*D smoothing covariance
};

/// Kalman filter followed by the Rauch-Tung-Striebel backward recursion,
/// including all cross-time covariances.
RtsResult rts_exact(const LinearGaussianSpec& spec, ConstRowRef y_star);

/// Builds the joint Gaussian of (x_{1:t}, y_{1:t}) by explicit propagation
/// and conditions on y*_{1:t} in one step. Intended for small t.
GaussianBelief joint_gaussian_oracle(const LinearGaussianSpec& spec, ConstRowRef y_star);

}  // namespace ents
