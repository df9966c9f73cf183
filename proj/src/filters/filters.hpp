#pragma once

#include <vector>

#include "core/rng.hpp"
#include "core/types.hpp"
#include "ssm/model.hpp"

namespace ents {

/// How a conditioning step is realized: an explicitly fitted affine
/// transport map and its composite map, or the closed-form Kalman-type
/// update with ensemble covariances.
enum class Engine { Transport, Kalman };

struct GaussianBelief {
  Vector mean;
  Matrix cov;
};

struct KalmanFilterResult {
  std::vector<GaussianBelief> forecast;  // p(x_s | y*_{1:s-1})
  std::vector<GaussianBelief> analysis;  // p(x_s | y*_{1:s})
};

/// Exact predict/update recursion. `y_star` holds one observation per row.
KalmanFilterResult kalman_filter_exact(const LinearGaussianSpec& spec, ConstRowRef y_star);

/// Transport filter step: dense two-block map over (y, x) and its composite
/// map conditioned on y*.
RowMatrix entf_step(ConstRowRef x, ConstRowRef y, const Vector& y_star);

/// Perturbed-observation EnKF, X - S_xy S_yy^{-1} (Y - y*), coded directly
/// from ensemble anomalies without any map machinery.
RowMatrix stochastic_enkf_step(ConstRowRef x, ConstRowRef y, const Vector& y_star);

/// Serial update for observations whose k-th component only sees the k-th
/// state component. For k = 1..O in order, fresh predicted observations are
/// drawn from the current ensemble and the state is conditioned on y*_k
/// through the map over (y_k, x_k, rest) in which `rest` does not read y_k.
RowMatrix entf_sparse_step(ConstRowRef x, const StateSpaceModel& model, const Vector& y_star, const RandomStream& rng,
                           Engine engine = Engine::Transport);

/// EnKF with known H and R: X - S H^T (H S H^T + R)^{-1} (H X + eps - y*),
/// with eps one perturbation row per member.
RowMatrix semi_empirical_enkf_step(ConstRowRef x, ConstRowRef eps, const Matrix& h, const Matrix& r, const Vector& y_star);

}  // namespace ents
