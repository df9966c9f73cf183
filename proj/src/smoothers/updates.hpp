#pragma once

#include <utility>
#include <vector>

#include "core/types.hpp"
#include "filters/filters.hpp"

namespace ents {

/// Conditions every state in `states` on y* given their joint ensemble with
/// `y` (EnKS update). With the transport engine one map is fit over
/// [y, states...] in the given order; `decoupled` restricts every state row
/// to read only y and itself, the sparsest map whose composite still gives
/// the same affine update. Returns the updated states in the same order.
std::vector<RowMatrix> dense_update(ConstRowRef y, const Vector& y_star, const std::vector<RowMatrix>& states, Engine engine,
                                    bool decoupled = false);

/// One backward step: condition X_r on the already-smoothed X*_{r+1},
/// member by member, using the joint ensemble (X_{r+1}, X_r).
RowMatrix backward_update(ConstRowRef x_r, ConstRowRef x_next, ConstRowRef x_next_star, Engine engine);

struct ForwardGains {
  Matrix k;  // coefficient on y
  Matrix b;  // coefficient on x_{r-1}
};

/// Solves the coupled normal equations
///   [S_yy  S_yp; S_py  S_pp] [K^T; B^T] = -[S_yx; S_px]
/// for the affine forward row reading (y, x_prev, x).
ForwardGains forward_gains(ConstRowRef y, ConstRowRef x_prev, ConstRowRef x);

/// Forward step for r > first: X*_r = X_r - K (y* - Y) - B (X*_{r-1} - X_{r-1}).
RowMatrix forward_update(ConstRowRef y, const Vector& y_star, ConstRowRef x_prev, ConstRowRef x_prev_star, ConstRowRef x,
                         Engine engine);

/// Fixed-point update of the states `fixed` through the current state x_t:
/// x_t is conditioned on y*, and each fixed state on the updated x_t.
/// Returns (X*_t, fixed states updated).
std::pair<RowMatrix, std::vector<RowMatrix>> fixed_point_update(ConstRowRef y, const Vector& y_star, ConstRowRef x_t,
                                                                const std::vector<RowMatrix>& fixed, Engine engine);

/// Combined gain S_{j,t} S_{t,t}^{-1} S_{t,y} S_{y,y}^{-1}.
Matrix fixed_point_gain(ConstRowRef y, ConstRowRef x_t, ConstRowRef x_j);

/// EnKS with known H and R:
///   X* = X - S_{X,x_t} H^T (H S_{x_t} H^T + R)^{-1} (H X_t + eps - y*).
/// eps holds one row per member and stays tied to that member.
std::vector<RowMatrix> enks_semi_empirical(const std::vector<RowMatrix>& states, ConstRowRef x_t, ConstRowRef eps,
                                           const Vector& y_star, const Matrix& h, const Matrix& r);

/// EnRTSS step with known M and Q:
///   X*_r = X_r - S_r M^T (M S_r M^T + Q)^{-1} (M X_r + eps - X*_{r+1}).
RowMatrix enrtss_semi_empirical(ConstRowRef x_r, ConstRowRef eps, ConstRowRef x_next_star, const Matrix& m, const Matrix& q);

/// Mean absolute entry of S_ba S_aa^{-1} estimated from the ensembles.
double gain_magnitude(ConstRowRef b, ConstRowRef a);

/// Mean absolute deviation (1/N) sum_i |a_i - a*_i|, averaged over components.
double signal_magnitude(ConstRowRef a, ConstRowRef a_star);
double signal_magnitude_at(ConstRowRef a, const Vector& a_star);

}  // namespace ents
