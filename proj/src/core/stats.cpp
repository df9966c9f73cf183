#include "core/stats.hpp"

#include <string>

#include "core/error.hpp"

namespace ents {

Vector empirical_mean(ConstRowRef a) {
  if (a.rows() < 1) fail(ErrorCode::InsufficientMembers, "mean of an empty ensemble");
  return a.colwise().mean().transpose();
}

RowMatrix centered(ConstRowRef a) { return a.rowwise() - a.colwise().mean(); }

Matrix empirical_cross_cov(ConstRowRef a, ConstRowRef b) {
  if (a.rows() != b.rows()) {
    fail(ErrorCode::InvalidArgument, "cross-covariance of blocks with " + std::to_string(a.rows()) + " and " +
                                         std::to_string(b.rows()) + " members");
  }
  if (a.rows() < 2) fail(ErrorCode::InsufficientMembers, "covariance needs at least 2 members");
  const RowMatrix ca = centered(a);
  const RowMatrix cb = centered(b);
  return (ca.transpose() * cb) / static_cast<double>(a.rows() - 1);
}

Matrix empirical_cov(ConstRowRef a) {
  Matrix s = empirical_cross_cov(a, a);
  return 0.5 * (s + s.transpose());
}

}  // namespace ents
