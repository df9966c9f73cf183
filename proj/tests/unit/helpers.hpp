#pragma once

#include "core/linalg.hpp"
#include "core/rng.hpp"
#include "core/stats.hpp"
#include "core/types.hpp"

namespace ents::testing {

// N draws whose empirical mean and (1/(N-1)) covariance are exactly `mean`
// and `cov` up to rounding.
inline RowMatrix exact_moments(Index n, const Vector& mean, const Matrix& cov, std::uint64_t seed) {
  const Index d = mean.size();
  RowMatrix z = centered(RandomStream(seed, 77, 0, Purpose::Prior).standard_normal(n, d));
  const Matrix whiten = lower_inverse(cholesky_lower(empirical_cov(z)).lower);
  const Matrix l = cholesky_lower(cov).lower;
  RowMatrix out = z * (l * whiten).transpose();
  out.rowwise() += mean.transpose();
  return out;
}

inline RowMatrix normal_draws(Index n, const Vector& mean, const Matrix& cov, std::uint64_t seed) {
  const Matrix l = cholesky_lower(cov).lower;
  RowMatrix out = RandomStream(seed, 78, 0, Purpose::Prior).standard_normal(n, mean.size()) * l.transpose();
  out.rowwise() += mean.transpose();
  return out;
}

inline Matrix mat(Index r, Index c, std::initializer_list<double> v) {
  Matrix m(r, c);
  auto it = v.begin();
  for (Index i = 0; i < r; ++i)
    for (Index k = 0; k < c; ++k) m(i, k) = *it++;
  return m;
}

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline double max_rel_dev(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

}  // namespace ents::testing
