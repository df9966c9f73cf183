#pragma once

#include "core/types.hpp"

namespace ents {

struct CholeskyFactor {
  Matrix lower;         // L with L L^T = S + jitter * I
  double jitter = 0.0;  // absolute diagonal shift that was needed (0 when none)
};

/// Lower Cholesky factor with a deterministic, scale-aware jitter schedule.
///
/// When the plain factorization fails, eps * (trace(S) / D) * I is added with
/// eps = 1e-10, 1e-9, ..., 1e-4. If the matrix is still not positive definite
/// an Error(NotPositiveDefinite) reports the smallest LDL^T pivot. An all-zero
/// matrix raises Error(EnsembleCollapse). `what` names the matrix in messages.
CholeskyFactor cholesky_lower(const Matrix& s, const char* what = "matrix");

/// Solves S X = B for SPD S through cholesky_lower.
Matrix spd_solve(const Matrix& s, const Matrix& b, const char* what = "matrix");

/// Returns B S^{-1} for SPD S (the "gain" shape Sigma_ba Sigma_aa^{-1}).
Matrix spd_right_solve(const Matrix& b, const Matrix& s, const char* what = "matrix");

/// Inverse of a lower-triangular matrix with nonzero diagonal.
Matrix lower_inverse(const Matrix& l);

/// Symmetric positive-definite matrix. Construction checks symmetry to 1e-12
/// relative and positive definiteness via a jitter-free Cholesky factorization.
class SpdMatrix {
 public:
  explicit SpdMatrix(Matrix values);

  const Matrix& values() const { return values_; }
  Index dim() const { return values_.rows(); }

 private:
  Matrix values_;
};

bool is_symmetric(const Matrix& s, double rel_tol = 1e-12);

}  // namespace ents
