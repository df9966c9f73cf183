#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "core/ensemble.hpp"
#include "transport/sparsity.hpp"

namespace ents {

/// Affine lower-triangular map S(w) = C (w - mu).
///
/// C is block-lower-triangular and obeys the map's SparsityPattern exactly
/// (entries outside the pattern are 0). Each diagonal block is itself lower
/// triangular with a strictly positive diagonal, which makes every component
/// monotone in its own variable.
class AffineTriangularMap {
 public:
  AffineTriangularMap(Matrix coefficients, Vector shift, BlockLayout layout, SparsityPattern pattern);

  const Matrix& coefficients() const { return coefficients_; }
  const Vector& shift() const { return shift_; }
  const BlockLayout& layout() const { return layout_; }
  const SparsityPattern& pattern() const { return pattern_; }

 private:
  Matrix coefficients_;
  Vector shift_;
  BlockLayout layout_;
  SparsityPattern pattern_;
};

/// Values the conditioned prefix blocks are pinned to: one row shared by all
/// members, or one row per member.
class ConditioningSpec {
 public:
  ConditioningSpec(std::vector<std::string> labels, const Vector& fixed_values);
  ConditioningSpec(std::vector<std::string> labels, RowMatrix per_member_values);

  const std::vector<std::string>& labels() const { return labels_; }
  bool per_member() const { return per_member_; }
  Index dim() const { return values_.cols(); }

  /// Conditioning values for member i.
  auto row(Index i) const { return values_.row(per_member() ? i : 0); }

  /// Expands to an n-row matrix.
  RowMatrix values_for(Index members) const;

  /// Number of prefix blocks this spec pins in `layout`; throws if the
  /// labels are not exactly the first blocks of the layout.
  std::size_t prefix_blocks(const BlockLayout& layout) const;

 private:
  std::vector<std::string> labels_;
  RowMatrix values_;
  bool per_member_ = false;
};

/// Closed-form minimizer of the empirical KL objective over affine maps
/// that respect `pattern`.
///
/// Each row-block regresses its own variables on its active predecessors
/// (restricted normal equations of the empirical covariance) and whitens the
/// residual with the inverse Cholesky factor of the residual covariance. For
/// the dense pattern this is C = L^{-1} with Sigma = L L^T.
AffineTriangularMap fit_affine_map(const Ensemble& e, const SparsityPattern& pattern);

/// Unnormalized empirical objective sum_k sum_i (S_k(w_i)^2 / 2 - log dS_k/dw_k).
double kl_objective(const AffineTriangularMap& map, const Ensemble& e);

/// Pushes every member through the map: z_i = C (w_i - mu).
Ensemble forward(const AffineTriangularMap& map, const Ensemble& e);

/// Given reference values for the non-conditioned rows, solves
/// S_k(y*, w_<k, w_k) = z_k for the lower variables of every member by block
/// forward substitution. `z_tail` has one row per member (or one row per
/// member of `spec` when values are per member). Returns the lower variables.
RowMatrix invert_conditional(const AffineTriangularMap& map, const ConditioningSpec& spec, ConstRowRef z_tail);

/// Composite map T = S_x^{-1}(y*; .) o S_x(y, x): evaluates the lower rows on
/// each member's own (y_i, x_i), then inverts with the prefix pinned to the
/// conditioning values. Returns the updated lower blocks as an ensemble.
Ensemble composite_condition(const AffineTriangularMap& map, const Ensemble& e, const ConditioningSpec& spec);

/// x*_i = x_i - Sigma_xy Sigma_yy^{-1} (y_i - y*_i) with ensemble covariances.
RowMatrix gaussian_condition_direct(ConstRowRef x, ConstRowRef y, const ConditioningSpec& spec);

/// Same update with caller-supplied (e.g. exact) covariances.
RowMatrix gaussian_condition_with(ConstRowRef x, ConstRowRef y, const ConditioningSpec& spec, const Matrix& sigma_xy,
                                  const Matrix& sigma_yy);

/// Debug serialization: layout, pattern, shift and the dense coefficient matrix.
void write_map_json(std::ostream& os, const AffineTriangularMap& map);
void write_map_csv(std::ostream& os, const AffineTriangularMap& map);

}  // namespace ents
