#pragma once

#include "core/types.hpp"

namespace ents {

// Column means of an ensemble block (rows are members).
Vector empirical_mean(ConstRowRef a);

/// Unbiased (1/(N-1)) cross-covariance between two blocks of the same
/// ensemble: result is cols(a) x cols(b). Throws if member counts differ.
Matrix empirical_cross_cov(ConstRowRef a, ConstRowRef b);

Matrix empirical_cov(ConstRowRef a);

/// Rows minus the column mean.
RowMatrix centered(ConstRowRef a);

}  // namespace ents
