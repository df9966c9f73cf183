#include "core/ensemble.hpp"
#include "core/error.hpp"
#include "core/linalg.hpp"
#include "core/stats.hpp"
#include "filters/filters.hpp"
#include "transport/affine_map.hpp"

namespace ents {

namespace {

// Every member already reports y*: the update vanishes whatever the gain,
// even when the y ensemble is degenerate.
bool zero_signal(ConstRowRef y, const Vector& y_star) {
  return y.cols() == y_star.size() && (y.rowwise() - y_star.transpose()).isZero(0.0);
}

}  // namespace

RowMatrix entf_step(ConstRowRef x, ConstRowRef y, const Vector& y_star) {
  if (zero_signal(y, y_star)) return x;
  const Ensemble joint = Ensemble::concat({{"y", y}, {"x", x}});
  const AffineTriangularMap map = fit_affine_map(joint, SparsityPattern::dense(joint.layout()));
  return composite_condition(map, joint, ConditioningSpec({"y"}, y_star)).data();
}

RowMatrix stochastic_enkf_step(ConstRowRef x, ConstRowRef y, const Vector& y_star) {
  const Index n = x.rows();
  if (y.rows() != n) fail(ErrorCode::InvalidArgument, "state and observation ensembles differ in size");
  if (n < 2) fail(ErrorCode::InsufficientMembers, "EnKF needs at least two members");
  if (y.cols() != y_star.size()) fail(ErrorCode::InvalidArgument, "y* has the wrong dimension");
  if (zero_signal(y, y_star)) return x;

  const Matrix ax = x.rowwise() - x.colwise().mean();
  const Matrix ay = y.rowwise() - y.colwise().mean();
  const double scale = 1.0 / static_cast<double>(n - 1);
  const Matrix s_xy = scale * ax.transpose() * ay;
  const Matrix s_yy = scale * ay.transpose() * ay;

  // S_yy^{-1} via a pivoted LDL^T, independent of the Cholesky path used
  // by map fitting.
  const Eigen::LDLT<Matrix> ldlt(s_yy);
  const double tiny = 1e-13 * std::max(s_yy.diagonal().maxCoeff(), 1e-300);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= tiny).any()) {
    fail(ErrorCode::NotPositiveDefinite, "EnKF: observation covariance is singular");
  }
  const Matrix innovations = (y.rowwise() - y_star.transpose()).transpose();  // O x N
  const Matrix update = s_xy * ldlt.solve(innovations);                      // D x N
  return x - update.transpose();
}

RowMatrix entf_sparse_step(ConstRowRef x, const StateSpaceModel& model, const Vector& y_star, const RandomStream& rng,
                           Engine engine) {
  const Index d = x.cols();
  const Index o = model.obs_dim();
  if (model.state_dim() != d || o != d) {
    fail(ErrorCode::InvalidArgument, "sparse filtering needs one observation component per state component");
  }
  if (y_star.size() != o) fail(ErrorCode::InvalidArgument, "y* has the wrong dimension");

  RowMatrix cur = x;
  std::vector<Index> rest_cols;
  for (Index k = 0; k < o; ++k) {
    const RowMatrix y = model.observe(cur, rng.derive(static_cast<std::uint64_t>(k))).col(k);
    rest_cols.clear();
    for (Index c = 0; c < d; ++c) {
      if (c != k) rest_cols.push_back(c);
    }
    const RowMatrix xk = cur.col(k);
    const RowMatrix rest = cur(Eigen::all, rest_cols);
    const Vector target = Vector::Constant(1, y_star(k));

    RowMatrix new_xk;
    RowMatrix new_rest;
    if (engine == Engine::Transport) {
      std::vector<std::pair<std::string, ConstRowRef>> parts{{"y", y}, {"xk", xk}};
      if (!rest_cols.empty()) parts.emplace_back("rest", rest);
      const Ensemble joint = Ensemble::concat(parts);
      const SparsityPattern pattern = rest_cols.empty() ? SparsityPattern::dense(joint.layout())
                                                        : SparsityPattern(joint.layout(), {{"xk", {"y"}}, {"rest", {"xk"}}});
      const RowMatrix post = composite_condition(fit_affine_map(joint, pattern), joint, ConditioningSpec({"y"}, target)).data();
      new_xk = post.col(0);
      new_rest = post.rightCols(post.cols() - 1);
    } else {
      new_xk = gaussian_condition_direct(xk, y, ConditioningSpec({"y"}, target));
      if (!rest_cols.empty()) new_rest = gaussian_condition_direct(rest, xk, ConditioningSpec({"xk"}, new_xk));
    }
    cur.col(k) = new_xk.col(0);
    for (std::size_t j = 0; j < rest_cols.size(); ++j) cur.col(rest_cols[j]) = new_rest.col(static_cast<Index>(j));
  }
  return cur;
}

RowMatrix semi_empirical_enkf_step(ConstRowRef x, ConstRowRef eps, const Matrix& h, const Matrix& r, const Vector& y_star) {
  if (h.cols() != x.cols() || h.rows() != r.rows() || eps.cols() != h.rows() || eps.rows() != x.rows() ||
      y_star.size() != h.rows()) {
    fail(ErrorCode::InvalidArgument, "semi-empirical EnKF: inconsistent shapes");
  }
  const Matrix s = empirical_cov(x);
  const Matrix innovation = h * s * h.transpose() + r;
  const Matrix gain = spd_right_solve(s * h.transpose(), innovation, "innovation covariance");
  const RowMatrix yhat = (x * h.transpose() + eps).rowwise() - y_star.transpose();
  return x - yhat * gain.transpose();
}

}  // namespace ents
