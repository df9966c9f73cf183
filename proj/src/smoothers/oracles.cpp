#include "smoothers/oracles.hpp"

#include "core/error.hpp"
#include "core/linalg.hpp"

namespace ents {

RtsResult rts_exact(const LinearGaussianSpec& spec, ConstRowRef y_star) {
  RtsResult out;
  out.filter = kalman_filter_exact(spec, y_star);
  const Index t = y_star.rows();
  const Index d = spec.state_dim();
  const Matrix& m = spec.transition;

  out.smoothed.resize(static_cast<std::size_t>(t));
  std::vector<Matrix> j_gain(static_cast<std::size_t>(t));
  out.smoothed.back() = out.filter.analysis.back();
  for (Index s = t - 2; s >= 0; --s) {
    const auto us = static_cast<std::size_t>(s);
    const GaussianBelief& a = out.filter.analysis[us];
    const GaussianBelief& f_next = out.filter.forecast[us + 1];
    const GaussianBelief& sm_next = out.smoothed[us + 1];
    j_gain[us] = spd_right_solve(a.cov * m.transpose(), f_next.cov, "forecast covariance");
    GaussianBelief sm;
    sm.mean = a.mean + j_gain[us] * (sm_next.mean - f_next.mean);
    sm.cov = a.cov + j_gain[us] * (sm_next.cov - f_next.cov) * j_gain[us].transpose();
    sm.cov = (0.5 * (sm.cov + sm.cov.transpose())).eval();
    out.smoothed[us] = std::move(sm);
  }

  out.joint_mean.resize(t * d);
  out.joint_cov.resize(t * d, t * d);
  for (Index s = 0; s < t; ++s) {
    const auto us = static_cast<std::size_t>(s);
    out.joint_mean.segment(s * d, d) = out.smoothed[us].mean;
    // Cov(x_r, x_s | y*) = J_r J_{r+1} ... J_{s-1} P_s for r < s.
    Matrix block = out.smoothed[us].cov;
    out.joint_cov.block(s * d, s * d, d, d) = block;
    for (Index r = s - 1; r >= 0; --r) {
      block = j_gain[static_cast<std::size_t>(r)] * block;
      out.joint_cov.block(r * d, s * d, d, d) = block;
      out.joint_cov.block(s * d, r * d, d, d) = block.transpose();
    }
  }
  return out;
}

GaussianBelief joint_gaussian_oracle(const LinearGaussianSpec& spec, ConstRowRef y_star) {
  spec.validate();
  const Index t = y_star.rows();
  const Index d = spec.state_dim();
  const Index o = spec.obs_dim();
  if (t < 1 || y_star.cols() != o) fail(ErrorCode::InvalidArgument, "oracle: bad observation sequence");
  const Matrix& m = spec.transition;
  const Matrix& h = spec.observation;

  // Prior moments of x_{1:t}: mean_s = M^{s-1} mu, Cov(x_r, x_s) = Cov(x_r) (M^{s-r})^T.
  Vector mx(t * d);
  Matrix sxx = Matrix::Zero(t * d, t * d);
  Vector mean = spec.prior_mean;
  Matrix var = spec.prior_cov;
  for (Index s = 0; s < t; ++s) {
    if (s > 0) {
      mean = m * mean;
      var = m * var * m.transpose() + spec.process_cov;
    }
    mx.segment(s * d, d) = mean;
    Matrix cross = var;  // Cov(x_s, x_u) for u >= s
    for (Index u = s; u < t; ++u) {
      if (u > s) cross = cross * m.transpose();
      sxx.block(s * d, u * d, d, d) = cross;
      sxx.block(u * d, s * d, d, d) = cross.transpose();
    }
  }

  Matrix hb = Matrix::Zero(t * o, t * d);
  Matrix rb = Matrix::Zero(t * o, t * o);
  for (Index s = 0; s < t; ++s) {
    hb.block(s * o, s * d, o, d) = h;
    rb.block(s * o, s * o, o, o) = spec.obs_cov;
  }
  const Vector my = hb * mx;
  const Matrix sxy = sxx * hb.transpose();
  const Matrix syy = hb * sxx * hb.transpose() + rb;

  Vector ys(t * o);
  for (Index s = 0; s < t; ++s) ys.segment(s * o, o) = y_star.row(s).transpose();

  const Eigen::LLT<Matrix> llt(syy);
  if (llt.info() != Eigen::Success) fail(ErrorCode::NotPositiveDefinite, "oracle: observation covariance is not SPD");
  GaussianBelief out;
  out.mean = mx + sxy * llt.solve(ys - my);
  out.cov = sxx - sxy * llt.solve(sxy.transpose());
  out.cov = (0.5 * (out.cov + out.cov.transpose())).eval();
  return out;
}

}  // namespace ents
