#include "core/error.hpp"
#include "core/linalg.hpp"
#include "filters/filters.hpp"

namespace ents {

KalmanFilterResult kalman_filter_exact(const LinearGaussianSpec& spec, ConstRowRef y_star) {
  spec.validate();
  if (y_star.cols() != spec.obs_dim()) fail(ErrorCode::InvalidArgument, "observation sequence has the wrong dimension");
  const Matrix& m = spec.transition;
  const Matrix& h = spec.observation;

  KalmanFilterResult out;
  GaussianBelief f{spec.prior_mean, spec.prior_cov};
  for (Index s = 0; s < y_star.rows(); ++s) {
    if (s > 0) {
      const GaussianBelief& a = out.analysis.back();
      f.mean = m * a.mean;
      f.cov = m * a.cov * m.transpose() + spec.process_cov;
      f.cov = (0.5 * (f.cov + f.cov.transpose())).eval();
    }
    out.forecast.push_back(f);

    const Matrix innovation = h * f.cov * h.transpose() + spec.obs_cov;
    const Matrix gain = spd_right_solve(f.cov * h.transpose(), innovation, "innovation covariance");
    GaussianBelief a;
    a.mean = f.mean + gain * (y_star.row(s).transpose() - h * f.mean);
    a.cov = f.cov - gain * h * f.cov;
    a.cov = (0.5 * (a.cov + a.cov.transpose())).eval();
    out.analysis.push_back(std::move(a));
  }
  return out;
}

}  // namespace ents
