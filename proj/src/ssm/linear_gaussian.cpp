#include <cmath>

#include "core/error.hpp"
#include "core/linalg.hpp"
#include "ssm/model.hpp"

namespace ents {

namespace {

// Noise factor F with F F^T = S; an all-zero S gives a zero factor so that
// noise-free variants of a model are expressible.
Matrix noise_factor(const Matrix& s) {
  if (s.isZero(0.0)) return Matrix::Zero(s.rows(), s.cols());
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) fail(ErrorCode::NotPositiveDefinite, "noise covariance is not positive definite");
  return llt.matrixL();
}

void check_spd_or_zero(const Matrix& s, const char* what) {
  if (s.isZero(0.0)) return;
  try {
    SpdMatrix checked(s);
  } catch (const Error& err) {
    fail(err.code(), std::string(what) + ": " + err.what());
  }
}

}  // namespace

void LinearGaussianSpec::validate() const {
  const Index d = transition.rows();
  const Index o = observation.rows();
  if (transition.cols() != d || process_cov.rows() != d || process_cov.cols() != d || observation.cols() != d ||
      obs_cov.rows() != o || obs_cov.cols() != o || prior_mean.size() != d || prior_cov.rows() != d ||
      prior_cov.cols() != d) {
    fail(ErrorCode::InvalidArgument, "linear-Gaussian spec has inconsistent shapes");
  }
  check_spd_or_zero(process_cov, "process noise covariance");
  check_spd_or_zero(obs_cov, "observation noise covariance");
  check_spd_or_zero(prior_cov, "prior covariance");
}

LinearGaussianModel::LinearGaussianModel(std::string name, LinearGaussianSpec spec)
    : name_(std::move(name)), spec_(std::move(spec)) {
  spec_.validate();
  prior_factor_ = noise_factor(spec_.prior_cov);
  process_factor_ = noise_factor(spec_.process_cov);
  obs_factor_ = noise_factor(spec_.obs_cov);
}

RowMatrix LinearGaussianModel::sample_prior(Index count, const RandomStream& rng) const {
  RowMatrix x = rng.standard_normal(count, state_dim()) * prior_factor_.transpose();
  x.rowwise() += spec_.prior_mean.transpose();
  return x;
}

RowMatrix LinearGaussianModel::forecast(ConstRowRef states, const RandomStream& rng) const {
  if (states.cols() != state_dim()) fail(ErrorCode::InvalidArgument, "forecast: wrong state dimension");
  return states * spec_.transition.transpose() + rng.standard_normal(states.rows(), state_dim()) * process_factor_.transpose();
}

RowMatrix LinearGaussianModel::observe(ConstRowRef states, const RandomStream& rng) const {
  if (states.cols() != state_dim()) fail(ErrorCode::InvalidArgument, "observe: wrong state dimension");
  return states * spec_.observation.transpose() + rng.standard_normal(states.rows(), obs_dim()) * obs_factor_.transpose();
}

double ar1_prior_variance(double alpha) {
  const double a2 = alpha * alpha;
  return 0.5 * (a2 + std::sqrt(4.0 + a2 * a2));
}

std::unique_ptr<LinearGaussianModel> ar1_model(double alpha, double process_var, double obs_var) {
  LinearGaussianSpec spec;
  spec.transition = Matrix::Constant(1, 1, alpha);
  spec.process_cov = Matrix::Constant(1, 1, process_var);
  spec.observation = Matrix::Identity(1, 1);
  spec.obs_cov = Matrix::Constant(1, 1, obs_var);
  spec.prior_mean = Vector::Zero(1);
  spec.prior_cov = Matrix::Constant(1, 1, ar1_prior_variance(alpha));
  return std::make_unique<LinearGaussianModel>("ar1", std::move(spec));
}

}  // namespace ents
