#include "ssm/lorenz63.hpp"

#include <cmath>
#include <string>

#include "core/error.hpp"

namespace ents {

State3 lorenz63_rhs(const State3& x, const Lorenz63Params& p) {
  return State3(p.sigma * (x(1) - x(0)), x(0) * (p.rho - x(2)) - x(1), x(0) * x(1) - p.beta * x(2));
}

Lorenz63Model::Lorenz63Model(double obs_var, Lorenz63Params params, double substep, int substeps)
    : obs_var_(obs_var), params_(params), substep_(substep), substeps_(substeps) {
  if (obs_var < 0.0) fail(ErrorCode::InvalidArgument, "observation variance must be non-negative");
  if (!(substep > 0.0) || substeps < 1) fail(ErrorCode::InvalidArgument, "invalid RK4 step configuration");
}

State3 Lorenz63Model::propagate(const State3& x) const {
  const auto f = [this](const State3& v) { return lorenz63_rhs(v, params_); };
  State3 out = x;
  for (int k = 0; k < substeps_; ++k) out = rk4_step(f, out, substep_);
  return out;
}

RowMatrix Lorenz63Model::sample_prior(Index count, const RandomStream& rng) const { return rng.standard_normal(count, 3); }

RowMatrix Lorenz63Model::forecast(ConstRowRef states, const RandomStream&) const {
  if (states.cols() != 3) fail(ErrorCode::InvalidArgument, "Lorenz-63 states must be 3-dimensional");
  RowMatrix out(states.rows(), 3);
  for (Index i = 0; i < states.rows(); ++i) {
    const State3 next = propagate(states.row(i).transpose());
    if (!next.allFinite()) fail(ErrorCode::NonFinite, "Lorenz-63 forecast blew up for member " + std::to_string(i));
    out.row(i) = next.transpose();
  }
  return out;
}

RowMatrix Lorenz63Model::observe(ConstRowRef states, const RandomStream& rng) const {
  if (states.cols() != 3) fail(ErrorCode::InvalidArgument, "Lorenz-63 states must be 3-dimensional");
  return states + std::sqrt(obs_var_) * rng.standard_normal(states.rows(), 3);
}

std::optional<std::pair<Matrix, Matrix>> Lorenz63Model::linear_observation() const {
  return std::make_pair(Matrix(Matrix::Identity(3, 3)), Matrix(obs_var_ * Matrix::Identity(3, 3)));
}

}  // namespace ents
