#pragma once

#include <array>
#include <functional>

#include "ssm/model.hpp"

namespace ents {

using State3 = Eigen::Vector3d;

struct Lorenz63Params {
  double sigma = 10.0;
  double beta = 8.0 / 3.0;
  double rho = 28.0;
};

State3 lorenz63_rhs(const State3& x, const Lorenz63Params& p = {});

/// One classical fourth-order Runge-Kutta step of dx/dt = f(x).
template <class F, class V>
V rk4_step(const F& f, const V& x, double h) {
  const V k1 = f(x);
  const V k2 = f(V(x + 0.5 * h * k1));
  const V k3 = f(V(x + 0.5 * h * k2));
  const V k4 = f(V(x + h * k3));
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Deterministic Lorenz-63 dynamics (two RK4 substeps of 0.05, so one
/// forecast spans 0.1 time units) with y = x + N(0, obs_var I).
class Lorenz63Model final : public StateSpaceModel {
 public:
  explicit Lorenz63Model(double obs_var = 4.0, Lorenz63Params params = {}, double substep = 0.05, int substeps = 2);

  std::string name() const override { return "lorenz63"; }
  Index state_dim() const override { return 3; }
  Index obs_dim() const override { return 3; }

  /// Standard Gaussian prior N(0, I_3).
  RowMatrix sample_prior(Index count, const RandomStream& rng) const override;

  /// Throws Error(NonFinite) naming the first member whose trajectory blew up.
  RowMatrix forecast(ConstRowRef states, const RandomStream& rng) const override;
  RowMatrix observe(ConstRowRef states, const RandomStream& rng) const override;

  std::optional<std::pair<Matrix, Matrix>> linear_observation() const override;

  State3 propagate(const State3& x) const;

 private:
  double obs_var_;
  Lorenz63Params params_;
  double substep_;
  int substeps_;
};

}  // namespace ents
