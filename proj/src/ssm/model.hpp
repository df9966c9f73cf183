#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "core/rng.hpp"
#include "core/types.hpp"

namespace ents {

/// x_{s+1} = M x_s + N(0, Q),  y_s = H x_s + N(0, R),  x_1 ~ N(prior_mean, prior_cov).
struct LinearGaussianSpec {
  Matrix transition;     // M
  Matrix process_cov;    // Q
  Matrix observation;    // H
  Matrix obs_cov;        // R
  Vector prior_mean;
  Matrix prior_cov;

  Index state_dim() const { return transition.rows(); }
  Index obs_dim() const { return observation.rows(); }

  /// Checks shapes and that Q, R and the prior covariance are SPD.
  void validate() const;
};

/// Sampler triple (prior, forecast kernel, observation kernel).
///
/// forecast and observe act member-wise and preserve member order: row i of
/// the output is produced from row i of the input with member stream i.
class StateSpaceModel {
 public:
  virtual ~StateSpaceModel() = default;

  virtual std::string name() const = 0;
  virtual Index state_dim() const = 0;
  virtual Index obs_dim() const = 0;

  virtual RowMatrix sample_prior(Index count, const RandomStream& rng) const = 0;
  virtual RowMatrix forecast(ConstRowRef states, const RandomStream& rng) const = 0;
  virtual RowMatrix observe(ConstRowRef states, const RandomStream& rng) const = 0;

  /// Exact description when the model is linear-Gaussian.
  virtual const LinearGaussianSpec* linear_gaussian() const { return nullptr; }

  /// Observation operator and noise covariance when observations are
  /// linear with additive Gaussian noise (needed by semi-empirical updates).
  virtual std::optional<std::pair<Matrix, Matrix>> linear_observation() const { return std::nullopt; }
};

class LinearGaussianModel final : public StateSpaceModel {
 public:
  LinearGaussianModel(std::string name, LinearGaussianSpec spec);

  std::string name() const override { return name_; }
  Index state_dim() const override { return spec_.state_dim(); }
  Index obs_dim() const override { return spec_.obs_dim(); }

  RowMatrix sample_prior(Index count, const RandomStream& rng) const override;
  RowMatrix forecast(ConstRowRef states, const RandomStream& rng) const override;
  RowMatrix observe(ConstRowRef states, const RandomStream& rng) const override;

  const LinearGaussianSpec* linear_gaussian() const override { return &spec_; }
  std::optional<std::pair<Matrix, Matrix>> linear_observation() const override {
    return std::make_pair(spec_.observation, spec_.obs_cov);
  }

 private:
  std::string name_;
  LinearGaussianSpec spec_;
  Matrix prior_factor_;
  Matrix process_factor_;
  Matrix obs_factor_;
};

/// Stationary prior variance of the AR(1) benchmark: (a^2 + sqrt(4 + a^4)) / 2.
double ar1_prior_variance(double alpha);

/// Scalar AR(1): x' = 0.9 x + N(0,1), y = x + N(0,1), x_1 ~ N(0, sigma^2).
/// Noise variances can be overridden (0 allowed) for deterministic tests.
std::unique_ptr<LinearGaussianModel> ar1_model(double alpha = 0.9, double process_var = 1.0, double obs_var = 1.0);

}  // namespace ents
