#pragma once

#include <map>
#include <utility>
#include <vector>

#include "core/types.hpp"
#include "smoothers/smoother.hpp"

namespace ents {

/// Pairwise (cascade) sum; the reduction tree depends only on the length,
/// so results are bit-stable for a fixed input order.
double pairwise_sum(const double* values, std::size_t n);

struct CovarianceStudy {
  Matrix mean;      // entrywise mean of the estimates
  Matrix bias;      // mean - reference
  Matrix rmse;      // sqrt(mean((estimate - reference)^2))
  Matrix variance;  // 1/M spread of the estimates around their mean
};

/// Entrywise bias/RMSE of M covariance estimates against a reference.
/// bias^2 + variance = rmse^2 holds entrywise up to rounding.
CovarianceStudy cov_bias_mse(const std::vector<Matrix>& estimates, const Matrix& reference);

/// Per-coordinate sqrt(mean over repeats of (estimate - reference)^2);
/// each repeat has its own reference because the posterior mean depends on
/// that repeat's data.
Vector mean_rmse(const std::vector<Vector>& estimates, const std::vector<Vector>& references);

struct GainSignalRow {
  Index pass = 0;
  Index lag = 0;
  double abs_gain = 0.0;
  double abs_signal = 0.0;
  Index count = 0;
};

/// Averages trace records sharing (pass, lag); rows sorted by pass, then lag.
std::vector<GainSignalRow> gain_signal_trace(const std::vector<TraceRecord>& records);

/// Nearest-rank empirical quantile: the ceil(p n)-th smallest value.
double nearest_rank_quantile(std::vector<double> values, double p);

/// Quantiles over members of the Euclidean error ||x_i - truth||.
std::vector<double> error_quantiles(ConstRowRef members, const Vector& truth, const std::vector<double>& probs);

/// Running average of quantile rows keyed by lag.
class LagQuantileAccumulator {
 public:
  explicit LagQuantileAccumulator(std::vector<double> probs) : probs_(std::move(probs)) {}

  void add(Index lag, const std::vector<double>& quantiles);

  const std::vector<double>& probs() const { return probs_; }

  /// (lag, averaged quantiles, number of cycles) in increasing lag.
  std::vector<std::pair<Index, std::vector<double>>> averages() const;
  std::map<Index, Index> counts() const;

  void merge(const LagQuantileAccumulator& other);

 private:
  std::vector<double> probs_;
  std::map<Index, std::pair<std::vector<double>, Index>> sums_;
};

/// RMSE of the ensemble mean against the truth: ||mean - truth|| / sqrt(D).
double ensemble_mean_rmse(ConstRowRef members, const Vector& truth);

struct MeanCI {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double std_error = 0.0;
  Index count = 0;
};

/// Sample mean with a normal-approximation 95% confidence interval.
MeanCI mean_ci95(const std::vector<double>& values);

}  // namespace ents
