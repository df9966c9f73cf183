#include "diagnostics/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace ents {

double pairwise_sum(const double* values, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

CovarianceStudy cov_bias_mse(const std::vector<Matrix>& estimates, const Matrix& reference) {
  if (estimates.empty()) fail(ErrorCode::InvalidArgument, "no covariance estimates");
  const Index rows = reference.rows();
  const Index cols = reference.cols();
  for (const auto& e : estimates) {
    if (e.rows() != rows || e.cols() != cols) fail(ErrorCode::InvalidArgument, "covariance estimates differ in shape");
  }
  const auto m = static_cast<double>(estimates.size());
  CovarianceStudy out{Matrix(rows, cols), Matrix(rows, cols), Matrix(rows, cols), Matrix(rows, cols)};
  std::vector<double> buf(estimates.size());
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      for (std::size_t r = 0; r < estimates.size(); ++r) buf[r] = estimates[r](i, j);
      const double mean = pairwise_sum(buf.data(), buf.size()) / m;
      for (std::size_t r = 0; r < estimates.size(); ++r) {
        const double e = estimates[r](i, j) - reference(i, j);
        buf[r] = e * e;
      }
      const double mse = pairwise_sum(buf.data(), buf.size()) / m;
      for (std::size_t r = 0; r < estimates.size(); ++r) {
        const double e = estimates[r](i, j) - mean;
        buf[r] = e * e;
      }
      out.mean(i, j) = mean;
      out.bias(i, j) = mean - reference(i, j);
      out.rmse(i, j) = std::sqrt(mse);
      out.variance(i, j) = pairwise_sum(buf.data(), buf.size()) / m;
    }
  }
  return out;
}

Vector mean_rmse(const std::vector<Vector>& estimates, const std::vector<Vector>& references) {
  if (estimates.empty() || estimates.size() != references.size()) {
    fail(ErrorCode::InvalidArgument, "mean RMSE needs one reference per estimate");
  }
  const Index d = estimates.front().size();
  Vector out(d);
  std::vector<double> buf(estimates.size());
  for (Index k = 0; k < d; ++k) {
    for (std::size_t r = 0; r < estimates.size(); ++r) {
      if (estimates[r].size() != d || references[r].size() != d) fail(ErrorCode::InvalidArgument, "mean estimates differ in length");
      const double e = estimates[r](k) - references[r](k);
      buf[r] = e * e;
    }
    out(k) = std::sqrt(pairwise_sum(buf.data(), buf.size()) / static_cast<double>(buf.size()));
  }
  return out;
}

std::vector<GainSignalRow> gain_signal_trace(const std::vector<TraceRecord>& records) {
  std::map<std::pair<Index, Index>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : records) {
    auto& g = groups[{r.pass, r.lag}];
    g.first.push_back(r.abs_gain);
    g.second.push_back(r.abs_signal);
  }
  std::vector<GainSignalRow> out;
  for (const auto& [key, g] : groups) {
    const auto n = static_cast<double>(g.first.size());
    out.push_back({key.first, key.second, pairwise_sum(g.first.data(), g.first.size()) / n,
                   pairwise_sum(g.second.data(), g.second.size()) / n, static_cast<Index>(g.first.size())});
  }
  return out;
}

double nearest_rank_quantile(std::vector<double> values, double p) {
  if (values.empty()) fail(ErrorCode::InvalidArgument, "quantile of an empty sample");
  if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::InvalidArgument, "quantile probability must lie in (0, 1)");
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

std::vector<double> error_quantiles(ConstRowRef members, const Vector& truth, const std::vector<double>& probs) {
  if (members.cols() != truth.size()) fail(ErrorCode::InvalidArgument, "truth has the wrong dimension");
  if (!std::is_sorted(probs.begin(), probs.end())) fail(ErrorCode::InvalidArgument, "quantile probabilities must be sorted");
  std::vector<double> errors(static_cast<std::size_t>(members.rows()));
  for (Index i = 0; i < members.rows(); ++i) errors[static_cast<std::size_t>(i)] = (members.row(i).transpose() - truth).norm();
  std::sort(errors.begin(), errors.end());
  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) out.push_back(nearest_rank_quantile(errors, p));
  return out;
}

void LagQuantileAccumulator::add(Index lag, const std::vector<double>& quantiles) {
  if (quantiles.size() != probs_.size()) fail(ErrorCode::InvalidArgument, "quantile row has the wrong length");
  auto& slot = sums_[lag];
  if (slot.first.empty()) slot.first.assign(probs_.size(), 0.0);
  for (std::size_t i = 0; i < quantiles.size(); ++i) slot.first[i] += quantiles[i];
  ++slot.second;
}

std::vector<std::pair<Index, std::vector<double>>> LagQuantileAccumulator::averages() const {
  std::vector<std::pair<Index, std::vector<double>>> out;
  for (const auto& [lag, slot] : sums_) {
    std::vector<double> avg = slot.first;
    for (double& v : avg) v /= static_cast<double>(slot.second);
    out.emplace_back(lag, std::move(avg));
  }
  return out;
}

std::map<Index, Index> LagQuantileAccumulator::counts() const {
  std::map<Index, Index> out;
  for (const auto& [lag, slot] : sums_) out[lag] = slot.second;
  return out;
}

void LagQuantileAccumulator::merge(const LagQuantileAccumulator& other) {
  if (other.probs_ != probs_) fail(ErrorCode::InvalidArgument, "cannot merge quantiles for different probabilities");
  for (const auto& [lag, slot] : other.sums_) {
    auto& mine = sums_[lag];
    if (mine.first.empty()) mine.first.assign(probs_.size(), 0.0);
    for (std::size_t i = 0; i < slot.first.size(); ++i) mine.first[i] += slot.first[i];
    mine.second += slot.second;
  }
}

double ensemble_mean_rmse(ConstRowRef members, const Vector& truth) {
  const Vector mean = members.colwise().mean().transpose();
  return (mean - truth).norm() / std::sqrt(static_cast<double>(truth.size()));
}

MeanCI mean_ci95(const std::vector<double>& values) {
  MeanCI out;
  out.count = static_cast<Index>(values.size());
  if (values.empty()) return out;
  const auto n = static_cast<double>(values.size());
  out.mean = pairwise_sum(values.data(), values.size()) / n;
  if (values.size() > 1) {
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - out.mean) * (values[i] - out.mean);
    out.std_error = std::sqrt(pairwise_sum(sq.data(), sq.size()) / (n - 1.0) / n);
  }
  out.lower = out.mean - 1.96 * out.std_error;
  out.upper = out.mean + 1.96 * out.std_error;
  return out;
}

}  // namespace ents
