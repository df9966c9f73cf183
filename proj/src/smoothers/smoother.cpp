#include "smoothers/smoother.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "core/stats.hpp"
#include "smoothers/updates.hpp"

namespace ents {

namespace {

constexpr double kCollapseRatio = 1e-8;

double spread(const RowMatrix& x) {
  const RowMatrix c = centered(x);
  return std::sqrt(c.squaredNorm() / static_cast<double>((x.rows() - 1) * x.cols()));
}

template <class E, std::size_t K>
E parse_name(const std::string& s, const std::pair<const char*, E> (&table)[K], const char* what) {
  for (const auto& [name, value] : table) {
    if (s == name) return value;
  }
  fail(ErrorCode::Config, "unknown " + std::string(what) + " '" + s + "'");
}

constexpr std::pair<const char*, Variant> kVariants[] = {{"dense", Variant::Dense},
                                                         {"backward_single", Variant::BackwardSingle},
                                                         {"backward_multi", Variant::BackwardMulti},
                                                         {"forward_multi", Variant::ForwardMulti},
                                                         {"fixed_point", Variant::FixedPoint}};
constexpr std::pair<const char*, Engine> kEngines[] = {
    {"transport", Engine::Transport}, {"kalman", Engine::Kalman}, {"kalman_closed_form", Engine::Kalman}};
constexpr std::pair<const char*, FilterKind> kFilters[] = {
    {"dense", FilterKind::Dense}, {"sparse", FilterKind::Sparse}, {"semi_empirical", FilterKind::SemiEmpirical}};

}  // namespace

std::string to_string(Variant v) {
  for (const auto& [name, value] : kVariants) {
    if (value == v) return name;
  }
  return "?";
}
std::string to_string(Engine e) { return e == Engine::Transport ? "transport" : "kalman"; }
std::string to_string(FilterKind f) {
  for (const auto& [name, value] : kFilters) {
    if (value == f) return name;
  }
  return "?";
}
Variant parse_variant(const std::string& s) { return parse_name(s, kVariants, "smoother variant"); }
Engine parse_engine(const std::string& s) { return parse_name(s, kEngines, "update engine"); }
FilterKind parse_filter(const std::string& s) { return parse_name(s, kFilters, "filter"); }

void SmootherConfig::validate() const {
  if (lag && *lag < 0) fail(ErrorCode::Config, "lag must be non-negative");
  if (fixed_point_index && *fixed_point_index < 1) fail(ErrorCode::Config, "fixed_point_index is 1-based");
  if (variant == Variant::ForwardMulti && filter != FilterKind::Dense) {
    fail(ErrorCode::Config, "the forward smoother conditions x_t inside its own pass and needs the dense filter");
  }
  if (semi_empirical && engine != Engine::Kalman) fail(ErrorCode::Config, "semi-empirical updates need the kalman engine");
  if (semi_empirical && variant != Variant::Dense && variant != Variant::BackwardSingle && variant != Variant::BackwardMulti) {
    fail(ErrorCode::Config, "semi-empirical updates exist for the dense and backward smoothers only");
  }
}

EnsembleSmoother::EnsembleSmoother(const StateSpaceModel& model, SmootherConfig config, Index members, std::uint64_t seed,
                                   std::uint64_t repeat)
    : model_(model), config_(std::move(config)), members_(members), seed_(seed), repeat_(repeat) {
  config_.validate();
  if (members < 2) fail(ErrorCode::InsufficientMembers, "an ensemble needs at least two members");
  if (config_.filter == FilterKind::SemiEmpirical && !model_.linear_observation()) {
    fail(ErrorCode::Config, "the semi-empirical filter needs a linear observation model");
  }
  if (config_.semi_empirical) {
    if (config_.variant == Variant::Dense && !model_.linear_observation()) {
      fail(ErrorCode::Config, "the semi-empirical EnKS needs a linear observation model");
    }
    if (config_.variant != Variant::Dense && !model_.linear_gaussian()) {
      fail(ErrorCode::Config, "the semi-empirical EnRTSS needs a linear forecast model");
    }
  }
}

Index EnsembleSmoother::window_start(Index k) const {
  if (!config_.lag) return 0;
  return std::max<Index>(0, k - *config_.lag);
}

RowMatrix EnsembleSmoother::filter_update(const RowMatrix& x, const RowMatrix& y, const Vector& y_star, Index k) const {
  switch (config_.filter) {
    case FilterKind::Dense:
      return config_.engine == Engine::Transport ? entf_step(x, y, y_star) : stochastic_enkf_step(x, y, y_star);
    case FilterKind::Sparse:
      return entf_sparse_step(x, model_, y_star, RandomStream(seed_, repeat_, static_cast<std::uint64_t>(k), Purpose::SparseObserve),
                              config_.engine);
    case FilterKind::SemiEmpirical: {
      const auto [h, r] = *model_.linear_observation();
      const RowMatrix eps = y - x * h.transpose();
      return semi_empirical_enkf_step(x, eps, h, r, y_star);
    }
  }
  fail(ErrorCode::InvalidArgument, "unknown filter kind");
}

void EnsembleSmoother::record(std::vector<TraceRecord>& into, Index pass, Index lag, double gain, double signal) {
  if (config_.record_traces) into.push_back({pass, lag, gain, signal});
}

void EnsembleSmoother::check_spread(Index first, Index last, Index pass) {
  for (Index r = first; r <= last; ++r) {
    const auto ur = static_cast<std::size_t>(r);
    const double s = spread(states_[ur]);
    spread_scale_[ur] = std::max(spread_scale_[ur], s);
    if (!collapse_step_ && s < kCollapseRatio * spread_scale_[ur]) collapse_step_ = pass;
  }
}

void EnsembleSmoother::assimilate(const Vector& y_star) {
  if (finished_) fail(ErrorCode::InvalidArgument, "smoother already finished");
  if (y_star.size() != model_.obs_dim()) fail(ErrorCode::InvalidArgument, "y* has the wrong dimension");
  const Index k = steps();
  const auto uk = static_cast<std::uint64_t>(k);

  RowMatrix x = k == 0 ? model_.sample_prior(members_, RandomStream(seed_, repeat_, 0, Purpose::Prior))
                       : model_.forecast(states_.back(), RandomStream(seed_, repeat_, uk, Purpose::Forecast));
  const RowMatrix y = model_.observe(x, RandomStream(seed_, repeat_, uk, Purpose::Observe));

  states_.push_back(x);
  spread_scale_.push_back(spread(x));
  if (config_.variant == Variant::BackwardSingle) forecasts_.push_back(x);

  if (config_.record_traces) record(traces_, k + 1, 0, gain_magnitude(x, y), signal_magnitude_at(y, y_star));

  switch (config_.variant) {
    case Variant::Dense:
      step_dense(x, y, y_star, k);
      break;
    case Variant::BackwardSingle:
      states_[static_cast<std::size_t>(k)] = filter_update(x, y, y_star, k);
      break;
    case Variant::BackwardMulti:
      step_backward_multi(x, y, y_star, k);
      break;
    case Variant::ForwardMulti:
      step_forward(x, y, y_star, k);
      break;
    case Variant::FixedPoint:
      step_fixed_point(x, y, y_star, k);
      break;
  }
  filtered_.push_back(states_.back());
  check_spread(window_start(k), k, k + 1);
}

void EnsembleSmoother::step_dense(const RowMatrix& x, const RowMatrix& y, const Vector& y_star, Index k) {
  const Index start = window_start(k);
  std::vector<RowMatrix> past;  // reverse time: x_{k-1}, ..., x_start
  for (Index r = k - 1; r >= start; --r) past.push_back(states_[static_cast<std::size_t>(r)]);

  for (std::size_t i = 0; i < past.size(); ++i) {
    record(traces_, k + 1, static_cast<Index>(i) + 1, config_.record_traces ? gain_magnitude(past[i], y) : 0.0,
           signal_magnitude_at(y, y_star));
  }

  std::vector<RowMatrix> updated;
  if (config_.filter == FilterKind::Dense && config_.engine == Engine::Transport) {
    std::vector<RowMatrix> window{x};
    window.insert(window.end(), past.begin(), past.end());
    updated = dense_update(y, y_star, window, Engine::Transport, config_.dense_decoupled);
  } else {
    updated.push_back(filter_update(x, y, y_star, k));
    std::vector<RowMatrix> rest;
    if (config_.semi_empirical) {
      const auto [h, r] = *model_.linear_observation();
      rest = enks_semi_empirical(past, x, y - x * h.transpose(), y_star, h, r);
    } else {
      rest = dense_update(y, y_star, past, config_.engine, config_.dense_decoupled);
    }
    updated.insert(updated.end(), std::make_move_iterator(rest.begin()), std::make_move_iterator(rest.end()));
  }
  for (std::size_t i = 0; i < updated.size(); ++i) states_[static_cast<std::size_t>(k) - i] = std::move(updated[i]);
}

void EnsembleSmoother::step_backward_multi(const RowMatrix& x, const RowMatrix& y, const Vector& y_star, Index k) {
  RowMatrix next_star = filter_update(x, y, y_star, k);
  RowMatrix old_next = x;
  states_[static_cast<std::size_t>(k)] = next_star;
  const LinearGaussianSpec* lg = model_.linear_gaussian();
  for (Index r = k - 1; r >= window_start(k); --r) {
    auto& slot = states_[static_cast<std::size_t>(r)];
    RowMatrix old_r = slot;
    if (config_.record_traces) record(traces_, k + 1, k - r, gain_magnitude(old_r, old_next), signal_magnitude(old_next, next_star));
    if (config_.semi_empirical) {
      slot = enrtss_semi_empirical(old_r, old_next - old_r * lg->transition.transpose(), next_star, lg->transition, lg->process_cov);
    } else {
      slot = backward_update(old_r, old_next, next_star, config_.engine);
    }
    old_next = std::move(old_r);
    next_star = slot;
  }
}

void EnsembleSmoother::finish() {
  if (finished_) return;
  finished_ = true;
  if (config_.variant != Variant::BackwardSingle || states_.empty()) return;
  const Index last = steps() - 1;
  const LinearGaussianSpec* lg = model_.linear_gaussian();
  for (Index r = last - 1; r >= window_start(last); --r) {
    const auto ur = static_cast<std::size_t>(r);
    const RowMatrix& old_r = filtered_[ur];
    const RowMatrix& old_next = forecasts_[ur + 1];
    const RowMatrix& next_star = states_[ur + 1];
    if (config_.record_traces) {
      record(traces_, last + 1, last - r, gain_magnitude(old_r, old_next), signal_magnitude(old_next, next_star));
    }
    if (config_.semi_empirical) {
      states_[ur] = enrtss_semi_empirical(old_r, old_next - old_r * lg->transition.transpose(), next_star, lg->transition,
                                          lg->process_cov);
    } else {
      states_[ur] = backward_update(old_r, old_next, next_star, config_.engine);
    }
  }
  check_spread(window_start(last), last, last + 1);
}

void EnsembleSmoother::step_forward(const RowMatrix& /*x*/, const RowMatrix& y, const Vector& y_star, Index k) {
  const Index first = window_start(k);
  const auto uf = static_cast<std::size_t>(first);
  RowMatrix old_prev = states_[uf];  // equals x when first == k
  if (config_.record_traces && first < k) record(traces_, k + 1, k - first, gain_magnitude(old_prev, y), signal_magnitude_at(y, y_star));
  states_[uf] = dense_update(y, y_star, {old_prev}, config_.engine)[0];

  for (Index r = first + 1; r <= k; ++r) {
    auto& slot = states_[static_cast<std::size_t>(r)];
    const RowMatrix& prev_star = states_[static_cast<std::size_t>(r - 1)];
    RowMatrix old_r = slot;
    if (config_.record_traces && r < k) {
      const ForwardGains g = forward_gains(y, old_prev, old_r);
      record(traces_, k + 1, k - r, g.k.cwiseAbs().mean(), signal_magnitude_at(y, y_star));
      record(relay_traces_, k + 1, k - r, g.b.cwiseAbs().mean(), signal_magnitude(prev_star, old_prev));
    } else if (config_.record_traces) {
      const ForwardGains g = forward_gains(y, old_prev, old_r);
      record(relay_traces_, k + 1, 0, g.b.cwiseAbs().mean(), signal_magnitude(prev_star, old_prev));
    }
    slot = forward_update(y, y_star, old_prev, prev_star, old_r, config_.engine);
    old_prev = std::move(old_r);
  }
}

void EnsembleSmoother::step_fixed_point(const RowMatrix& x, const RowMatrix& y, const Vector& y_star, Index k) {
  std::vector<Index> targets;
  const Index start = window_start(k);
  if (config_.fixed_point_index) {
    const Index j = *config_.fixed_point_index - 1;
    if (j < k && j >= start) targets.push_back(j);
  } else {
    for (Index r = k - 1; r >= start; --r) targets.push_back(r);
  }
  std::vector<RowMatrix> fixed;
  for (Index j : targets) fixed.push_back(states_[static_cast<std::size_t>(j)]);
  if (config_.record_traces) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      record(traces_, k + 1, k - targets[i], fixed_point_gain(y, x, fixed[i]).cwiseAbs().mean(), signal_magnitude_at(y, y_star));
    }
  }

  RowMatrix xt_star;
  std::vector<RowMatrix> updated;
  if (config_.filter == FilterKind::Dense) {
    std::tie(xt_star, updated) = fixed_point_update(y, y_star, x, fixed, config_.engine);
  } else {
    xt_star = filter_update(x, y, y_star, k);
    for (const auto& xj : fixed) updated.push_back(backward_update(xj, x, xt_star, config_.engine));
  }
  states_[static_cast<std::size_t>(k)] = std::move(xt_star);
  for (std::size_t i = 0; i < targets.size(); ++i) states_[static_cast<std::size_t>(targets[i])] = std::move(updated[i]);
}

RowMatrix EnsembleSmoother::trajectory() const {
  const Index d = model_.state_dim();
  RowMatrix out(members_, d * steps());
  for (Index s = 0; s < steps(); ++s) out.middleCols(s * d, d) = states_[static_cast<std::size_t>(s)];
  return out;
}

}  // namespace ents
