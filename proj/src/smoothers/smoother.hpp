#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/types.hpp"
#include "filters/filters.hpp"
#include "ssm/model.hpp"

namespace ents {

enum class Variant { Dense, BackwardSingle, BackwardMulti, ForwardMulti, FixedPoint };

enum class FilterKind { Dense, Sparse, SemiEmpirical };

std::string to_string(Variant v);
std::string to_string(Engine e);
std::string to_string(FilterKind f);
Variant parse_variant(const std::string& s);
Engine parse_engine(const std::string& s);
FilterKind parse_filter(const std::string& s);

struct SmootherConfig {
  Variant variant = Variant::BackwardMulti;
  Engine engine = Engine::Transport;
  FilterKind filter = FilterKind::Dense;
  std::optional<Index> lag;                // unset: full window; 0: filtering only
  std::optional<Index> fixed_point_index;  // 1-based; unset: every state in the window
  bool dense_decoupled = false;            // dense variant: per-state rows read only y
  bool semi_empirical = false;             // kalman engine: use known H, R (dense) or M, Q (backward)
  bool record_traces = true;

  void validate() const;
};

/// One entry of a gain/signal trace. `pass` is the time index of the
/// observation being assimilated, `lag` = pass - (time of the updated state).
/// Lag 0 is the filtering update itself.
struct TraceRecord {
  Index pass = 0;
  Index lag = 0;
  double abs_gain = 0.0;
  double abs_signal = 0.0;
};

/// Sequential ensemble smoother over a growing window x_{1:s}.
///
/// Each call to assimilate() forecasts the latest state (or samples the
/// prior at the first step), draws predicted observations, filters, and
/// runs the variant's smoothing pass. All randomness comes from streams
/// keyed by (seed, repeat, step), so two smoothers built with the same key
/// see identical forecasts and observation draws as long as their inputs
/// agree.
class EnsembleSmoother {
 public:
  EnsembleSmoother(const StateSpaceModel& model, SmootherConfig config, Index members, std::uint64_t seed,
                   std::uint64_t repeat = 0);

  void assimilate(const Vector& y_star);

  /// Runs the deferred backward sweep of the single-pass variant; no-op otherwise.
  void finish();

  Index steps() const { return static_cast<Index>(states_.size()); }
  Index members() const { return members_; }
  const SmootherConfig& config() const { return config_; }

  /// Current (smoothed) ensemble of state s, 0-based.
  const RowMatrix& state(Index s) const { return states_.at(static_cast<std::size_t>(s)); }
  const std::vector<RowMatrix>& states() const { return states_; }

  /// Filtering ensemble of state s as produced at its own time.
  const RowMatrix& filter_state(Index s) const { return filtered_.at(static_cast<std::size_t>(s)); }

  /// Gain/signal records; relay_traces() holds the x_{r-1} part of the
  /// forward smoother's update.
  const std::vector<TraceRecord>& traces() const { return traces_; }
  const std::vector<TraceRecord>& relay_traces() const { return relay_traces_; }

  /// True once any state's ensemble spread fell below 1e-8 of the largest
  /// spread that state ever had.
  bool collapsed() const { return collapse_step_.has_value(); }
  std::optional<Index> collapse_step() const { return collapse_step_; }

  /// Members x time x state, time-major concatenation of all states.
  RowMatrix trajectory() const;

 private:
  Index window_start(Index k) const;
  RowMatrix filter_update(const RowMatrix& x, const RowMatrix& y, const Vector& y_star, Index k) const;
  void record(std::vector<TraceRecord>& into, Index pass, Index lag, double gain, double signal);
  void check_spread(Index first, Index last, Index pass);

  void step_dense(const RowMatrix& x, const RowMatrix& y, const Vector& y_star, Index k);
  void step_backward_multi(const RowMatrix& x, const RowMatrix& y, const Vector& y_star, Index k);
  void step_forward(const RowMatrix& x, const RowMatrix& y, const Vector& y_star, Index k);
  void step_fixed_point(const RowMatrix& x, const RowMatrix& y, const Vector& y_star, Index k);

  const StateSpaceModel& model_;
  SmootherConfig config_;
  Index members_;
  std::uint64_t seed_;
  std::uint64_t repeat_;

  std::vector<RowMatrix> states_;
  std::vector<RowMatrix> filtered_;
  std::vector<RowMatrix> forecasts_;
  std::vector<double> spread_scale_;
  std::vector<TraceRecord> traces_;
  std::vector<TraceRecord> relay_traces_;
  std::optional<Index> collapse_step_;
  bool finished_ = false;
};

}  // namespace ents
