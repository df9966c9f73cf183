#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ssm/model.hpp"

namespace ents {

/// Synthetic truth and observations drawn from the assimilation model.
struct TwinData {
  RowMatrix truth;         // steps x state_dim
  RowMatrix observations;  // steps x obs_dim
  std::uint64_t seed = 0;
  std::uint64_t repeat = 0;

  Index steps() const { return truth.rows(); }
  Vector observation(Index s) const { return observations.row(s).transpose(); }
};

/// x_1 ~ prior, x_s = forecast(x_{s-1}), y*_s = observe(x_s); streams are
/// keyed by (seed, repeat, step) so the same key always yields the same twin.
TwinData generate_twin(const StateSpaceModel& model, Index steps, std::uint64_t seed, std::uint64_t repeat = 0);

/// CSV with header `step,x_true_1..,y_obs_1..`; steps numbered from 1.
void write_twin_csv(std::ostream& os, const TwinData& twin);

}  // namespace ents
