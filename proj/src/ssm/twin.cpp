#include "ssm/twin.hpp"

#include <ostream>

#include "core/csv.hpp"
#include "core/error.hpp"

namespace ents {

TwinData generate_twin(const StateSpaceModel& model, Index steps, std::uint64_t seed, std::uint64_t repeat) {
  if (steps < 1) fail(ErrorCode::InvalidArgument, "twin experiments need at least one step");
  TwinData twin;
  twin.seed = seed;
  twin.repeat = repeat;
  twin.truth.resize(steps, model.state_dim());
  twin.observations.resize(steps, model.obs_dim());

  RowMatrix x = model.sample_prior(1, RandomStream(seed, repeat, 0, Purpose::TruthPrior));
  for (Index s = 0; s < steps; ++s) {
    const auto step = static_cast<std::uint64_t>(s);
    if (s > 0) x = model.forecast(x, RandomStream(seed, repeat, step, Purpose::TruthForecast));
    twin.truth.row(s) = x.row(0);
    twin.observations.row(s) = model.observe(x, RandomStream(seed, repeat, step, Purpose::TruthObserve)).row(0);
  }
  return twin;
}

void write_twin_csv(std::ostream& os, const TwinData& twin) {
  os << "step";
  for (Index k = 0; k < twin.truth.cols(); ++k) os << ",x_true_" << (k + 1);
  for (Index k = 0; k < twin.observations.cols(); ++k) os << ",y_obs_" << (k + 1);
  os << '\n';
  for (Index s = 0; s < twin.steps(); ++s) {
    os << (s + 1);
    for (Index k = 0; k < twin.truth.cols(); ++k) os << ',' << format_double(twin.truth(s, k));
    for (Index k = 0; k < twin.observations.cols(); ++k) os << ',' << format_double(twin.observations(s, k));
    os << '\n';
  }
}

}  // namespace ents
