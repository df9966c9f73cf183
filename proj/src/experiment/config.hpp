#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "smoothers/smoother.hpp"
#include "ssm/model.hpp"

namespace ents {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
  std::string model = "ar1";  // ar1 | lorenz63
  std::vector<SmootherConfig> smoothers;
  std::vector<Index> ensemble_sizes;
  std::vector<std::optional<Index>> lags;  // empty: each smoother keeps its own lag
  Index steps = 30;
  Index spin_up = 0;
  Index repeats = 1000;
  std::uint64_t seed = 1;
  std::string output_dir = "results";
  unsigned threads = 1;
  std::vector<double> quantiles{0.05, 0.25, 0.5, 0.75, 0.95};
  bool write_ensembles = false;

  void validate() const;
};

/// Built-in study for a model. AR(1): t=30, M=1000, N in {100, 1000}, the
/// four main smoothers with both engines. Lorenz-63: t=700, spin-up 200,
/// M=20, N in {50, 100}, sparse filter, lag 100 except for the single-pass
/// backward smoother, which sweeps the whole window; `paper_scale` switches to
/// t=2000, spin-up 1000, M=100.
ExperimentConfig default_config(const std::string& model, bool paper_scale = false);

/// Thread count from ENTS_THREADS, or 1.
unsigned default_threads();

/// Reads a JSON config, applies `overrides` (also JSON, keys win over the
/// file), and validates. Unknown keys are errors. Parse errors name the
/// line and column. Either text may be empty.
ExperimentConfig parse_experiment_config(const std::string& json_text, const std::string& overrides_json = "");

/// JSON echo of a config (used in manifests).
std::string config_to_json(const ExperimentConfig& config);

/// Short smoother spec: `variant[:engine[:filter]]`.
SmootherConfig parse_smoother_spec(const std::string& spec, const SmootherConfig& defaults);

std::unique_ptr<StateSpaceModel> make_model(const std::string& name);

}  // namespace ents
