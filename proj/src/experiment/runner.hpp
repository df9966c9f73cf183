#pragma once

#include <optional>
#include <string>
#include <vector>

#include "diagnostics/diagnostics.hpp"
#include "experiment/config.hpp"

namespace ents {

struct CellSpec {
  SmootherConfig smoother;
  Index members = 0;

  /// `<variant>-<engine>-<filter>_N<members>_L<lag|full>`, with `-semi`,
  /// `-dec` or `-fp<j>` appended to the variant for the optional switches.
  std::string name() const;
};

/// Cells in config order: smoothers, then ensemble sizes, then lags.
std::vector<CellSpec> expand_cells(const ExperimentConfig& config);

struct RepeatFailure {
  Index repeat = 0;
  std::string code;
  std::string message;
};

struct CellResult {
  CellSpec spec;
  Index completed = 0;
  Index collapsed = 0;
  std::vector<RepeatFailure> failures;

  // linear-Gaussian models only
  std::optional<CovarianceStudy> cov;
  Matrix reference_cov;
  Vector mean_rmse;

  std::vector<GainSignalRow> gain_signal;
  std::vector<GainSignalRow> relay;

  // per completed repeat, time-averaged over s >= spin_up
  std::vector<Index> repeat_ids;
  std::vector<double> rmse;
  std::vector<double> filter_rmse;
  Vector rmse_time;         // averaged over repeats
  Vector filter_rmse_time;  // averaged over repeats
  Matrix quantiles;         // steps x probs, averaged over repeats
  LagQuantileAccumulator lag_quantiles{{}};

  // repeat 0, when it completed
  Matrix summary_mean;  // steps x D
  Matrix summary_var;   // steps x D
  std::vector<RowMatrix> ensembles;  // only with write_ensembles
};

/// Runs every repeat of one cell on `config.threads` workers. Repeat m uses
/// the twin and member streams keyed by (config.seed, m) in every cell, so
/// cells share their random inputs. A repeat that raises is recorded in
/// `failures` and left out of all aggregates.
CellResult run_cell(const ExperimentConfig& config, const CellSpec& cell, const StateSpaceModel& model);

/// Writes the cell's CSV files into `dir`; returns the paths written.
std::vector<std::string> write_cell(const std::string& dir, const ExperimentConfig& config, const CellResult& result);

struct ExperimentReport {
  std::vector<CellResult> cells;
  std::vector<std::string> files;  // relative to output_dir
  double wall_seconds = 0.0;
  std::string manifest_path;
};

/// Runs all cells and writes `<output_dir>/<cell>/...`, `twin.csv`,
/// `summary.csv` and `manifest.json` (config echo, seeds, SHA-256 of every
/// file, failures, wall time, version).
ExperimentReport run_experiment(const ExperimentConfig& config);

struct EquivalenceRow {
  std::string model;
  std::string variant;
  std::string filter;
  double max_rel_deviation = 0.0;
  bool ok = false;
  std::string error;
};

/// Runs each smoother variant with both engines on shared random inputs
/// and reports the largest relative member deviation.
std::vector<EquivalenceRow> engine_equivalence(const std::string& model, Index members, Index steps, std::uint64_t seed,
                                               double tolerance = 1e-8);

struct OracleCheck {
  Index steps = 0;
  double mean_deviation = 0.0;
  double cov_deviation = 0.0;
};

/// RTS recursion against the joint Gaussian oracle on an AR(1) twin.
OracleCheck oracle_check(Index steps, std::uint64_t seed);

/// One smoother run (repeat 0): writes `twin.csv` and
/// `ensemble_<s>.csv` (smoothed) plus `filter_<s>.csv` per time into dir.
std::vector<std::string> export_ensembles(const std::string& model, const SmootherConfig& smoother, Index members, Index steps,
                                          std::uint64_t seed, const std::string& dir);

/// Lowercase hex SHA-256 of a file.
std::string sha256_file(const std::string& path);

}  // namespace ents
