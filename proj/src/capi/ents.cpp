#include "ents/ents.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "core/csv.hpp"
#include "core/error.hpp"
#include "experiment/config.hpp"
#include "experiment/runner.hpp"
#include "json.hpp"
#include "transport/affine_map.hpp"

struct ents_ensemble {
  ents::Ensemble value;
};

struct ents_map {
  ents::AffineTriangularMap value;
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

ents_status to_status(ents::ErrorCode c) {
  switch (c) {
    case ents::ErrorCode::InvalidArgument: return ENTS_ERR_INVALID_ARGUMENT;
    case ents::ErrorCode::NotPositiveDefinite: return ENTS_ERR_NOT_POSITIVE_DEFINITE;
    case ents::ErrorCode::EnsembleCollapse: return ENTS_ERR_ENSEMBLE_COLLAPSE;
    case ents::ErrorCode::InsufficientMembers: return ENTS_ERR_INSUFFICIENT_MEMBERS;
    case ents::ErrorCode::NonFinite: return ENTS_ERR_NON_FINITE;
    case ents::ErrorCode::Io: return ENTS_ERR_IO;
    case ents::ErrorCode::Config: return ENTS_ERR_CONFIG;
  }
  return ENTS_ERR_INTERNAL;
}

template <class F>
ents_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return ENTS_OK;
  } catch (const ents::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return ENTS_ERR_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ENTS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return ENTS_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) ents::fail(ents::ErrorCode::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string text_or_empty(const char* s) { return s ? std::string(s) : std::string(); }

double mean_or_nan(const std::vector<double>& v) {
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : ents::mean_ci95(v).mean;
}

// JSON has no NaN; missing aggregates become null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

extern "C" {

const char* ents_version(void) { return ents::kVersion; }

const char* ents_last_error(void) { return g_last_error.c_str(); }

const char* ents_status_name(ents_status status) {
  switch (status) {
    case ENTS_OK: return "ok";
    case ENTS_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case ENTS_ERR_NOT_POSITIVE_DEFINITE: return "not_positive_definite";
    case ENTS_ERR_ENSEMBLE_COLLAPSE: return "ensemble_collapse";
    case ENTS_ERR_INSUFFICIENT_MEMBERS: return "insufficient_members";
    case ENTS_ERR_NON_FINITE: return "non_finite";
    case ENTS_ERR_IO: return "io";
    case ENTS_ERR_CONFIG: return "config";
    case ENTS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void ents_string_free(char* s) { delete[] s; }

ents_status ents_ensemble_create(const double* data, size_t members, const char* const* labels, const size_t* dims,
                                 size_t blocks, ents_ensemble** out) {
  return guarded([&] {
    require(out && data && labels && dims && blocks > 0, "ents_ensemble_create: null argument or no blocks");
    *out = nullptr;
    ents::BlockLayout layout;
    for (size_t b = 0; b < blocks; ++b) {
      require(labels[b] != nullptr, "ents_ensemble_create: null label");
      layout.append(labels[b], static_cast<ents::Index>(dims[b]));
    }
    const auto n = static_cast<ents::Index>(members);
    ents::RowMatrix m = Eigen::Map<const ents::RowMatrix>(data, n, layout.total_dim());
    *out = new ents_ensemble{ents::Ensemble(std::move(m), layout)};
  });
}

void ents_ensemble_free(ents_ensemble* e) { delete e; }

ents_status ents_ensemble_shape(const ents_ensemble* e, size_t* members, size_t* dim, size_t* blocks) {
  return guarded([&] {
    require(e != nullptr, "ents_ensemble_shape: null ensemble");
    if (members) *members = static_cast<size_t>(e->value.members());
    if (dim) *dim = static_cast<size_t>(e->value.dim());
    if (blocks) *blocks = e->value.layout().size();
  });
}

ents_status ents_ensemble_data(const ents_ensemble* e, double* out, size_t capacity) {
  return guarded([&] {
    require(e && out, "ents_ensemble_data: null argument");
    const auto& d = e->value.data();
    require(capacity >= static_cast<size_t>(d.size()), "ents_ensemble_data: buffer too small");
    std::memcpy(out, d.data(), static_cast<size_t>(d.size()) * sizeof(double));
  });
}

ents_status ents_ensemble_read_csv(const char* path, ents_ensemble** out) {
  return guarded([&] {
    require(path && out, "ents_ensemble_read_csv: null argument");
    *out = nullptr;
    *out = new ents_ensemble{ents::read_ensemble_csv(std::string(path))};
  });
}

ents_status ents_ensemble_write_csv(const ents_ensemble* e, const char* path) {
  return guarded([&] {
    require(e && path, "ents_ensemble_write_csv: null argument");
    ents::write_ensemble_csv(std::string(path), e->value);
  });
}

ents_status ents_map_fit(const ents_ensemble* e, const char* pattern_json, ents_map** out) {
  return guarded([&] {
    require(e && out, "ents_map_fit: null argument");
    *out = nullptr;
    const auto& layout = e->value.layout();
    ents::SparsityPattern pattern = ents::SparsityPattern::dense(layout);
    if (pattern_json && *pattern_json) {
      const json j = json::parse(pattern_json);
      require(j.is_object(), "ents_map_fit: pattern must be a JSON object");
      pattern = ents::SparsityPattern(layout, j.get<std::map<std::string, std::vector<std::string>>>());
    }
    *out = new ents_map{ents::fit_affine_map(e->value, pattern)};
  });
}

void ents_map_free(ents_map* m) { delete m; }

ents_status ents_map_forward(const ents_map* m, const ents_ensemble* e, ents_ensemble** out) {
  return guarded([&] {
    require(m && e && out, "ents_map_forward: null argument");
    *out = nullptr;
    *out = new ents_ensemble{ents::forward(m->value, e->value)};
  });
}

ents_status ents_map_condition(const ents_map* m, const ents_ensemble* e, const char* const* labels, size_t nlabels,
                               const double* values, size_t nvalues, int per_member, ents_ensemble** out) {
  return guarded([&] {
    require(m && e && labels && values && out && nlabels > 0, "ents_map_condition: null argument");
    *out = nullptr;
    std::vector<std::string> names;
    ents::Index dim = 0;
    for (size_t i = 0; i < nlabels; ++i) {
      require(labels[i] != nullptr, "ents_map_condition: null label");
      names.emplace_back(labels[i]);
      dim += e->value.layout().block(labels[i]).dim;
    }
    const ents::Index rows = per_member ? e->value.members() : 1;
    require(nvalues == static_cast<size_t>(rows * dim), "ents_map_condition: value count does not match the prefix dimension");
    const ents::RowMatrix v = Eigen::Map<const ents::RowMatrix>(values, rows, dim);
    const ents::ConditioningSpec spec =
        per_member ? ents::ConditioningSpec(names, v) : ents::ConditioningSpec(names, ents::Vector(v.row(0).transpose()));
    *out = new ents_ensemble{ents::composite_condition(m->value, e->value, spec)};
  });
}

ents_status ents_map_kl_objective(const ents_map* m, const ents_ensemble* e, double* out) {
  return guarded([&] {
    require(m && e && out, "ents_map_kl_objective: null argument");
    *out = ents::kl_objective(m->value, e->value);
  });
}

ents_status ents_map_to_json(const ents_map* m, char** out_json) {
  return guarded([&] {
    require(m && out_json, "ents_map_to_json: null argument");
    std::ostringstream os;
    ents::write_map_json(os, m->value);
    *out_json = dup_string(os.str());
  });
}

ents_status ents_config_resolve(const char* config_json, const char* overrides_json, char** out_json) {
  return guarded([&] {
    require(out_json != nullptr, "ents_config_resolve: null output");
    const auto cfg = ents::parse_experiment_config(text_or_empty(config_json), text_or_empty(overrides_json));
    *out_json = dup_string(ents::config_to_json(cfg));
  });
}

ents_status ents_experiment_run(const char* config_json, const char* overrides_json, char** report_json) {
  return guarded([&] {
    const auto cfg = ents::parse_experiment_config(text_or_empty(config_json), text_or_empty(overrides_json));
    const ents::ExperimentReport report = ents::run_experiment(cfg);
    if (!report_json) return;
    json j;
    j["output_dir"] = cfg.output_dir;
    j["manifest"] = report.manifest_path;
    j["wall_seconds"] = report.wall_seconds;
    j["files"] = report.files;
    j["cells"] = json::array();
    for (const auto& c : report.cells) {
      json cell{{"name", c.spec.name()},
                {"completed", c.completed},
                {"failed", c.failures.size()},
                {"collapsed", c.collapsed},
                {"rmse_mean", number_or_null(mean_or_nan(c.rmse))},
                {"filter_rmse_mean", number_or_null(mean_or_nan(c.filter_rmse))}};
      if (c.cov) {
        cell["cov_rmse_avg"] = number_or_null(c.cov->rmse.mean());
        cell["mean_rmse_avg"] = number_or_null(c.mean_rmse.mean());
      }
      for (const auto& f : c.failures) cell["failures"].push_back({{"repeat", f.repeat}, {"code", f.code}, {"message", f.message}});
      j["cells"].push_back(cell);
    }
    *report_json = dup_string(j.dump(2));
  });
}

ents_status ents_equivalence(const char* model, size_t members, size_t steps, uint64_t seed, double tolerance,
                             char** report_json, int* all_ok) {
  return guarded([&] {
    require(model != nullptr, "ents_equivalence: null model");
    const auto rows = ents::engine_equivalence(model, static_cast<ents::Index>(members), static_cast<ents::Index>(steps), seed,
                                               tolerance);
    bool ok = true;
    json j = json::array();
    for (const auto& r : rows) {
      ok = ok && r.ok;
      json row{{"model", r.model}, {"variant", r.variant}, {"filter", r.filter}, {"ok", r.ok}};
      row["max_rel_deviation"] = r.error.empty() ? json(r.max_rel_deviation) : json(nullptr);
      if (!r.error.empty()) row["error"] = r.error;
      j.push_back(row);
    }
    if (all_ok) *all_ok = ok ? 1 : 0;
    if (report_json) *report_json = dup_string(json{{"tolerance", tolerance}, {"rows", j}}.dump(2));
  });
}

ents_status ents_oracle_check(size_t steps, uint64_t seed, char** report_json) {
  return guarded([&] {
    require(report_json != nullptr, "ents_oracle_check: null output");
    const auto r = ents::oracle_check(static_cast<ents::Index>(steps), seed);
    *report_json = dup_string(
        json{{"steps", r.steps}, {"max_mean_deviation", r.mean_deviation}, {"max_cov_deviation", r.cov_deviation}}.dump(2));
  });
}

ents_status ents_export_ensembles(const char* config_json, const char* overrides_json, const char* dir, char** report_json) {
  return guarded([&] {
    require(dir != nullptr, "ents_export_ensembles: null directory");
    const auto cfg = ents::parse_experiment_config(text_or_empty(config_json), text_or_empty(overrides_json));
    ents::SmootherConfig s = cfg.smoothers.front();
    if (!cfg.lags.empty()) s.lag = cfg.lags.front();
    const auto files = ents::export_ensembles(cfg.model, s, cfg.ensemble_sizes.front(), cfg.steps, cfg.seed, dir);
    if (report_json) *report_json = dup_string(json{{"directory", dir}, {"files", files}}.dump(2));
  });
}

}  // extern "C"
