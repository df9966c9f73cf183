#include "experiment/runner.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/stats.hpp"
#include "json.hpp"
#include "smoothers/oracles.hpp"
#include "ssm/twin.hpp"

namespace ents {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::NotPositiveDefinite: return "not_positive_definite";
    case ErrorCode::EnsembleCollapse: return "ensemble_collapse";
    case ErrorCode::InsufficientMembers: return "insufficient_members";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::Io: return "io";
    case ErrorCode::Config: return "config";
  }
  return "unknown";
}

struct RepeatOutput {
  bool ok = false;
  RepeatFailure failure;
  bool collapsed = false;
  Matrix cov;
  Vector mean;
  Vector reference_mean;
  std::vector<TraceRecord> traces;
  std::vector<TraceRecord> relay;
  std::vector<double> rmse_time;
  std::vector<double> filter_rmse_time;
  Matrix quantiles;
  LagQuantileAccumulator lag_quantiles{{}};
  Matrix summary_mean;
  Matrix summary_var;
  std::vector<RowMatrix> ensembles;
};

RepeatOutput run_repeat(const ExperimentConfig& config, const CellSpec& cell, const StateSpaceModel& model, Index m) {
  RepeatOutput out;
  out.lag_quantiles = LagQuantileAccumulator(config.quantiles);
  const auto repeat = static_cast<std::uint64_t>(m);
  try {
    const TwinData twin = generate_twin(model, config.steps, config.seed, repeat);
    EnsembleSmoother s(model, cell.smoother, cell.members, config.seed, repeat);
    const Index t = config.steps;
    for (Index k = 0; k < t; ++k) {
      s.assimilate(twin.observation(k));
      if (k < config.spin_up) continue;
      const Index start = cell.smoother.lag ? std::max<Index>(0, k - *cell.smoother.lag) : 0;
      for (Index r = k; r >= start; --r) {
        out.lag_quantiles.add(k - r, error_quantiles(s.state(r), twin.truth.row(r).transpose(), config.quantiles));
      }
    }
    s.finish();

    const Index d = model.state_dim();
    out.quantiles.resize(t, static_cast<Index>(config.quantiles.size()));
    out.summary_mean.resize(t, d);
    out.summary_var.resize(t, d);
    for (Index r = 0; r < t; ++r) {
      const Vector truth = twin.truth.row(r).transpose();
      out.rmse_time.push_back(ensemble_mean_rmse(s.state(r), truth));
      out.filter_rmse_time.push_back(ensemble_mean_rmse(s.filter_state(r), truth));
      const auto q = error_quantiles(s.state(r), truth, config.quantiles);
      for (std::size_t i = 0; i < q.size(); ++i) out.quantiles(r, static_cast<Index>(i)) = q[i];
      out.summary_mean.row(r) = empirical_mean(s.state(r)).transpose();
      out.summary_var.row(r) = empirical_cov(s.state(r)).diagonal().transpose();
    }
    if (const LinearGaussianSpec* lg = model.linear_gaussian()) {
      const RowMatrix traj = s.trajectory();
      out.cov = empirical_cov(traj);
      out.mean = empirical_mean(traj);
      out.reference_mean = rts_exact(*lg, twin.observations).joint_mean;
    }
    out.traces = s.traces();
    out.relay = s.relay_traces();
    out.collapsed = s.collapsed();
    if (config.write_ensembles && m == 0) out.ensembles = s.states();
    out.ok = true;
  } catch (const Error& e) {
    out.failure = {m, code_name(e.code()), e.what()};
  } catch (const std::exception& e) {
    out.failure = {m, "internal", e.what()};
  }
  return out;
}

double time_average(const std::vector<double>& v, Index from) {
  std::vector<double> tail(v.begin() + from, v.end());
  return pairwise_sum(tail.data(), tail.size()) / static_cast<double>(tail.size());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot open '" + path + "' for writing");
  return os;
}

void write_matrix_csv(const std::string& path, const Matrix& a) {
  auto os = open_out(path);
  os << "row";
  for (Index j = 0; j < a.cols(); ++j) os << ',' << j + 1;
  os << '\n';
  for (Index i = 0; i < a.rows(); ++i) {
    os << i + 1;
    for (Index j = 0; j < a.cols(); ++j) os << ',' << format_double(a(i, j));
    os << '\n';
  }
}

void write_trace_csv(const std::string& path, const std::vector<GainSignalRow>& rows) {
  auto os = open_out(path);
  os << "pass,lag,abs_gain,abs_signal\n";
  for (const auto& r : rows) {
    os << r.pass << ',' << r.lag << ',' << format_double(r.abs_gain) << ',' << format_double(r.abs_signal) << '\n';
  }
}

std::string quantile_header(const std::vector<double>& probs) {
  std::string h;
  for (double p : probs) {
    std::ostringstream name;
    name << ",q" << p << "_nearest_rank";
    h += name.str();
  }
  return h;
}

std::string indexed_columns(const char* prefix, Index d) {
  std::string h;
  for (Index k = 1; k <= d; ++k) h += std::string(",") + prefix + "_" + std::to_string(k);
  return h;
}

double mean_of(const Matrix& a) { return a.size() ? a.mean() : std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

std::string CellSpec::name() const {
  std::string v = to_string(smoother.variant);
  if (smoother.semi_empirical) v += "-semi";
  if (smoother.dense_decoupled && smoother.variant == Variant::Dense) v += "-dec";
  if (smoother.fixed_point_index && smoother.variant == Variant::FixedPoint) v += "-fp" + std::to_string(*smoother.fixed_point_index);
  return v + "-" + to_string(smoother.engine) + "-" + to_string(smoother.filter) + "_N" + std::to_string(members) + "_L" +
         (smoother.lag ? std::to_string(*smoother.lag) : std::string("full"));
}

std::vector<CellSpec> expand_cells(const ExperimentConfig& config) {
  std::vector<CellSpec> out;
  for (const auto& s : config.smoothers) {
    for (Index n : config.ensemble_sizes) {
      if (config.lags.empty()) {
        out.push_back({s, n});
        continue;
      }
      for (const auto& l : config.lags) {
        SmootherConfig c = s;
        c.lag = l;
        out.push_back({c, n});
      }
    }
  }
  return out;
}

CellResult run_cell(const ExperimentConfig& config, const CellSpec& cell, const StateSpaceModel& model) {
  config.validate();
  // configuration errors surface here instead of failing every repeat
  EnsembleSmoother(model, cell.smoother, cell.members, config.seed);
  const Index m_total = config.repeats;
  std::vector<RepeatOutput> outputs(static_cast<std::size_t>(m_total));
  std::atomic<Index> next{0};
  auto worker = [&] {
    for (Index m = next++; m < m_total; m = next++) outputs[static_cast<std::size_t>(m)] = run_repeat(config, cell, model, m);
  };
  const unsigned workers = std::min<unsigned>(config.threads, static_cast<unsigned>(m_total));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // folds run in ascending repeat order so sums do not depend on scheduling
  CellResult res;
  res.spec = cell;
  res.lag_quantiles = LagQuantileAccumulator(config.quantiles);
  const Index t = config.steps;
  std::vector<Matrix> covs;
  std::vector<Vector> means, refs;
  std::vector<TraceRecord> traces, relay;
  std::vector<std::vector<double>> rmse_cols(static_cast<std::size_t>(t)), frmse_cols(static_cast<std::size_t>(t));
  std::vector<Matrix> quantiles;
  for (auto& o : outputs) {
    if (!o.ok) {
      res.failures.push_back(o.failure);
      continue;
    }
    if (&o == &outputs.front()) {
      res.summary_mean = o.summary_mean;
      res.summary_var = o.summary_var;
      res.ensembles = std::move(o.ensembles);
    }
    ++res.completed;
    res.repeat_ids.push_back(static_cast<Index>(&o - outputs.data()));
    if (o.collapsed) ++res.collapsed;
    if (o.cov.size()) {
      covs.push_back(std::move(o.cov));
      means.push_back(std::move(o.mean));
      refs.push_back(std::move(o.reference_mean));
    }
    traces.insert(traces.end(), o.traces.begin(), o.traces.end());
    relay.insert(relay.end(), o.relay.begin(), o.relay.end());
    res.rmse.push_back(time_average(o.rmse_time, config.spin_up));
    res.filter_rmse.push_back(time_average(o.filter_rmse_time, config.spin_up));
    for (Index r = 0; r < t; ++r) {
      rmse_cols[static_cast<std::size_t>(r)].push_back(o.rmse_time[static_cast<std::size_t>(r)]);
      frmse_cols[static_cast<std::size_t>(r)].push_back(o.filter_rmse_time[static_cast<std::size_t>(r)]);
    }
    quantiles.push_back(std::move(o.quantiles));
    res.lag_quantiles.merge(o.lag_quantiles);
  }
  if (res.completed == 0) return res;

  if (const LinearGaussianSpec* lg = model.linear_gaussian()) {
    // the smoothing covariance does not depend on the data
    res.reference_cov = rts_exact(*lg, RowMatrix::Zero(t, lg->obs_dim())).joint_cov;
    res.cov = cov_bias_mse(covs, res.reference_cov);
    res.mean_rmse = mean_rmse(means, refs);
  }
  res.gain_signal = gain_signal_trace(traces);
  res.relay = gain_signal_trace(relay);
  res.rmse_time.resize(t);
  res.filter_rmse_time.resize(t);
  for (Index r = 0; r < t; ++r) {
    const auto& a = rmse_cols[static_cast<std::size_t>(r)];
    const auto& b = frmse_cols[static_cast<std::size_t>(r)];
    res.rmse_time(r) = pairwise_sum(a.data(), a.size()) / static_cast<double>(a.size());
    res.filter_rmse_time(r) = pairwise_sum(b.data(), b.size()) / static_cast<double>(b.size());
  }
  res.quantiles = Matrix::Zero(t, static_cast<Index>(config.quantiles.size()));
  std::vector<double> buf(quantiles.size());
  for (Index r = 0; r < res.quantiles.rows(); ++r) {
    for (Index c = 0; c < res.quantiles.cols(); ++c) {
      for (std::size_t i = 0; i < quantiles.size(); ++i) buf[i] = quantiles[i](r, c);
      res.quantiles(r, c) = pairwise_sum(buf.data(), buf.size()) / static_cast<double>(buf.size());
    }
  }
  return res;
}

std::vector<std::string> write_cell(const std::string& dir, const ExperimentConfig& config, const CellResult& res) {
  fs::create_directories(dir);
  std::vector<std::string> files;
  auto path = [&](const std::string& name) {
    files.push_back((fs::path(dir) / name).string());
    return files.back();
  };

  if (res.cov) {
    write_matrix_csv(path("cov_bias.csv"), res.cov->bias);
    write_matrix_csv(path("cov_rmse.csv"), res.cov->rmse);
    write_matrix_csv(path("cov_mean.csv"), res.cov->mean);
    write_matrix_csv(path("reference_cov.csv"), res.reference_cov);
    auto os = open_out(path("mean_rmse.csv"));
    const Index t = config.steps;
    const Index d = res.mean_rmse.size() / t;
    os << "time" << (d == 1 ? std::string(",rmse") : indexed_columns("rmse", d)) << '\n';
    for (Index s = 0; s < t; ++s) {
      os << s + 1;
      for (Index k = 0; k < d; ++k) os << ',' << format_double(res.mean_rmse(s * d + k));
      os << '\n';
    }
  }
  write_trace_csv(path("gain_signal.csv"), res.gain_signal);
  if (!res.relay.empty()) write_trace_csv(path("gain_signal_relay.csv"), res.relay);

  {
    auto os = open_out(path("rmse.csv"));
    os << "repeat,rmse,filter_rmse\n";
    for (std::size_t i = 0; i < res.rmse.size(); ++i) {
      os << res.repeat_ids[i] << ',' << format_double(res.rmse[i]) << ',' << format_double(res.filter_rmse[i]) << '\n';
    }
  }
  if (res.completed > 0) {
    {
      auto os = open_out(path("rmse_time.csv"));
      os << "time,rmse,filter_rmse\n";
      for (Index s = 0; s < res.rmse_time.size(); ++s) {
        os << s + 1 << ',' << format_double(res.rmse_time(s)) << ',' << format_double(res.filter_rmse_time(s)) << '\n';
      }
    }
    {
      auto os = open_out(path("quantiles.csv"));
      os << "time" << quantile_header(config.quantiles) << '\n';
      for (Index s = 0; s < res.quantiles.rows(); ++s) {
        os << s + 1;
        for (Index c = 0; c < res.quantiles.cols(); ++c) os << ',' << format_double(res.quantiles(s, c));
        os << '\n';
      }
    }
    {
      auto os = open_out(path("lag_quantiles.csv"));
      os << "lag,cycles" << quantile_header(config.quantiles) << '\n';
      const auto counts = res.lag_quantiles.counts();
      for (const auto& [lag, q] : res.lag_quantiles.averages()) {
        os << lag << ',' << counts.at(lag);
        for (double v : q) os << ',' << format_double(v);
        os << '\n';
      }
    }
  }
  if (res.summary_mean.size()) {
    auto os = open_out(path("ensemble_summary.csv"));
    const Index d = res.summary_mean.cols();
    os << "time" << indexed_columns("mean", d) << indexed_columns("var", d) << '\n';
    for (Index s = 0; s < res.summary_mean.rows(); ++s) {
      os << s + 1;
      for (Index k = 0; k < d; ++k) os << ',' << format_double(res.summary_mean(s, k));
      for (Index k = 0; k < d; ++k) os << ',' << format_double(res.summary_var(s, k));
      os << '\n';
    }
  }
  if (!res.ensembles.empty()) {
    fs::create_directories(fs::path(dir) / "ensembles");
    for (std::size_t s = 0; s < res.ensembles.size(); ++s) {
      write_ensemble_csv(path("ensembles/ensemble_" + std::to_string(s + 1) + ".csv"), Ensemble::single(res.ensembles[s]));
    }
  }
  return files;
}

std::string sha256_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot read '" + path + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    fail(ErrorCode::Io, "SHA-256 unavailable");
  }
  char buf[1 << 15];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(is.gcount()));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto model = make_model(config.model);
  const fs::path root(config.output_dir);
  fs::create_directories(root);

  ExperimentReport report;
  std::vector<std::string> abs_files;
  {
    const std::string twin_path = (root / "twin.csv").string();
    auto os = open_out(twin_path);
    write_twin_csv(os, generate_twin(*model, config.steps, config.seed, 0));
    abs_files.push_back(twin_path);
  }
  for (const auto& cell : expand_cells(config)) {
    CellResult res = run_cell(config, cell, *model);
    for (auto& f : write_cell((root / cell.name()).string(), config, res)) abs_files.push_back(std::move(f));
    report.cells.push_back(std::move(res));
  }

  {
    const std::string summary_path = (root / "summary.csv").string();
    auto os = open_out(summary_path);
    os << "cell,model,variant,engine,filter,members,lag,repeats,completed,failed,collapsed,rmse_mean,rmse_ci_low,rmse_ci_high,"
          "filter_rmse_mean,mean_rmse_avg,cov_rmse_avg,cov_abs_bias_11\n";
    for (const auto& r : report.cells) {
      const auto& s = r.spec.smoother;
      const MeanCI ci = mean_ci95(r.rmse);
      const MeanCI fci = mean_ci95(r.filter_rmse);
      const double nan = std::numeric_limits<double>::quiet_NaN();
      os << r.spec.name() << ',' << config.model << ',' << to_string(s.variant) << ',' << to_string(s.engine) << ','
         << to_string(s.filter) << ',' << r.spec.members << ',' << (s.lag ? std::to_string(*s.lag) : std::string("full")) << ','
         << config.repeats << ',' << r.completed << ',' << r.failures.size() << ',' << r.collapsed << ','
         << format_double(r.completed ? ci.mean : nan) << ',' << format_double(r.completed ? ci.lower : nan) << ','
         << format_double(r.completed ? ci.upper : nan) << ',' << format_double(r.completed ? fci.mean : nan) << ','
         << format_double(r.mean_rmse.size() ? r.mean_rmse.mean() : nan) << ','
         << format_double(r.cov ? mean_of(r.cov->rmse) : nan) << ','
         << format_double(r.cov ? std::abs(r.cov->bias(0, 0)) : nan) << '\n';
    }
    abs_files.push_back(summary_path);
  }

  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest;
  manifest["version"] = kVersion;
  manifest["config"] = json::parse(config_to_json(config));
  manifest["seeds"] = {{"base_seed", config.seed},
                       {"repeats", config.repeats},
                       {"streams", "every draw is keyed by (base_seed, repeat, step, purpose); cells share the keys"}};
  manifest["files"] = json::array();
  for (const auto& f : abs_files) {
    const std::string rel = fs::relative(f, root).generic_string();
    report.files.push_back(rel);
    manifest["files"].push_back({{"path", rel}, {"sha256", sha256_file(f)}, {"bytes", fs::file_size(f)}});
  }
  manifest["failures"] = json::array();
  manifest["collapsed_repeats"] = json::object();
  for (const auto& r : report.cells) {
    for (const auto& f : r.failures) {
      manifest["failures"].push_back({{"cell", r.spec.name()}, {"repeat", f.repeat}, {"code", f.code}, {"message", f.message}});
    }
    manifest["collapsed_repeats"][r.spec.name()] = r.collapsed;
  }
  manifest["threads"] = config.threads;
  manifest["wall_seconds"] = report.wall_seconds;
  report.manifest_path = (root / "manifest.json").string();
  auto os = open_out(report.manifest_path);
  os << manifest.dump(2) << '\n';
  return report;
}

std::vector<EquivalenceRow> engine_equivalence(const std::string& model_name, Index members, Index steps, std::uint64_t seed,
                                               double tolerance) {
  const auto model = make_model(model_name);
  const TwinData twin = generate_twin(*model, steps, seed, 0);
  const bool lorenz = model_name == "lorenz63";
  std::vector<EquivalenceRow> rows;
  for (Variant v : {Variant::Dense, Variant::BackwardSingle, Variant::BackwardMulti, Variant::ForwardMulti, Variant::FixedPoint}) {
    SmootherConfig c;
    c.variant = v;
    c.filter = lorenz && v != Variant::ForwardMulti ? FilterKind::Sparse : FilterKind::Dense;
    c.dense_decoupled = lorenz;
    c.record_traces = false;
    EquivalenceRow row{model_name, to_string(v), to_string(c.filter), 0.0, false, ""};
    try {
      std::vector<RowMatrix> traj;
      for (Engine e : {Engine::Transport, Engine::Kalman}) {
        c.engine = e;
        EnsembleSmoother s(*model, c, members, seed, 0);
        for (Index k = 0; k < steps; ++k) s.assimilate(twin.observation(k));
        s.finish();
        traj.push_back(s.trajectory());
      }
      row.max_rel_deviation = (traj[0] - traj[1]).cwiseAbs().maxCoeff() / std::max(traj[1].cwiseAbs().maxCoeff(), 1e-300);
      row.ok = row.max_rel_deviation < tolerance;
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

OracleCheck oracle_check(Index steps, std::uint64_t seed) {
  const auto model = ar1_model();
  const TwinData twin = generate_twin(*model, steps, seed, 0);
  const RtsResult rts = rts_exact(*model->linear_gaussian(), twin.observations);
  const GaussianBelief joint = joint_gaussian_oracle(*model->linear_gaussian(), twin.observations);
  return {steps, (rts.joint_mean - joint.mean).cwiseAbs().maxCoeff(), (rts.joint_cov - joint.cov).cwiseAbs().maxCoeff()};
}

std::vector<std::string> export_ensembles(const std::string& model_name, const SmootherConfig& smoother, Index members, Index steps,
                                          std::uint64_t seed, const std::string& dir) {
  const auto model = make_model(model_name);
  const TwinData twin = generate_twin(*model, steps, seed, 0);
  EnsembleSmoother s(*model, smoother, members, seed, 0);
  for (Index k = 0; k < steps; ++k) s.assimilate(twin.observation(k));
  s.finish();
  fs::create_directories(dir);
  std::vector<std::string> files;
  files.push_back((fs::path(dir) / "twin.csv").string());
  {
    auto os = open_out(files.back());
    write_twin_csv(os, twin);
  }
  for (Index r = 0; r < steps; ++r) {
    files.push_back((fs::path(dir) / ("ensemble_" + std::to_string(r + 1) + ".csv")).string());
    write_ensemble_csv(files.back(), Ensemble::single(s.state(r)));
    files.push_back((fs::path(dir) / ("filter_" + std::to_string(r + 1) + ".csv")).string());
    write_ensemble_csv(files.back(), Ensemble::single(s.filter_state(r)));
  }
  return files;
}

}  // namespace ents
