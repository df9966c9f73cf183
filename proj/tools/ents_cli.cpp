// Experiment runner. Talks to the library only through the C interface.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ents/ents.h"
#include "json.hpp"

namespace {

using nlohmann::json;

struct StudyFlags {
  std::string config_path;
  std::optional<std::string> model;
  std::vector<std::string> smoothers;
  std::optional<std::string> engine;
  std::optional<std::string> filter;
  std::vector<long long> sizes;
  std::vector<std::string> lags;
  std::optional<long long> steps;
  std::optional<long long> spin_up;
  std::optional<long long> repeats;
  std::optional<unsigned long long> seed;
  std::optional<std::string> out;
  std::optional<long long> threads;
  std::vector<double> quantiles;
  bool paper_scale = false;
  bool write_ensembles = false;
  std::optional<long long> fixed_point_index;
  bool decoupled = false;
  bool semi_empirical = false;
};

void add_study_flags(CLI::App* app, StudyFlags& f) {
  app->add_option("--config", f.config_path, "JSON config file; flags override its keys")->check(CLI::ExistingFile);
  app->add_option("--model", f.model, "ar1 or lorenz63");
  app->add_option("--smoother", f.smoothers, "variant[:engine[:filter]], repeatable");
  app->add_option("--engine", f.engine, "transport or kalman, applied to every smoother");
  app->add_option("--filter", f.filter, "dense, sparse or semi_empirical, applied to every smoother");
  app->add_option("--N", f.sizes, "ensemble size, repeatable");
  app->add_option("--lag", f.lags, "lag window (integer or 'full'), repeatable");
  app->add_option("--t", f.steps, "number of assimilation steps");
  app->add_option("--spin-up", f.spin_up, "steps excluded from time averages");
  app->add_option("--repeats", f.repeats, "Monte Carlo repeats M");
  app->add_option("--seed", f.seed, "base seed");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--threads", f.threads, "worker threads (default: ENTS_THREADS or 1)");
  app->add_option("--quantiles", f.quantiles, "error quantile levels in (0, 1)");
  app->add_flag("--paper-scale", f.paper_scale, "Lorenz-63: t=2000, spin-up 1000, M=100");
  app->add_flag("--write-ensembles", f.write_ensembles, "also write repeat-0 ensembles per time");
  app->add_option("--fixed-point-index", f.fixed_point_index, "fixed-point smoother target time (1-based)");
  app->add_flag("--decoupled", f.decoupled, "dense smoother: per-state rows read only the observation");
  app->add_flag("--semi-empirical", f.semi_empirical, "kalman engine: use the known observation/forecast model");
}

std::string read_file(const std::string& path) {
  if (path.empty()) return "";
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json overrides_from(const StudyFlags& f) {
  json j = json::object();
  if (f.model) j["model"] = *f.model;
  if (f.paper_scale) j["paper_scale"] = true;
  const bool smoother_switches = f.fixed_point_index || f.decoupled || f.semi_empirical;
  if (!f.smoothers.empty()) {
    j["smoothers"] = json::array();
    for (const auto& s : f.smoothers) {
      if (!smoother_switches) {
        j["smoothers"].push_back(s);
        continue;
      }
      // expand variant[:engine[:filter]] so the switches can ride along
      json obj;
      std::vector<std::string> parts;
      std::stringstream ss(s);
      for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
      if (parts.empty() || parts.size() > 3) throw CLI::ValidationError("--smoother", "expected variant[:engine[:filter]]");
      obj["variant"] = parts[0];
      if (parts.size() > 1) obj["engine"] = parts[1];
      if (parts.size() > 2) obj["filter"] = parts[2];
      if (f.fixed_point_index) obj["fixed_point_index"] = *f.fixed_point_index;
      if (f.decoupled) obj["decoupled"] = true;
      if (f.semi_empirical) obj["semi_empirical"] = true;
      j["smoothers"].push_back(obj);
    }
  }
  if (f.engine) j["engine"] = *f.engine;
  if (f.filter) j["filter"] = *f.filter;
  if (!f.sizes.empty()) j["ensemble_sizes"] = f.sizes;
  if (!f.lags.empty()) {
    j["lags"] = json::array();
    for (const auto& l : f.lags) {
      if (l == "full") {
        j["lags"].push_back("full");
      } else {
        try {
          j["lags"].push_back(std::stoll(l));
        } catch (const std::exception&) {
          throw CLI::ValidationError("--lag", "expected an integer or 'full', got '" + l + "'");
        }
      }
    }
  }
  if (f.steps) j["steps"] = *f.steps;
  if (f.spin_up) j["spin_up"] = *f.spin_up;
  if (f.repeats) j["repeats"] = *f.repeats;
  if (f.seed) j["seed"] = *f.seed;
  if (f.out) j["output_dir"] = *f.out;
  if (f.threads) j["threads"] = *f.threads;
  if (!f.quantiles.empty()) j["quantiles"] = f.quantiles;
  if (f.write_ensembles) j["write_ensembles"] = true;
  return j;
}

struct CString {
  char* p = nullptr;
  ~CString() { ents_string_free(p); }
};

int report_failure(ents_status s) {
  std::cerr << "error (" << ents_status_name(s) << "): " << ents_last_error() << '\n';
  return s == ENTS_ERR_CONFIG || s == ENTS_ERR_INVALID_ARGUMENT ? 2 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble transport smoothers: experiments and checks"};
  app.set_version_flag("--version", std::string(ents_version()));
  app.require_subcommand(1);

  StudyFlags run_flags;
  auto* run = app.add_subcommand("run", "run a smoothing study and write CSVs plus a manifest");
  add_study_flags(run, run_flags);
  bool dry_run = false;
  run->add_flag("--dry-run", dry_run, "print the resolved config and exit");

  auto* equiv = app.add_subcommand("equivalence", "compare transport and closed-form engines on shared inputs");
  std::string eq_model = "ar1";
  long long eq_members = 100, eq_steps = 10;
  unsigned long long eq_seed = 1;
  double eq_tol = 1e-8;
  equiv->add_option("--model", eq_model, "ar1 or lorenz63")->capture_default_str();
  equiv->add_option("--N", eq_members, "ensemble size")->capture_default_str()->check(CLI::PositiveNumber);
  equiv->add_option("--t", eq_steps, "steps")->capture_default_str()->check(CLI::PositiveNumber);
  equiv->add_option("--seed", eq_seed, "seed")->capture_default_str();
  equiv->add_option("--tol", eq_tol, "maximum relative deviation")->capture_default_str();

  auto* oracle = app.add_subcommand("oracle-check", "RTS recursion against the joint Gaussian oracle");
  long long or_steps = 5;
  unsigned long long or_seed = 1;
  double or_tol = 1e-10;
  oracle->add_option("--t", or_steps, "steps")->capture_default_str()->check(CLI::PositiveNumber);
  oracle->add_option("--seed", or_seed, "seed")->capture_default_str();
  oracle->add_option("--tol", or_tol, "maximum absolute deviation")->capture_default_str();

  StudyFlags ex_flags;
  std::string ex_dir;
  auto* exp = app.add_subcommand("export-ensembles", "run one smoother once and write every ensemble");
  add_study_flags(exp, ex_flags);
  exp->add_option("--dir", ex_dir, "destination directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run->parsed() || exp->parsed()) {
      const StudyFlags& f = run->parsed() ? run_flags : ex_flags;
      const std::string config = read_file(f.config_path);
      const std::string overrides = overrides_from(f).dump();
      CString out;
      ents_status s;
      if (run->parsed() && dry_run) {
        s = ents_config_resolve(config.c_str(), overrides.c_str(), &out.p);
      } else if (run->parsed()) {
        s = ents_experiment_run(config.c_str(), overrides.c_str(), &out.p);
      } else {
        s = ents_export_ensembles(config.c_str(), overrides.c_str(), ex_dir.c_str(), &out.p);
      }
      if (s != ENTS_OK) return report_failure(s);
      if (run->parsed() && !dry_run) {
        const json r = json::parse(out.p);
        for (const auto& c : r["cells"]) {
          std::cout << c["name"].get<std::string>() << ": completed " << c["completed"] << ", failed " << c["failed"]
                    << ", collapsed " << c["collapsed"] << ", rmse " << c["rmse_mean"];
          if (c.contains("cov_rmse_avg")) std::cout << ", cov rmse " << c["cov_rmse_avg"];
          std::cout << '\n';
        }
        std::cout << "manifest: " << r["manifest"].get<std::string>() << '\n';
      } else {
        std::cout << out.p << '\n';
      }
      return 0;
    }
    if (equiv->parsed()) {
      CString out;
      int ok = 0;
      const ents_status s = ents_equivalence(eq_model.c_str(), static_cast<size_t>(eq_members), static_cast<size_t>(eq_steps),
                                             eq_seed, eq_tol, &out.p, &ok);
      if (s != ENTS_OK) return report_failure(s);
      std::cout << out.p << '\n';
      return ok ? 0 : 1;
    }
    if (oracle->parsed()) {
      CString out;
      const ents_status s = ents_oracle_check(static_cast<size_t>(or_steps), or_seed, &out.p);
      if (s != ENTS_OK) return report_failure(s);
      std::cout << out.p << '\n';
      const json r = json::parse(out.p);
      return r["max_mean_deviation"].get<double>() <= or_tol && r["max_cov_deviation"].get<double>() <= or_tol ? 0 : 1;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
