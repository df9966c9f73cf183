#include "experiment/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "core/error.hpp"
#include "json.hpp"
#include "ssm/lorenz63.hpp"

namespace ents {

using nlohmann::json;

namespace {

const std::set<std::string> kKeys{"model",   "paper_scale", "smoothers", "engine",     "filter",    "ensemble_sizes",
                                  "N",       "lags",        "steps",     "t",          "spin_up",   "repeats",
                                  "seed",    "output_dir",  "threads",   "quantiles",  "write_ensembles"};
const std::set<std::string> kSmootherKeys{"variant", "engine", "filter", "lag", "fixed_point_index", "decoupled", "semi_empirical"};

json parse_with_context(const std::string& text, const char* what) {
  if (text.empty()) return json::object();
  try {
    json j = json::parse(text);
    if (!j.is_object()) fail(ErrorCode::Config, std::string(what) + ": top level must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    // e.byte is 1-based and points just past the offending character
    const std::size_t pos = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1, line_start = 0;
    for (std::size_t i = 0; i < pos; ++i) {
      if (text[i] == '\n') {
        ++line;
        line_start = i + 1;
      }
    }
    const std::size_t line_end = text.find('\n', line_start);
    const std::string excerpt = text.substr(line_start, line_end == std::string::npos ? std::string::npos : line_end - line_start);
    fail(ErrorCode::Config, std::string(what) + ": parse error at line " + std::to_string(line) + ", column " +
                                std::to_string(pos - line_start + 1) + ": " + excerpt);
  }
}

std::optional<Index> parse_lag(const json& j) {
  if (j.is_null() || (j.is_string() && j.get<std::string>() == "full")) return std::nullopt;
  if (!j.is_number_integer()) fail(ErrorCode::Config, "lag must be an integer, null or \"full\"");
  return j.get<Index>();
}

template <class T>
T get_as(const json& j, const char* key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::Config, std::string("config key '") + key + "' has the wrong type: " + j.dump());
  }
}

SmootherConfig parse_smoother(const json& j, const SmootherConfig& defaults) {
  if (j.is_string()) return parse_smoother_spec(j.get<std::string>(), defaults);
  if (!j.is_object()) fail(ErrorCode::Config, "smoother entries must be strings or objects");
  for (const auto& [key, value] : j.items()) {
    if (!kSmootherKeys.count(key)) fail(ErrorCode::Config, "unknown smoother key '" + key + "'");
  }
  SmootherConfig c = defaults;
  if (!j.contains("variant")) fail(ErrorCode::Config, "smoother object needs a 'variant'");
  c.variant = parse_variant(get_as<std::string>(j["variant"], "variant"));
  if (j.contains("engine")) c.engine = parse_engine(get_as<std::string>(j["engine"], "engine"));
  if (j.contains("filter")) c.filter = parse_filter(get_as<std::string>(j["filter"], "filter"));
  if (j.contains("lag")) c.lag = parse_lag(j["lag"]);
  if (j.contains("fixed_point_index")) c.fixed_point_index = get_as<Index>(j["fixed_point_index"], "fixed_point_index");
  if (j.contains("decoupled")) c.dense_decoupled = get_as<bool>(j["decoupled"], "decoupled");
  if (j.contains("semi_empirical")) c.semi_empirical = get_as<bool>(j["semi_empirical"], "semi_empirical");
  return c;
}

json smoother_to_json(const SmootherConfig& c) {
  json j{{"variant", to_string(c.variant)}, {"engine", to_string(c.engine)}, {"filter", to_string(c.filter)}};
  j["lag"] = c.lag ? json(*c.lag) : json("full");
  if (c.fixed_point_index) j["fixed_point_index"] = *c.fixed_point_index;
  if (c.dense_decoupled) j["decoupled"] = true;
  if (c.semi_empirical) j["semi_empirical"] = true;
  return j;
}

SmootherConfig smoother(Variant v, Engine e, FilterKind f, std::optional<Index> lag = std::nullopt, bool decoupled = false) {
  SmootherConfig c;
  c.variant = v;
  c.engine = e;
  c.filter = f;
  c.lag = lag;
  c.dense_decoupled = decoupled;
  return c;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (model != "ar1" && model != "lorenz63") fail(ErrorCode::Config, "unknown model '" + model + "'");
  if (smoothers.empty()) fail(ErrorCode::Config, "no smoothers configured");
  if (ensemble_sizes.empty()) fail(ErrorCode::Config, "no ensemble sizes configured");
  for (Index n : ensemble_sizes) {
    if (n < 2) fail(ErrorCode::Config, "ensemble sizes must be at least 2");
  }
  for (const auto& l : lags) {
    if (l && *l < 0) fail(ErrorCode::Config, "lags must be non-negative");
  }
  if (steps < 1) fail(ErrorCode::Config, "steps must be positive");
  if (spin_up < 0 || spin_up >= steps) fail(ErrorCode::Config, "spin_up must lie in [0, steps)");
  if (repeats < 1) fail(ErrorCode::Config, "repeats must be positive");
  if (threads < 1) fail(ErrorCode::Config, "threads must be positive");
  if (output_dir.empty()) fail(ErrorCode::Config, "output_dir is empty");
  if (!std::is_sorted(quantiles.begin(), quantiles.end())) fail(ErrorCode::Config, "quantiles must be sorted");
  for (double p : quantiles) {
    if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::Config, "quantiles must lie in (0, 1)");
  }
  for (const auto& s : smoothers) s.validate();
}

unsigned default_threads() {
  if (const char* env = std::getenv("ENTS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

ExperimentConfig default_config(const std::string& model, bool paper_scale) {
  ExperimentConfig c;
  c.model = model;
  c.threads = default_threads();
  if (model == "ar1") {
    c.steps = 30;
    c.spin_up = 0;
    c.repeats = 1000;
    c.ensemble_sizes = {100, 1000};
    for (Variant v : {Variant::Dense, Variant::BackwardSingle, Variant::BackwardMulti, Variant::ForwardMulti}) {
      for (Engine e : {Engine::Transport, Engine::Kalman}) c.smoothers.push_back(smoother(v, e, FilterKind::Dense));
    }
  } else if (model == "lorenz63") {
    c.steps = paper_scale ? 2000 : 700;
    c.spin_up = paper_scale ? 1000 : 200;
    c.repeats = paper_scale ? 100 : 20;
    c.ensemble_sizes = {50, 100};
    c.smoothers = {smoother(Variant::Dense, Engine::Transport, FilterKind::Sparse, 100, true),
                   smoother(Variant::BackwardSingle, Engine::Transport, FilterKind::Sparse),
                   smoother(Variant::BackwardMulti, Engine::Transport, FilterKind::Sparse, 100)};
  } else {
    fail(ErrorCode::Config, "unknown model '" + model + "'");
  }
  return c;
}

SmootherConfig parse_smoother_spec(const std::string& spec, const SmootherConfig& defaults) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t colon = spec.find(':', start);
    parts.push_back(spec.substr(start, colon == std::string::npos ? std::string::npos : colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (parts.size() > 3) fail(ErrorCode::Config, "smoother spec '" + spec + "' has more than three fields");
  SmootherConfig c = defaults;
  c.variant = parse_variant(parts[0]);
  if (parts.size() > 1) c.engine = parse_engine(parts[1]);
  if (parts.size() > 2) c.filter = parse_filter(parts[2]);
  return c;
}

ExperimentConfig parse_experiment_config(const std::string& json_text, const std::string& overrides_json) {
  json merged = parse_with_context(json_text, "config");
  merged.merge_patch(parse_with_context(overrides_json, "overrides"));
  for (const auto& [key, value] : merged.items()) {
    if (!kKeys.count(key)) fail(ErrorCode::Config, "unknown config key '" + key + "'");
  }

  const std::string model = merged.contains("model") ? get_as<std::string>(merged["model"], "model") : "ar1";
  const bool paper_scale = merged.contains("paper_scale") && get_as<bool>(merged["paper_scale"], "paper_scale");
  ExperimentConfig c = default_config(model, paper_scale);

  SmootherConfig base = c.smoothers.front();
  base.lag = std::nullopt;
  base.dense_decoupled = model == "lorenz63";
  if (model == "lorenz63") base.lag = 100;
  if (merged.contains("smoothers")) {
    const json& list = merged["smoothers"];
    if (!list.is_array()) fail(ErrorCode::Config, "'smoothers' must be an array");
    c.smoothers.clear();
    for (const auto& item : list) {
      SmootherConfig s = parse_smoother(item, base);
      // the one-off backward sweep covers the whole window unless told otherwise
      const bool lag_given = item.is_object() && item.contains("lag");
      if (model == "lorenz63" && s.variant == Variant::BackwardSingle && !lag_given) s.lag = std::nullopt;
      c.smoothers.push_back(s);
    }
  }
  const bool engine_override = merged.contains("engine");
  const bool filter_override = merged.contains("filter");
  if (engine_override || filter_override) {
    std::vector<SmootherConfig> kept;
    std::set<std::string> seen;
    for (auto s : c.smoothers) {
      if (engine_override) s.engine = parse_engine(get_as<std::string>(merged["engine"], "engine"));
      if (filter_override) s.filter = parse_filter(get_as<std::string>(merged["filter"], "filter"));
      if (seen.insert(smoother_to_json(s).dump()).second) kept.push_back(s);
    }
    c.smoothers = std::move(kept);
  }

  const char* n_key = merged.contains("N") ? "N" : "ensemble_sizes";
  if (merged.contains(n_key)) {
    const json& v = merged[n_key];
    c.ensemble_sizes = v.is_array() ? get_as<std::vector<Index>>(v, n_key) : std::vector<Index>{get_as<Index>(v, n_key)};
  }
  if (merged.contains("lags")) {
    const json& v = merged["lags"];
    c.lags.clear();
    if (v.is_array()) {
      for (const auto& l : v) c.lags.push_back(parse_lag(l));
    } else {
      c.lags.push_back(parse_lag(v));
    }
  }
  const char* t_key = merged.contains("t") ? "t" : "steps";
  if (merged.contains(t_key)) c.steps = get_as<Index>(merged[t_key], t_key);
  if (merged.contains("spin_up")) c.spin_up = get_as<Index>(merged["spin_up"], "spin_up");
  if (merged.contains("repeats")) c.repeats = get_as<Index>(merged["repeats"], "repeats");
  if (merged.contains("seed")) c.seed = get_as<std::uint64_t>(merged["seed"], "seed");
  if (merged.contains("output_dir")) c.output_dir = get_as<std::string>(merged["output_dir"], "output_dir");
  if (merged.contains("threads")) {
    const auto t = get_as<long long>(merged["threads"], "threads");
    if (t < 1) fail(ErrorCode::Config, "threads must be positive");
    c.threads = static_cast<unsigned>(t);
  }
  if (merged.contains("quantiles")) c.quantiles = get_as<std::vector<double>>(merged["quantiles"], "quantiles");
  if (merged.contains("write_ensembles")) c.write_ensembles = get_as<bool>(merged["write_ensembles"], "write_ensembles");
  c.validate();
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["model"] = c.model;
  j["smoothers"] = json::array();
  for (const auto& s : c.smoothers) j["smoothers"].push_back(smoother_to_json(s));
  j["ensemble_sizes"] = c.ensemble_sizes;
  j["lags"] = json::array();
  for (const auto& l : c.lags) j["lags"].push_back(l ? json(*l) : json("full"));
  j["steps"] = c.steps;
  j["spin_up"] = c.spin_up;
  j["repeats"] = c.repeats;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  j["quantiles"] = c.quantiles;
  j["write_ensembles"] = c.write_ensembles;
  return j.dump(2);
}

std::unique_ptr<StateSpaceModel> make_model(const std::string& name) {
  if (name == "ar1") return ar1_model();
  if (name == "lorenz63") return std::make_unique<Lorenz63Model>();
  fail(ErrorCode::Config, "unknown model '" + name + "'");
}

}  // namespace ents
