#include "caloricflow/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace caloricflow::cli {

using nlohmann::json;

namespace {

const std::vector<std::string>& recipe_names() {
  static const std::vector<std::string> names{"constant",     "gaussian_geodesic", "bump_geodesic",
                                              "generic_bump", "generic_moving",    "gaussian_moving"};
  return names;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

// Strict reader over one JSON object: typed reads, and rejection of keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + where() + "' must be an object");
  }

  void read(const char* key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw type_error(key, "an integer");
      out = v->get<int>();
    }
  }
  void read(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) throw type_error(key, "a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void read(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw type_error(key, "a number");
      out = v->get<double>();
    }
  }
  void read(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw type_error(key, "a boolean");
      out = v->get<bool>();
    }
  }
  void read(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw type_error(key, "a string");
      out = v->get<std::string>();
    }
  }
  void read(const char* key, std::vector<int>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw type_error(key, "an array of integers");
      out.clear();
      for (const json& e : *v) {
        if (!e.is_number_integer()) throw type_error(key, "an array of integers");
        out.push_back(e.get<int>());
      }
    }
  }
  void read(const char* key, std::array<int, 2>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number_integer() || !(*v)[1].is_number_integer())
        throw type_error(key, "a pair of integers");
      out = {(*v)[0].get<int>(), (*v)[1].get<int>()};
    }
  }

  Section sub(const char* key) {
    static const json empty = json::object();
    const json* v = find(key);
    return Section(v ? *v : empty, where(key));
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown key '" + where(item.key()) + "'");
  }

 private:
  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? std::string("<root>") : path_;
    return path_.empty() ? key : path_ + "." + key;
  }
  ConfigError type_error(const std::string& key, const char* what) const {
    return ConfigError("'" + where(key) + "' must be " + what);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string scheme_name(heat::Scheme s) {
  return s == heat::Scheme::ExplicitProjected ? "explicit" : "duhamel";
}

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::HeatFlow: return "heatflow";
    case Experiment::Gauge: return "gauge";
    case Experiment::EnergySpace: return "energyspace";
    case Experiment::WaveMap: return "wavemap";
    case Experiment::Verify: return "verify";
    case Experiment::Converge: return "converge";
  }
  return "verify";
}

Experiment experiment_from_string(const std::string& name) {
  for (Experiment e : {Experiment::HeatFlow, Experiment::Gauge, Experiment::EnergySpace, Experiment::WaveMap,
                       Experiment::Verify, Experiment::Converge})
    if (to_string(e) == name) return e;
  throw ConfigError("unknown experiment '" + name + "'");
}

const std::vector<std::string>& convergence_checks() {
  static const std::vector<std::string> names{
      "laplacian",   "heat_geodesic", "comparison",   "saturation",         "torsion",
      "curvature",   "ps_frame",      "energy_drift", "dalembert",          "stress_divergence",
      "wave_tension", "travelling",   "self_similar", "hopf"};
  return names;
}

heat::HeatFlowConfig default_flow() {
  heat::HeatFlowConfig f;
  f.s_max = 256;
  return f;
}

synth::Recipe default_recipe() {
  synth::Recipe r;
  r.name = "generic_moving";
  r.velocity_amplitude = 0.5;
  return r;
}

Grid2D ExperimentConfig::make_grid() const { return Grid2D(grid.n, grid.L); }

gauge::GaugeConfig ExperimentConfig::gauge_config() const {
  gauge::GaugeConfig g = gauge;
  g.flow = flow;
  return g;
}

synth::Recipe ExperimentConfig::recipe() const {
  synth::Recipe r = data;
  r.m = m;
  r.radius = grid.R_support;
  return r;
}

void ExperimentConfig::validate() const {
  if (schema_version != kSchemaVersion)
    throw ConfigError("schema_version " + std::to_string(schema_version) + " is not supported (expected " +
                      std::to_string(kSchemaVersion) + ")");
  if (m < 1 || m > 8) throw ConfigError("m must lie in [1, 8]");
  if (!power_of_two(grid.n) || grid.n < 8 || grid.n > 2048)
    throw ConfigError("grid.n must be a power of two in [8, 2048]");
  if (!(grid.L > 0) || !std::isfinite(grid.L)) throw ConfigError("grid.L must be positive");
  if (!(grid.R_support > 0) || grid.R_support > grid.L / 2) throw ConfigError("grid.R_support must lie in (0, L/2]");
  try {
    flow.validate();
    wave.evolution.validate();
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  if (!(gauge.frame_tail_tol > 0)) throw ConfigError("gauge.frame_tail_tol must be positive");
  if (gauge.probe_fraction < 0 || gauge.probe_fraction > 0.5)
    throw ConfigError("gauge.probe_fraction must lie in [0, 1/2]");
  if (!(gauge.drift_tol > 0)) throw ConfigError("gauge.drift_tol must be positive");
  if (!contains(recipe_names(), data.name)) throw ConfigError("unknown data recipe '" + data.name + "'");
  if (!std::isfinite(data.amplitude) || !std::isfinite(data.velocity_amplitude))
    throw ConfigError("data amplitudes must be finite");
  if (!(data.sigma > 0)) throw ConfigError("data.sigma must be positive");
  if (!(wave.duration > 0) || wave.duration > 64) throw ConfigError("wave.duration must lie in (0, 64]");
  if (!(energyspace.pair_amplitude > 0) || !std::isfinite(energyspace.pair_amplitude))
    throw ConfigError("energyspace.pair_amplitude must be positive");
  if (!contains(convergence_checks(), converge.check))
    throw ConfigError("unknown convergence check '" + converge.check + "'");
  if (converge.resolutions.size() < 3) throw ConfigError("converge.resolutions needs at least three entries");
  for (std::size_t i = 0; i < converge.resolutions.size(); ++i) {
    const int n = converge.resolutions[i];
    if (!power_of_two(n) || n < 8 || n > 2048) throw ConfigError("converge.resolutions must be powers of two in [8, 2048]");
    if (i > 0 && n <= converge.resolutions[i - 1]) throw ConfigError("converge.resolutions must be increasing");
  }
  if (output_dir.empty()) throw ConfigError("output_dir must be nonempty");
}

json ExperimentConfig::to_json() const {
  return json{
      {"schema_version", schema_version},
      {"m", m},
      {"grid", {{"n", grid.n}, {"L", grid.L}, {"R_support", grid.R_support}}},
      {"flow",
       {{"ds_factor", flow.ds_factor},
        {"s_max", flow.s_max},
        {"tail_eps", flow.tail_eps},
        {"scheme", scheme_name(flow.scheme)},
        {"ladder",
         {{"s_min", flow.ladder.s_min}, {"ratio", flow.ladder.ratio}, {"include_zero", flow.ladder.include_zero}}}}},
      {"gauge",
       {{"frame_tail_tol", gauge.frame_tail_tol},
        {"probe_fraction", gauge.probe_fraction},
        {"require_tail", gauge.require_tail},
        {"drift_tol", gauge.drift_tol}}},
      {"data",
       {{"recipe", data.name},
        {"amplitude", data.amplitude},
        {"sigma", data.sigma},
        {"velocity_amplitude", data.velocity_amplitude}}},
      {"wave",
       {{"duration", wave.duration},
        {"dt_factor", wave.evolution.dt_factor},
        {"drift_budget", wave.evolution.drift_budget},
        {"record_every", wave.evolution.record_every}}},
      {"energyspace",
       {{"symmetries", energyspace.symmetries},
        {"pair_amplitude", energyspace.pair_amplitude},
        {"translation", energyspace.translation}}},
      {"converge", {{"check", converge.check}, {"resolutions", converge.resolutions}}},
      {"experiment", to_string(experiment)},
      {"output_dir", output_dir},
      {"seed", seed},
  };
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  Section root(j, "");
  root.read("schema_version", c.schema_version);
  root.read("m", c.m);

  Section grid = root.sub("grid");
  grid.read("n", c.grid.n);
  grid.read("L", c.grid.L);
  grid.read("R_support", c.grid.R_support);
  grid.finish();

  Section flow = root.sub("flow");
  flow.read("ds_factor", c.flow.ds_factor);
  flow.read("s_max", c.flow.s_max);
  flow.read("tail_eps", c.flow.tail_eps);
  std::string scheme = scheme_name(c.flow.scheme);
  flow.read("scheme", scheme);
  if (scheme == "explicit")
    c.flow.scheme = heat::Scheme::ExplicitProjected;
  else if (scheme == "duhamel")
    c.flow.scheme = heat::Scheme::DuhamelPicard;
  else
    throw ConfigError("flow.scheme must be 'explicit' or 'duhamel'");
  Section ladder = flow.sub("ladder");
  ladder.read("s_min", c.flow.ladder.s_min);
  ladder.read("ratio", c.flow.ladder.ratio);
  ladder.read("include_zero", c.flow.ladder.include_zero);
  ladder.finish();
  flow.finish();

  Section gauge = root.sub("gauge");
  gauge.read("frame_tail_tol", c.gauge.frame_tail_tol);
  gauge.read("probe_fraction", c.gauge.probe_fraction);
  gauge.read("require_tail", c.gauge.require_tail);
  gauge.read("drift_tol", c.gauge.drift_tol);
  gauge.finish();

  Section data = root.sub("data");
  data.read("recipe", c.data.name);
  data.read("amplitude", c.data.amplitude);
  data.read("sigma", c.data.sigma);
  data.read("velocity_amplitude", c.data.velocity_amplitude);
  data.finish();

  Section wave = root.sub("wave");
  wave.read("duration", c.wave.duration);
  wave.read("dt_factor", c.wave.evolution.dt_factor);
  wave.read("drift_budget", c.wave.evolution.drift_budget);
  wave.read("record_every", c.wave.evolution.record_every);
  wave.finish();

  Section es = root.sub("energyspace");
  es.read("symmetries", c.energyspace.symmetries);
  es.read("pair_amplitude", c.energyspace.pair_amplitude);
  es.read("translation", c.energyspace.translation);
  es.finish();

  Section conv = root.sub("converge");
  conv.read("check", c.converge.check);
  conv.read("resolutions", c.converge.resolutions);
  conv.finish();

  std::string experiment = to_string(c.experiment);
  root.read("experiment", experiment);
  c.experiment = experiment_from_string(experiment);
  root.read("output_dir", c.output_dir);
  root.read("seed", c.seed);
  root.finish();

  c.data.m = c.m;
  c.data.radius = c.grid.R_support;
  return c;
}

void apply_override(json& j, const std::string& dotted_path, const std::string& text) {
  if (dotted_path.empty()) throw ConfigError("empty override key");
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_path.find('.', start);
    const std::string key = dotted_path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("malformed override key '" + dotted_path + "'");
    if (!node->is_object()) throw ConfigError("override '" + dotted_path + "' descends into a non-object");
    if (dot == std::string::npos) {
      json value = json::parse(text, nullptr, false);
      (*node)[key] = value.is_discarded() ? json(text) : std::move(value);
      return;
    }
    json& next = (*node)[key];
    if (next.is_null()) next = json::object();
    node = &next;
    start = dot + 1;
  }
}

ExperimentConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  json j = json::parse(buffer.str(), nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file '" + path.string() + "' is not valid JSON");
  for (const std::string& o : overrides) {
    const std::size_t eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' must have the form key=value");
    apply_override(j, o.substr(0, eq), o.substr(eq + 1));
  }
  ExperimentConfig c = ExperimentConfig::from_json(j);
  c.validate();
  return c;
}

}  // namespace caloricflow::cli
