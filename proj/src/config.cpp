#include "mfpinn/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mfpinn/csv.hpp"
#include "mfpinn/errors.hpp"

namespace mfpinn::config {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

double parse_number(const std::string& tok, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config line " + std::to_string(line_no) +
                      ": bad number '" + tok + "'");
  }
}

Value parse_value(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  if (v.empty())
    throw ConfigError("config line " + std::to_string(line_no) + ": empty value");
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": unterminated string");
    return v.substr(1, v.size() - 2);
  }
  if (v.front() == '[') {
    if (v.back() != ']')
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": unterminated array");
    std::vector<double> arr;
    std::string inner = v.substr(1, v.size() - 2);
    std::stringstream ss(inner);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      arr.push_back(parse_number(tok, line_no));
    }
    return arr;
  }
  return parse_number(v, line_no);
}

}  // namespace

std::map<std::string, Value> parse_toml(const std::string& text) {
  std::map<std::string, Value> out;
  std::stringstream ss(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (out.count(full))
      throw ConfigError("config: duplicate key '" + full + "'");
    out[full] = parse_value(line.substr(eq + 1), line_no);
  }
  return out;
}

void ExperimentConfig::validate() const {
  composite1.validate();
  composite2.validate();
  if (oracle_n_elements < 2) throw ConfigError("oracle.n_elements must be >= 2");
  if (!(oracle_dt > 0.0)) throw ConfigError("oracle.dt must be positive");
  if (!(oracle_max_step_change > 0.0))
    throw ConfigError("oracle.max_step_change must be positive");
  if (oracle_snapshots < 2) throw ConfigError("oracle.n_snapshots must be >= 2");
  if (hidden_layers < 1 || hidden_width < 1)
    throw ConfigError("network must have at least one hidden neuron");
  train.validate();
  if (n_collocation < 0 || n_boundary < 0 || n_initial < 0)
    throw ConfigError("point counts must be nonnegative");
  if (n_boundary % 2 != 0) throw ConfigError("points.boundary must be even");
  if (low_labeled < 0 || pinn_labeled < 0 || cloud_points < 0)
    throw ConfigError("labeled counts must be nonnegative");
  if (seeds.empty()) throw ConfigError("experiment.seeds must not be empty");
  if (!(temp_scale > 0.0)) throw ConfigError("normalization.temp_scale must be > 0");
  if (!std::is_sorted(sweep_sizes.begin(), sweep_sizes.end()))
    throw ConfigError("data.sweep_sizes must be sorted ascending");
  for (int s : sweep_sizes)
    if (s < 0) throw ConfigError("data.sweep_sizes must be nonnegative");
  if (!(cloud_t_min <= cloud_t_max))
    throw ConfigError("data.cloud_t window is inverted");
}

pinn::Normalization ExperimentConfig::normalization() const {
  return {composite2.thickness, composite2.cycle.total_duration(), temp_scale};
}

namespace {

void emit_setup(std::ostringstream& os, const char* section,
                const heat::ThermalSetup& s) {
  os << "[" << section << "]\n";
  os << "density = " << csv::fmt(s.material.density) << "\n";
  os << "specific_heat = " << csv::fmt(s.material.specific_heat) << "\n";
  os << "conductivity = " << csv::fmt(s.material.conductivity) << "\n";
  os << "thickness = " << csv::fmt(s.thickness) << "\n";
  os << "htc_bottom = " << csv::fmt(s.htc_bottom) << "\n";
  os << "htc_top = " << csv::fmt(s.htc_top) << "\n";
  os << "initial_temperature = " << csv::fmt(s.initial_temperature) << "\n\n";
}

template <typename T>
void emit_array(std::ostringstream& os, const char* key,
                const std::vector<T>& v) {
  os << key << " = [";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    os << csv::fmt(static_cast<double>(v[i]));
  }
  os << "]\n";
}

}  // namespace

std::string ExperimentConfig::to_toml() const {
  std::ostringstream os;
  os << "[cycle]\n";
  {
    std::vector<double> kt, kv;
    for (const auto& [t, v] : composite2.cycle.knots) {
      kt.push_back(t);
      kv.push_back(v);
    }
    emit_array(os, "knots_t", kt);
    emit_array(os, "knots_temp", kv);
  }
  os << "\n";
  emit_setup(os, "composite1", composite1);
  emit_setup(os, "composite2", composite2);
  os << "[oracle]\n";
  os << "n_elements = " << oracle_n_elements << "\n";
  os << "dt = " << csv::fmt(oracle_dt) << "\n";
  os << "max_step_change = " << csv::fmt(oracle_max_step_change) << "\n";
  os << "n_snapshots = " << oracle_snapshots << "\n\n";
  os << "[network]\n";
  os << "hidden_layers = " << hidden_layers << "\n";
  os << "hidden_width = " << hidden_width << "\n\n";
  os << "[train]\n";
  os << "epochs = " << train.epochs << "\n";
  os << "batch_size = " << train.batch_size << "\n";
  os << "learning_rate = " << csv::fmt(train.learning_rate) << "\n";
  os << "lr_decay_factor = " << csv::fmt(train.lr_decay_factor) << "\n";
  os << "lr_patience_epochs = " << train.lr_patience_epochs << "\n";
  os << "ema_alpha = " << csv::fmt(train.ema_alpha) << "\n";
  os << "weight_update_stride = " << train.weight_update_stride << "\n";
  os << "adapt_data_weight = " << (train.adapt_data_weight ? "true" : "false")
     << "\n";
  os << "data_weight_per_label = " << csv::fmt(train.data_weight_per_label)
     << "\n\n";
  os << "[points]\n";
  os << "collocation = " << n_collocation << "\n";
  os << "boundary = " << n_boundary << "\n";
  os << "initial = " << n_initial << "\n\n";
  os << "[data]\n";
  os << "low_labeled = " << low_labeled << "\n";
  os << "pinn_labeled = " << pinn_labeled << "\n";
  emit_array(os, "sweep_sizes", sweep_sizes);
  os << "cloud_points = " << cloud_points << "\n";
  os << "cloud_t_min = " << csv::fmt(cloud_t_min) << "\n";
  os << "cloud_t_max = " << csv::fmt(cloud_t_max) << "\n\n";
  os << "[normalization]\n";
  os << "temp_scale = " << csv::fmt(temp_scale) << "\n\n";
  os << "[experiment]\n";
  {
    std::vector<double> sd(seeds.begin(), seeds.end());
    emit_array(os, "seeds", sd);
  }
  os << "jobs = " << jobs << "\n";
  return os.str();
}

std::uint64_t ExperimentConfig::hash() const {
  // FNV-1a 64 over the canonical serialization.
  const std::string text = to_toml();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.composite1 = heat::composite1_setup();
  c.composite2 = heat::composite2_setup();
  return c;
}

namespace {

int as_int(const Value& v, const std::string& key) {
  if (const double* d = std::get_if<double>(&v)) {
    if (*d != std::floor(*d))
      throw ConfigError("config key '" + key + "' must be an integer");
    return static_cast<int>(*d);
  }
  throw ConfigError("config key '" + key + "' must be a number");
}

double as_double(const Value& v, const std::string& key) {
  if (const double* d = std::get_if<double>(&v)) return *d;
  throw ConfigError("config key '" + key + "' must be a number");
}

bool as_bool(const Value& v, const std::string& key) {
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  throw ConfigError("config key '" + key + "' must be true/false");
}

std::vector<double> as_array(const Value& v, const std::string& key) {
  if (const auto* a = std::get_if<std::vector<double>>(&v)) return *a;
  throw ConfigError("config key '" + key + "' must be an array");
}

}  // namespace

ExperimentConfig config_from_text(const std::string& text) {
  auto kv = parse_toml(text);
  ExperimentConfig c = default_config();
  std::vector<double> knots_t, knots_temp;
  bool have_knots = false;

  auto take = [&](const std::string& key) -> const Value* {
    auto it = kv.find(key);
    if (it == kv.end()) return nullptr;
    return &it->second;
  };

  auto setup_keys = [&](const std::string& sec, heat::ThermalSetup& s) {
    if (const Value* v = take(sec + ".density"))
      s.material.density = as_double(*v, sec + ".density");
    if (const Value* v = take(sec + ".specific_heat"))
      s.material.specific_heat = as_double(*v, sec + ".specific_heat");
    if (const Value* v = take(sec + ".conductivity"))
      s.material.conductivity = as_double(*v, sec + ".conductivity");
    if (const Value* v = take(sec + ".thickness"))
      s.thickness = as_double(*v, sec + ".thickness");
    if (const Value* v = take(sec + ".htc_bottom"))
      s.htc_bottom = as_double(*v, sec + ".htc_bottom");
    if (const Value* v = take(sec + ".htc_top"))
      s.htc_top = as_double(*v, sec + ".htc_top");
    if (const Value* v = take(sec + ".initial_temperature"))
      s.initial_temperature = as_double(*v, sec + ".initial_temperature");
  };
  setup_keys("composite1", c.composite1);
  setup_keys("composite2", c.composite2);

  if (const Value* v = take("cycle.knots_t")) {
    knots_t = as_array(*v, "cycle.knots_t");
    have_knots = true;
  }
  if (const Value* v = take("cycle.knots_temp")) {
    knots_temp = as_array(*v, "cycle.knots_temp");
    have_knots = true;
  }
  if (have_knots) {
    if (knots_t.size() != knots_temp.size() || knots_t.size() < 2)
      throw ConfigError("cycle.knots_t and cycle.knots_temp must match (>= 2)");
    heat::CureCycle cyc;
    for (std::size_t i = 0; i < knots_t.size(); ++i)
      cyc.knots.emplace_back(knots_t[i], knots_temp[i]);
    c.composite1.cycle = cyc;
    c.composite2.cycle = cyc;
  }

  if (const Value* v = take("oracle.n_elements"))
    c.oracle_n_elements = as_int(*v, "oracle.n_elements");
  if (const Value* v = take("oracle.dt")) c.oracle_dt = as_double(*v, "oracle.dt");
  if (const Value* v = take("oracle.max_step_change"))
    c.oracle_max_step_change = as_double(*v, "oracle.max_step_change");
  if (const Value* v = take("oracle.n_snapshots"))
    c.oracle_snapshots = as_int(*v, "oracle.n_snapshots");

  if (const Value* v = take("network.hidden_layers"))
    c.hidden_layers = as_int(*v, "network.hidden_layers");
  if (const Value* v = take("network.hidden_width"))
    c.hidden_width = as_int(*v, "network.hidden_width");

  if (const Value* v = take("train.epochs")) c.train.epochs = as_int(*v, "train.epochs");
  if (const Value* v = take("train.batch_size"))
    c.train.batch_size = as_int(*v, "train.batch_size");
  if (const Value* v = take("train.learning_rate"))
    c.train.learning_rate = as_double(*v, "train.learning_rate");
  if (const Value* v = take("train.lr_decay_factor"))
    c.train.lr_decay_factor = as_double(*v, "train.lr_decay_factor");
  if (const Value* v = take("train.lr_patience_epochs"))
    c.train.lr_patience_epochs = as_int(*v, "train.lr_patience_epochs");
  if (const Value* v = take("train.ema_alpha"))
    c.train.ema_alpha = as_double(*v, "train.ema_alpha");
  if (const Value* v = take("train.weight_update_stride"))
    c.train.weight_update_stride = as_int(*v, "train.weight_update_stride");
  if (const Value* v = take("train.adapt_data_weight"))
    c.train.adapt_data_weight = as_bool(*v, "train.adapt_data_weight");
  if (const Value* v = take("train.data_weight_per_label"))
    c.train.data_weight_per_label =
        as_double(*v, "train.data_weight_per_label");

  if (const Value* v = take("points.collocation"))
    c.n_collocation = as_int(*v, "points.collocation");
  if (const Value* v = take("points.boundary"))
    c.n_boundary = as_int(*v, "points.boundary");
  if (const Value* v = take("points.initial"))
    c.n_initial = as_int(*v, "points.initial");

  if (const Value* v = take("data.low_labeled"))
    c.low_labeled = as_int(*v, "data.low_labeled");
  if (const Value* v = take("data.pinn_labeled"))
    c.pinn_labeled = as_int(*v, "data.pinn_labeled");
  if (const Value* v = take("data.sweep_sizes")) {
    c.sweep_sizes.clear();
    for (double d : as_array(*v, "data.sweep_sizes"))
      c.sweep_sizes.push_back(static_cast<int>(d));
  }
  if (const Value* v = take("data.cloud_points"))
    c.cloud_points = as_int(*v, "data.cloud_points");
  if (const Value* v = take("data.cloud_t_min"))
    c.cloud_t_min = as_double(*v, "data.cloud_t_min");
  if (const Value* v = take("data.cloud_t_max"))
    c.cloud_t_max = as_double(*v, "data.cloud_t_max");

  if (const Value* v = take("normalization.temp_scale"))
    c.temp_scale = as_double(*v, "normalization.temp_scale");

  if (const Value* v = take("experiment.seeds")) {
    c.seeds.clear();
    for (double d : as_array(*v, "experiment.seeds")) {
      if (d < 0 || d != std::floor(d))
        throw ConfigError("experiment.seeds must be nonnegative integers");
      c.seeds.push_back(static_cast<std::uint64_t>(d));
    }
  }
  if (const Value* v = take("experiment.jobs")) c.jobs = as_int(*v, "experiment.jobs");

  // Reject unrecognized keys: every handled key was removed via take()?
  // take() does not erase; walk the known set instead.
  static const char* known[] = {
      "cycle.knots_t", "cycle.knots_temp",
      "oracle.n_elements", "oracle.dt", "oracle.max_step_change",
      "oracle.n_snapshots", "network.hidden_layers", "network.hidden_width",
      "train.epochs", "train.batch_size", "train.learning_rate",
      "train.lr_decay_factor", "train.lr_patience_epochs", "train.ema_alpha",
      "train.weight_update_stride", "train.adapt_data_weight",
      "train.data_weight_per_label",
      "points.collocation", "points.boundary", "points.initial",
      "data.low_labeled", "data.pinn_labeled", "data.sweep_sizes",
      "data.cloud_points", "data.cloud_t_min", "data.cloud_t_max",
      "normalization.temp_scale", "experiment.seeds", "experiment.jobs"};
  static const char* setup_suffixes[] = {
      "density", "specific_heat", "conductivity", "thickness",
      "htc_bottom", "htc_top", "initial_temperature"};
  for (const auto& [key, _] : kv) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) { ok = true; break; }
    for (const char* suf : setup_suffixes) {
      if (key == std::string("composite1.") + suf ||
          key == std::string("composite2.") + suf) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError("unknown config key '" + key + "'");
  }

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open config: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return config_from_text(ss.str());
}

}  // namespace mfpinn::config
