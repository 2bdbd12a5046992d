#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "mfpinn/heat.hpp"
#include "mfpinn/pinn.hpp"

namespace mfpinn::config {

// Minimal TOML-style reader: '#' comments, [section] headers, key = value
// with numbers, booleans, quoted strings, and flat arrays of numbers. Keys
// come back flattened as "section.key".
using Value = std::variant<double, bool, std::string, std::vector<double>>;
std::map<std::string, Value> parse_toml(const std::string& text);

struct ExperimentConfig {
  heat::ThermalSetup composite1;  // low fidelity
  heat::ThermalSetup composite2;  // high fidelity

  int oracle_n_elements = 40;
  double oracle_dt = 0.0015;           // s
  double oracle_max_step_change = 1.0; // C
  int oracle_snapshots = 138;

  int hidden_layers = 5;
  int hidden_width = 30;

  pinn::TrainConfig train;  // per-run seed filled by the runner

  int n_collocation = 1600;
  int n_boundary = 80;
  int n_initial = 20;

  int low_labeled = 200;   // labeled points for the low-fidelity stage
  int pinn_labeled = 50;   // labeled points for the pinn+data variant
  std::vector<int> sweep_sizes{10, 50, 100, 200, 400};
  int cloud_points = 30;
  double cloud_t_min = 2000.0;  // s
  double cloud_t_max = 2500.0;  // s

  double temp_scale = 200.0;  // C

  std::vector<std::uint64_t> seeds{101, 102, 103};
  int jobs = 0;  // worker pool size; 0 = hardware concurrency

  void validate() const;
  pinn::Normalization normalization() const;

  // Canonical text form; also what the config hash is computed over, so
  // the hash reflects effective settings, not file formatting.
  std::string to_toml() const;
  std::uint64_t hash() const;
};

ExperimentConfig default_config();
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_text(const std::string& text);

}  // namespace mfpinn::config
