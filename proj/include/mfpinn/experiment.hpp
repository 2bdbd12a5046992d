#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mfpinn/config.hpp"
#include "mfpinn/metrics.hpp"
#include "mfpinn/multifidelity.hpp"

namespace mfpinn::experiment {

enum class Variant { Pinn, PinnData, MfPinn, MfPinnData };

// Canonical display names: pinn, pinn+data, mfpinn, mfpinn+data.
std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct RunResult {
  Variant variant = Variant::Pinn;
  int labeled_n = 0;
  std::uint64_t seed = 0;
  double rel_l2 = 0.0;
  double max_abs_err = 0.0;   // C, over the whole test grid
  double argmax_t = 0.0;      // s, location of the worst error
  double argmax_x = 0.0;      // m
  double cooldown_max_err = 0.0;  // C, within [cloud_t_min, cloud_t_max]
  std::string run_dir;
};

struct Job {
  Variant variant;
  int labeled_n;
  std::uint64_t seed;
};

// Owns the oracle fields and the per-seed low-fidelity network cache for
// one configuration; runs experiment jobs and writes their artifacts.
class Orchestrator {
 public:
  explicit Orchestrator(config::ExperimentConfig cfg);
  ~Orchestrator();

  const config::ExperimentConfig& cfg() const { return cfg_; }
  const heat::FieldSolution& low_field();
  const heat::FieldSolution& high_field();
  const heat::LabeledSet& truth_grid();

  RunResult run_one(Variant variant, int labeled_n, std::uint64_t seed,
                    const std::string& run_dir);
  // Bounded worker pool (cfg.jobs, 0 = hardware); results in job order.
  std::vector<RunResult> run_many(const std::vector<Job>& jobs,
                                  const std::string& out_dir);

  void generate(const std::string& out_dir);
  void reproduce_table2(const std::string& out_dir);
  void reproduce_table3(const std::string& out_dir);
  RunResult evaluate_bundle(const std::string& bundle_dir,
                            const std::string& out_dir);
  void midpoint(const std::string& bundle_dir, const std::string& out_dir);

  // Sub-seed roles, fanned out of one run seed with derive_seed.
  enum Role : std::uint64_t {
    kInitHigh = 1,
    kPointsHigh = 2,
    kDataHigh = 3,
    kShuffleHigh = 4,
    kInitLow = 5,
    kDataLow = 6,
    kPointsLow = 7,
    kShuffleLow = 8,
    kCloud = 9,
  };

 private:
  struct Impl;
  std::string run_dir_name(Variant v, int labeled_n, std::uint64_t seed) const;
  std::vector<std::string> csv_comments(std::uint64_t seed) const;

  config::ExperimentConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mfpinn::experiment
