#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfpinn/errors.hpp"
#include "mfpinn/experiment.hpp"
#include "mfpinn/kernels.hpp"

namespace {

using mfpinn::config::ExperimentConfig;

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = -1;
  std::string kernels;
};

ExperimentConfig make_config(const GlobalOpts& g) {
  ExperimentConfig cfg = g.config_path.empty()
                             ? mfpinn::config::default_config()
                             : mfpinn::config::load_config(g.config_path);
  if (g.seed_set) cfg.seeds = {g.seed};
  if (g.jobs >= 0) cfg.jobs = g.jobs;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-fidelity physics-informed training and evaluation for "
               "1D cure-cycle heat conduction"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  GlobalOpts g;
  app.add_option("--config", g.config_path, "experiment config file (TOML)");
  app.add_option("--out", g.out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "override the config seed list with one seed")
      ->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--jobs", g.jobs, "worker pool size (0 = hardware)");
  app.add_option("--kernels", g.kernels, "force kernel backend (scalar|avx2)");

  auto* cmd_generate =
      app.add_subcommand("generate", "solve the oracle fields and emit datasets");

  std::string train_variant;
  int train_labeled = -1;
  auto* cmd_train = app.add_subcommand("train", "train one model variant");
  cmd_train->add_option("variant", train_variant,
                        "pinn | pinn+data | mfpinn | mfpinn+data")
      ->required();
  cmd_train->add_option("--labeled", train_labeled,
                        "labeled point count override for +data variants");

  std::string eval_bundle;
  auto* cmd_eval = app.add_subcommand("evaluate", "metrics for a saved bundle");
  cmd_eval->add_option("bundle", eval_bundle, "bundle directory")->required();

  auto* cmd_t2 = app.add_subcommand("reproduce-table2",
                                    "labeled-data sweep over the seed list");
  auto* cmd_t3 = app.add_subcommand("reproduce-table3",
                                    "all four variants over the seed list");

  std::string mid_bundle;
  auto* cmd_mid = app.add_subcommand("midpoint",
                                     "center-temperature curve for a bundle");
  cmd_mid->add_option("bundle", mid_bundle, "bundle directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (!g.kernels.empty()) mfpinn::kernels::force(g.kernels);
    ExperimentConfig cfg = make_config(g);
    mfpinn::experiment::Orchestrator orch(cfg);

    if (cmd_generate->parsed()) {
      orch.generate(g.out_dir);
    } else if (cmd_train->parsed()) {
      using mfpinn::experiment::Variant;
      const Variant v = mfpinn::experiment::parse_variant(train_variant);
      int labeled = 0;
      if (v == Variant::PinnData)
        labeled = train_labeled >= 0 ? train_labeled : cfg.pinn_labeled;
      if (v == Variant::MfPinnData)
        labeled = train_labeled >= 0 ? train_labeled : cfg.cloud_points;
      const std::uint64_t seed = cfg.seeds.front();
      const std::string dir = g.out_dir + "/runs/" +
                              [&] {
                                switch (v) {
                                  case Variant::Pinn: return std::string("pinn");
                                  case Variant::PinnData:
                                    return "pinn_data_n" + std::to_string(labeled);
                                  case Variant::MfPinn:
                                    return std::string("mfpinn");
                                  case Variant::MfPinnData:
                                    return "mfpinn_data_n" + std::to_string(labeled);
                                }
                                return std::string("run");
                              }() +
                              "/seed" + std::to_string(seed);
      const auto r = orch.run_one(v, labeled, seed, dir);
      nlohmann::json out;
      out["variant"] = mfpinn::experiment::variant_name(r.variant);
      out["labeled_n"] = r.labeled_n;
      out["seed"] = r.seed;
      out["rel_l2"] = r.rel_l2;
      out["max_abs_err_C"] = r.max_abs_err;
      out["run_dir"] = r.run_dir;
      std::cout << out.dump() << "\n";
    } else if (cmd_eval->parsed()) {
      const auto r = orch.evaluate_bundle(eval_bundle, g.out_dir);
      nlohmann::json out;
      out["rel_l2"] = r.rel_l2;
      out["max_abs_err_C"] = r.max_abs_err;
      out["cooldown_max_err_C"] = r.cooldown_max_err;
      std::cout << out.dump() << "\n";
    } else if (cmd_t2->parsed()) {
      orch.reproduce_table2(g.out_dir);
    } else if (cmd_t3->parsed()) {
      orch.reproduce_table3(g.out_dir);
    } else if (cmd_mid->parsed()) {
      orch.midpoint(mid_bundle, g.out_dir);
    }
    return 0;
  } catch (const mfpinn::Error& e) {
    nlohmann::json err;
    err["error"] = e.category();
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = "internal";
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 2;
  }
}
