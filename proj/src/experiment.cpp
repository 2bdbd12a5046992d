#include "mfpinn/experiment.hpp"

#include <atomic>
#include <filesystem>
#include <future>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "mfpinn/csv.hpp"
#include "mfpinn/errors.hpp"
#include "mfpinn/rng.hpp"

namespace mfpinn::experiment {

namespace fs = std::filesystem;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Pinn: return "pinn";
    case Variant::PinnData: return "pinn+data";
    case Variant::MfPinn: return "mfpinn";
    case Variant::MfPinnData: return "mfpinn+data";
  }
  throw ConfigError("bad variant");
}

Variant parse_variant(const std::string& name) {
  if (name == "pinn") return Variant::Pinn;
  if (name == "pinn+data" || name == "pinn_data") return Variant::PinnData;
  if (name == "mfpinn") return Variant::MfPinn;
  if (name == "mfpinn+data" || name == "mfpinn_data")
    return Variant::MfPinnData;
  throw ConfigError("unknown variant '" + name +
                    "' (expected pinn, pinn+data, mfpinn, mfpinn+data)");
}

namespace {

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << "0x" << std::hex << h;
  return os.str();
}

void write_history_csv(const std::string& path,
                       const std::vector<pinn::LossReport>& history,
                       const std::vector<std::string>& comments) {
  csv::Table t;
  t.comments = comments;
  t.header =
      "epoch,loss_pde,loss_bc,loss_ic,loss_data,lambda_bc,lambda_ic,"
      "lambda_data,total,lr";
  t.rows.reserve(history.size());
  for (const auto& r : history) {
    t.rows.push_back({std::to_string(r.epoch), csv::fmt(r.pde), csv::fmt(r.bc),
                      csv::fmt(r.ic), csv::fmt(r.data), csv::fmt(r.weights.bc),
                      csv::fmt(r.weights.ic), csv::fmt(r.weights.data),
                      csv::fmt(r.total), csv::fmt(r.lr)});
  }
  csv::write(path, t);
}

}  // namespace

struct Orchestrator::Impl {
  std::mutex fields_mutex;
  std::unique_ptr<heat::FieldSolution> field1, field2;
  std::unique_ptr<heat::LabeledSet> grid;

  std::mutex low_mutex;
  std::map<std::uint64_t, std::shared_future<std::shared_ptr<const pinn::TrainResult>>>
      low_cache;
};

Orchestrator::Orchestrator(config::ExperimentConfig cfg)
    : cfg_(std::move(cfg)), impl_(std::make_unique<Impl>()) {
  cfg_.validate();
}

Orchestrator::~Orchestrator() = default;

const heat::FieldSolution& Orchestrator::low_field() {
  std::lock_guard lock(impl_->fields_mutex);
  if (!impl_->field1) {
    impl_->field1 = std::make_unique<heat::FieldSolution>(
        heat::solve(cfg_.composite1, cfg_.oracle_n_elements, cfg_.oracle_dt,
                    cfg_.oracle_max_step_change, cfg_.oracle_snapshots));
  }
  return *impl_->field1;
}

const heat::FieldSolution& Orchestrator::high_field() {
  std::lock_guard lock(impl_->fields_mutex);
  if (!impl_->field2) {
    impl_->field2 = std::make_unique<heat::FieldSolution>(
        heat::solve(cfg_.composite2, cfg_.oracle_n_elements, cfg_.oracle_dt,
                    cfg_.oracle_max_step_change, cfg_.oracle_snapshots));
  }
  return *impl_->field2;
}

const heat::LabeledSet& Orchestrator::truth_grid() {
  const auto& f = high_field();
  std::lock_guard lock(impl_->fields_mutex);
  if (!impl_->grid)
    impl_->grid = std::make_unique<heat::LabeledSet>(heat::test_grid(f));
  return *impl_->grid;
}

std::string Orchestrator::run_dir_name(Variant v, int labeled_n,
                                       std::uint64_t seed) const {
  std::string name;
  switch (v) {
    case Variant::Pinn: name = "pinn"; break;
    case Variant::PinnData: name = "pinn_data_n" + std::to_string(labeled_n); break;
    case Variant::MfPinn: name = "mfpinn"; break;
    case Variant::MfPinnData:
      name = "mfpinn_data_n" + std::to_string(labeled_n);
      break;
  }
  return name + "/seed" + std::to_string(seed);
}

std::vector<std::string> Orchestrator::csv_comments(std::uint64_t seed) const {
  return {"# config_hash=" + hash_hex(cfg_.hash()),
          "# seed=" + std::to_string(seed)};
}

namespace {

std::vector<int> architecture(int input_width, int hidden_layers,
                              int hidden_width) {
  std::vector<int> sizes;
  sizes.push_back(input_width);
  for (int i = 0; i < hidden_layers; ++i) sizes.push_back(hidden_width);
  sizes.push_back(1);
  return sizes;
}

std::vector<std::array<double, 3>> normalize_labeled(
    const heat::LabeledSet& set, const pinn::Normalization& norm) {
  std::vector<std::array<double, 3>> out;
  out.reserve(set.points.size());
  for (const auto& p : set.points)
    out.push_back({norm.to_xi(p.x), norm.to_tau(p.t), norm.to_u(p.temperature)});
  return out;
}

}  // namespace

RunResult Orchestrator::run_one(Variant variant, int labeled_n,
                                std::uint64_t seed,
                                const std::string& run_dir) {
  fs::create_directories(run_dir);
  const pinn::Normalization norm = cfg_.normalization();
  const auto comments = csv_comments(seed);

  mf::SavedModel saved;

  const bool is_mf =
      (variant == Variant::MfPinn || variant == Variant::MfPinnData);

  if (!is_mf) {
    pinn::PointSets sets =
        pinn::sample_points(cfg_.n_collocation, cfg_.n_boundary, cfg_.n_initial,
                            derive_seed(seed, kPointsHigh));
    if (variant == Variant::PinnData && labeled_n > 0) {
      const heat::LabeledSet labels = heat::sample_labeled(
          high_field(), labeled_n, derive_seed(seed, kDataHigh));
      sets.labeled = normalize_labeled(labels, norm);
      heat::write_labeled_csv(run_dir + "/labeled.csv", labels, comments);
    }
    net::NetworkParams init = net::init_params(
        architecture(2, cfg_.hidden_layers, cfg_.hidden_width),
        derive_seed(seed, kInitHigh));
    pinn::TrainConfig tc = cfg_.train;
    tc.seed = derive_seed(seed, kShuffleHigh);
    pinn::LossWeights weights;
    if (!sets.labeled.empty())
      weights.data = tc.data_weight_per_label *
                     static_cast<double>(sets.labeled.size());
    pinn::TrainResult res =
        pinn::train(init, sets, weights, tc, cfg_.composite2, norm);
    mf::save_pinn_bundle(run_dir + "/bundle", res.params, cfg_.composite2, norm);
    saved = mf::load_bundle(run_dir + "/bundle");
    write_history_csv(run_dir + "/loss_history.csv", res.history, comments);
  } else {
    // Stage one: low-fidelity network, shared across variants per seed.
    std::shared_ptr<const pinn::TrainResult> low;
    {
      std::unique_lock lock(impl_->low_mutex);
      auto it = impl_->low_cache.find(seed);
      if (it == impl_->low_cache.end()) {
        std::promise<std::shared_ptr<const pinn::TrainResult>> prom;
        impl_->low_cache.emplace(seed, prom.get_future().share());
        lock.unlock();
        try {
          pinn::PointSets low_sets = pinn::sample_points(
              cfg_.n_collocation, cfg_.n_boundary, cfg_.n_initial,
              derive_seed(seed, kPointsLow));
          const heat::LabeledSet low_labels = heat::sample_labeled(
              low_field(), cfg_.low_labeled, derive_seed(seed, kDataLow));
          net::NetworkParams low_init = net::init_params(
              architecture(2, cfg_.hidden_layers, cfg_.hidden_width),
              derive_seed(seed, kInitLow));
          pinn::TrainConfig tc_low = cfg_.train;
          tc_low.seed = derive_seed(seed, kShuffleLow);
          auto res = std::make_shared<pinn::TrainResult>(
              mf::train_low(low_init, cfg_.composite1, norm, low_labels,
                            low_sets, tc_low));
          prom.set_value(res);
        } catch (...) {
          prom.set_exception(std::current_exception());
          std::lock_guard relock(impl_->low_mutex);
          impl_->low_cache.erase(seed);
          throw;
        }
      }
      // (re)read the future outside the lock
    }
    {
      std::shared_future<std::shared_ptr<const pinn::TrainResult>> fut;
      {
        std::lock_guard lock(impl_->low_mutex);
        fut = impl_->low_cache.at(seed);
      }
      low = fut.get();
    }

    mf::MfModel model;
    model.low = low->params;
    model.high = mf::init_correction_params(
        architecture(3, cfg_.hidden_layers, cfg_.hidden_width),
        derive_seed(seed, kInitHigh));
    model.norm = norm;
    model.setup_low = cfg_.composite1;
    model.setup_high = cfg_.composite2;

    pinn::PointSets sets =
        pinn::sample_points(cfg_.n_collocation, cfg_.n_boundary, cfg_.n_initial,
                            derive_seed(seed, kPointsHigh));
    heat::LabeledSet data_high;
    if (variant == Variant::MfPinnData && labeled_n > 0) {
      const heat::Region cooldown{cfg_.cloud_t_min, cfg_.cloud_t_max, 0.0,
                                  cfg_.composite2.thickness};
      data_high = mf::augment_cooldown(high_field(), labeled_n, cooldown,
                                       derive_seed(seed, kCloud));
      heat::write_labeled_csv(run_dir + "/labeled.csv", data_high, comments);
    }
    pinn::TrainConfig tc = cfg_.train;
    tc.seed = derive_seed(seed, kShuffleHigh);
    pinn::TrainResult res = mf::train_high(model, data_high, sets, tc);
    mf::save_bundle(run_dir + "/bundle", model);
    saved = mf::load_bundle(run_dir + "/bundle");
    write_history_csv(run_dir + "/loss_history_low.csv", low->history, comments);
    write_history_csv(run_dir + "/loss_history.csv", res.history, comments);
  }

  // Evaluation on the 41 x 138 grid.
  const heat::LabeledSet& grid = truth_grid();
  const heat::FieldSolution& field = high_field();
  std::vector<double> pred, truth;
  pred.reserve(grid.points.size());
  truth.reserve(grid.points.size());
  for (const auto& p : grid.points) {
    pred.push_back(saved.predict_at(p.x, p.t));
    truth.push_back(p.temperature);
  }
  // The grid and the field enumerate the same points in the same order
  // when the field has exactly 138 snapshots; error_field wants the field.
  metrics::ErrorField ef;
  if (field.n_snapshots() == 138) {
    ef = metrics::error_field(pred, field);
  } else {
    ef = metrics::error_field(
        [&](double x, double t) { return saved.predict_at(x, t); }, field);
  }

  RunResult r;
  r.variant = variant;
  r.labeled_n = labeled_n;
  r.seed = seed;
  r.rel_l2 = metrics::relative_l2(pred, truth);
  r.max_abs_err = ef.max_err;
  r.argmax_t = ef.argmax_t;
  r.argmax_x = ef.argmax_x;
  r.cooldown_max_err =
      metrics::max_err_in_window(ef, cfg_.cloud_t_min, cfg_.cloud_t_max);
  r.run_dir = run_dir;

  metrics::write_error_field_csv(run_dir + "/error_field.csv", ef, comments);
  {
    csv::Table t;
    t.comments = comments;
    t.header =
        "variant,labeled_n,seed,rel_l2,max_abs_err_C,argmax_t_s,argmax_x_m,"
        "cooldown_max_err_C";
    t.rows.push_back({variant_name(variant), std::to_string(labeled_n),
                      std::to_string(seed), csv::fmt(r.rel_l2),
                      csv::fmt(r.max_abs_err), csv::fmt(r.argmax_t),
                      csv::fmt(r.argmax_x), csv::fmt(r.cooldown_max_err)});
    csv::write(run_dir + "/metrics.csv", t);
  }
  return r;
}

std::vector<RunResult> Orchestrator::run_many(const std::vector<Job>& jobs,
                                              const std::string& out_dir) {
  std::vector<RunResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;

  unsigned n_workers = cfg_.jobs > 0
                           ? static_cast<unsigned>(cfg_.jobs)
                           : std::max(1u, std::thread::hardware_concurrency());
  n_workers = std::min<unsigned>(n_workers,
                                 std::max<std::size_t>(jobs.size(), 1));

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        const Job& j = jobs[i];
        const std::string dir =
            out_dir + "/runs/" + run_dir_name(j.variant, j.labeled_n, j.seed);
        results[i] = run_one(j.variant, j.labeled_n, j.seed, dir);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (n_workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

void Orchestrator::generate(const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::uint64_t seed0 = cfg_.seeds.front();
  const auto comments = csv_comments(seed0);
  heat::write_field_csv(out_dir + "/field_composite1.csv", low_field(), comments);
  heat::write_field_csv(out_dir + "/field_composite2.csv", high_field(), comments);
  heat::write_labeled_csv(out_dir + "/test_grid.csv", truth_grid(), comments);
  heat::write_labeled_csv(
      out_dir + "/labeled_low_n" + std::to_string(cfg_.low_labeled) + ".csv",
      heat::sample_labeled(low_field(), cfg_.low_labeled,
                           derive_seed(seed0, kDataLow)),
      comments);
  heat::write_labeled_csv(
      out_dir + "/labeled_high_n" + std::to_string(cfg_.pinn_labeled) + ".csv",
      heat::sample_labeled(high_field(), cfg_.pinn_labeled,
                           derive_seed(seed0, kDataHigh)),
      comments);
  const heat::Region cooldown{cfg_.cloud_t_min, cfg_.cloud_t_max, 0.0,
                              cfg_.composite2.thickness};
  heat::write_labeled_csv(
      out_dir + "/cloud_n" + std::to_string(cfg_.cloud_points) + ".csv",
      heat::sample_labeled(high_field(), cfg_.cloud_points,
                           derive_seed(seed0, kCloud), cooldown),
      comments);
}

namespace {

std::vector<std::string> table_comments(const config::ExperimentConfig& cfg) {
  std::string seeds = "# seeds=[";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    if (i) seeds += ",";
    seeds += std::to_string(cfg.seeds[i]);
  }
  seeds += "]";
  std::ostringstream h;
  h << "# config_hash=0x" << std::hex << cfg.hash();
  return {h.str(), seeds};
}

void write_runs_csv(const std::string& path,
                    const std::vector<RunResult>& results,
                    const std::vector<std::string>& comments) {
  csv::Table t;
  t.comments = comments;
  t.header = "variant,labeled_n,seed,rel_l2";
  for (const auto& r : results) {
    t.rows.push_back({variant_name(r.variant), std::to_string(r.labeled_n),
                      std::to_string(r.seed), csv::fmt(r.rel_l2)});
  }
  csv::write(path, t);
}

}  // namespace

void Orchestrator::reproduce_table2(const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<Job> jobs;
  for (int n : cfg_.sweep_sizes)
    for (std::uint64_t s : cfg_.seeds)
      jobs.push_back({Variant::PinnData, n, s});
  const auto results = run_many(jobs, out_dir);
  write_runs_csv(out_dir + "/table2_runs.csv", results, table_comments(cfg_));

  csv::Table t;
  t.comments = table_comments(cfg_);
  t.header = "labeled_n,rel_l2_median";
  std::size_t idx = 0;
  for (int n : cfg_.sweep_sizes) {
    std::vector<double> vals;
    for (std::size_t k = 0; k < cfg_.seeds.size(); ++k)
      vals.push_back(results[idx++].rel_l2);
    t.rows.push_back({std::to_string(n), csv::fmt(metrics::median(vals))});
  }
  csv::write(out_dir + "/table2.csv", t);
}

void Orchestrator::reproduce_table3(const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::vector<std::pair<Variant, int>> rows = {
      {Variant::Pinn, 0},
      {Variant::PinnData, cfg_.pinn_labeled},
      {Variant::MfPinn, 0},
      {Variant::MfPinnData, cfg_.cloud_points}};
  std::vector<Job> jobs;
  for (const auto& [v, n] : rows)
    for (std::uint64_t s : cfg_.seeds) jobs.push_back({v, n, s});
  const auto results = run_many(jobs, out_dir);
  write_runs_csv(out_dir + "/table3_runs.csv", results, table_comments(cfg_));

  csv::Table t;
  t.comments = table_comments(cfg_);
  t.header = "variant,labeled_n,rel_l2_median";
  std::size_t idx = 0;
  for (const auto& [v, n] : rows) {
    std::vector<double> vals;
    for (std::size_t k = 0; k < cfg_.seeds.size(); ++k)
      vals.push_back(results[idx++].rel_l2);
    t.rows.push_back({variant_name(v), std::to_string(n),
                      csv::fmt(metrics::median(vals))});
  }
  csv::write(out_dir + "/table3.csv", t);
}

RunResult Orchestrator::evaluate_bundle(const std::string& bundle_dir,
                                        const std::string& out_dir) {
  fs::create_directories(out_dir);
  const mf::SavedModel saved = mf::load_bundle(bundle_dir);
  const heat::LabeledSet& grid = truth_grid();
  std::vector<double> pred, truth;
  pred.reserve(grid.points.size());
  truth.reserve(grid.points.size());
  for (const auto& p : grid.points) {
    pred.push_back(saved.predict_at(p.x, p.t));
    truth.push_back(p.temperature);
  }
  const heat::FieldSolution& field = high_field();
  metrics::ErrorField ef =
      field.n_snapshots() == 138
          ? metrics::error_field(pred, field)
          : metrics::error_field(
                [&](double x, double t) { return saved.predict_at(x, t); },
                field);
  RunResult r;
  r.variant = saved.kind == "mfpinn" ? Variant::MfPinn : Variant::Pinn;
  r.labeled_n = 0;
  r.seed = 0;
  r.rel_l2 = metrics::relative_l2(pred, truth);
  r.max_abs_err = ef.max_err;
  r.argmax_t = ef.argmax_t;
  r.argmax_x = ef.argmax_x;
  r.cooldown_max_err =
      metrics::max_err_in_window(ef, cfg_.cloud_t_min, cfg_.cloud_t_max);
  r.run_dir = out_dir;

  const auto comments = table_comments(cfg_);
  metrics::write_error_field_csv(out_dir + "/error_field.csv", ef, comments);
  csv::Table t;
  t.comments = comments;
  t.header = "kind,rel_l2,max_abs_err_C,argmax_t_s,argmax_x_m,cooldown_max_err_C";
  t.rows.push_back({saved.kind, csv::fmt(r.rel_l2), csv::fmt(r.max_abs_err),
                    csv::fmt(r.argmax_t), csv::fmt(r.argmax_x),
                    csv::fmt(r.cooldown_max_err)});
  csv::write(out_dir + "/evaluate_metrics.csv", t);
  return r;
}

void Orchestrator::midpoint(const std::string& bundle_dir,
                            const std::string& out_dir) {
  fs::create_directories(out_dir);
  const mf::SavedModel saved = mf::load_bundle(bundle_dir);
  const heat::FieldSolution& field = high_field();
  const int mid = field.n_nodes() / 2;
  csv::Table t;
  t.comments = table_comments(cfg_);
  t.header = "t_s,temp_model_C,temp_oracle_C";
  t.rows.reserve(static_cast<std::size_t>(field.n_snapshots()));
  const double x_mid = field.x_nodes[mid];
  for (int s = 0; s < field.n_snapshots(); ++s) {
    const double time = field.t_snapshots[s];
    t.rows.push_back({csv::fmt(time), csv::fmt(saved.predict_at(x_mid, time)),
                      csv::fmt(field.at(s, mid))});
  }
  csv::write(out_dir + "/midpoint.csv", t);
}

}  // namespace mfpinn::experiment
