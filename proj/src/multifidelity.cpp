#include "mfpinn/multifidelity.hpp"

#include <filesystem>
#include <limits>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "mfpinn/errors.hpp"

namespace mfpinn::mf {

namespace fs = std::filesystem;
using nlohmann::json;

void MfModel::validate() const {
  if (low.input_width() != 2)
    throw DimensionError("low-fidelity network must take (xi, tau)");
  if (high.input_width() != 3)
    throw DimensionError("high-fidelity network must take (xi, tau, y_low)");
  norm.validate();
  setup_low.validate();
  setup_high.validate();
}

namespace {

// Bootstrap-only weighting: the refresh at step 0 sets the balance, after
// which the objective stays stationary.
pinn::TrainConfig stationary(pinn::TrainConfig config) {
  config.weight_update_stride = std::numeric_limits<int>::max();
  return config;
}

}  // namespace

net::NetworkParams init_correction_params(const std::vector<int>& layer_sizes,
                                          std::uint64_t seed) {
  net::NetworkParams p = net::init_params(layer_sizes, seed);
  auto w = p.weight(p.layer_count() - 1);
  std::fill(w.begin(), w.end(), 0.0);
  return p;
}

pinn::TrainResult train_low(const net::NetworkParams& init,
                            const heat::ThermalSetup& setup_low,
                            const pinn::Normalization& norm,
                            const heat::LabeledSet& data_low,
                            const pinn::PointSets& sets,
                            const pinn::TrainConfig& config,
                            const pinn::EpochCallback& on_epoch) {
  pinn::PointSets with_data = sets;
  with_data.labeled.clear();
  with_data.labeled.reserve(data_low.points.size());
  for (const auto& p : data_low.points) {
    with_data.labeled.push_back(
        {norm.to_xi(p.x), norm.to_tau(p.t), norm.to_u(p.temperature)});
  }
  pinn::LossWeights weights;
  weights.data = config.data_weight_per_label *
                 static_cast<double>(data_low.points.size());
  return pinn::train(init, with_data, weights, stationary(config), setup_low,
                     norm, on_epoch);
}

// The high-fidelity map is f_H(xi,tau,y) = y + NN(xi,tau,y): the network
// carries the correction between the fidelities, and the prior passes
// through untouched where no correction is needed.
net::Jet compose_jet(const MfModel& model, double xi, double tau) {
  const net::Jet jl = net::forward_jet(model.low, xi, tau);
  const double input[3] = {xi, tau, jl.u};
  const double tan_x[3] = {1.0, 0.0, jl.du_dx};
  const double curv_x[3] = {0.0, 0.0, jl.d2u_dx2};
  const double tan_t[3] = {0.0, 1.0, jl.du_dt};
  net::Jet jh =
      net::forward_jet_seeded(model.high, input, tan_x, curv_x, tan_t);
  jh.u += jl.u;
  jh.du_dx += jl.du_dx;
  jh.d2u_dx2 += jl.d2u_dx2;
  jh.du_dt += jl.du_dt;
  return jh;
}

double compose_value(const MfModel& model, double xi, double tau) {
  const double y = net::forward(model.low, std::array<double, 2>{xi, tau});
  return y + net::forward(model.high, std::array<double, 3>{xi, tau, y});
}

pinn::TrainProblem build_high_problem(const MfModel& model,
                                      const pinn::PointSets& sets,
                                      const heat::LabeledSet& data_high) {
  model.validate();
  const auto& norm = model.norm;
  const auto& setup = model.setup_high;

  pinn::TrainProblem p;
  p.kappa = pinn::diffusion_group(setup, norm);
  p.h_bottom = setup.htc_bottom;
  p.h_top = setup.htc_top;
  p.k_over_L = setup.material.conductivity / norm.x_scale;
  p.u0 = norm.to_u(setup.initial_temperature);

  // Each evaluation point feeds the correction network NN(xi,tau,y_L);
  // the frozen prior's jet rides along as a constant offset so the
  // residuals see the full composed map y_L + NN.
  auto composed_point = [&](double xi, double tau, int channels,
                            net::Jet* jet_out) {
    net::EvalPoint ep;
    ep.channels = channels;
    const net::Jet jl = net::forward_jet(model.low, xi, tau);
    if (jet_out) *jet_out = jl;
    ep.input = {xi, tau, jl.u};
    if (channels > 1) ep.tan_x = {1.0, 0.0, jl.du_dx};
    if (channels > 2) ep.curv_x = {0.0, 0.0, jl.d2u_dx2};
    if (channels > 3) ep.tan_t = {0.0, 1.0, jl.du_dt};
    return ep;
  };

  p.collocation.reserve(sets.collocation.size());
  p.collocation_offset.resize(sets.collocation.size());
  for (std::size_t i = 0; i < sets.collocation.size(); ++i) {
    const auto& c = sets.collocation[i];
    p.collocation.push_back(
        composed_point(c[0], c[1], 4, &p.collocation_offset[i]));
  }

  p.boundary.reserve(sets.boundary.size());
  p.boundary_offset.resize(sets.boundary.size());
  for (std::size_t i = 0; i < sets.boundary.size(); ++i) {
    const auto& b = sets.boundary[i];
    const double xi = (b.side == pinn::Side::Bottom) ? 0.0 : 1.0;
    p.boundary.push_back(composed_point(xi, b.tau, 2, &p.boundary_offset[i]));
    p.boundary_sides.push_back(b.side);
    p.boundary_air_u.push_back(
        norm.to_u(setup.cycle.air_temperature(b.tau * norm.t_scale)));
  }

  p.initial.reserve(sets.initial.size());
  p.initial_offset_u.reserve(sets.initial.size());
  for (double xi : sets.initial) {
    net::Jet jl;
    p.initial.push_back(composed_point(xi, 0.0, 1, &jl));
    p.initial_offset_u.push_back(jl.u);
  }

  p.labeled.reserve(data_high.points.size());
  p.labeled_offset_u.reserve(data_high.points.size());
  for (const auto& d : data_high.points) {
    net::Jet jl;
    p.labeled.push_back(
        composed_point(norm.to_xi(d.x), norm.to_tau(d.t), 1, &jl));
    p.labeled_offset_u.push_back(jl.u);
    p.labeled_u.push_back(norm.to_u(d.temperature));
  }
  return p;
}

pinn::TrainResult train_high(MfModel& model, const heat::LabeledSet& data_high,
                             const pinn::PointSets& sets,
                             const pinn::TrainConfig& config,
                             const pinn::EpochCallback& on_epoch) {
  const pinn::TrainProblem problem = build_high_problem(model, sets, data_high);
  pinn::LossWeights weights;
  weights.data = config.data_weight_per_label *
                 static_cast<double>(data_high.points.size());
  if (data_high.points.empty()) weights.data = 1.0;
  pinn::TrainResult res = pinn::train_core(model.high, problem, weights,
                                           stationary(config), on_epoch);
  model.high = res.params;
  return res;
}

heat::LabeledSet augment_cooldown(const heat::FieldSolution& field_high, int n,
                                  const heat::Region& region,
                                  std::uint64_t seed) {
  return heat::sample_labeled(field_high, n, seed, region);
}

heat::LabeledSet merge_labeled(const heat::LabeledSet& a,
                               const heat::LabeledSet& b) {
  struct Key {
    double x, t;
    bool operator==(const Key&) const = default;
  };
  struct Hash {
    std::size_t operator()(const Key& k) const {
      std::hash<double> h;
      return h(k.x) * 1000003u ^ h(k.t);
    }
  };
  std::unordered_set<Key, Hash> seen;
  heat::LabeledSet out;
  out.points.reserve(a.points.size() + b.points.size());
  for (const auto& p : a.points) {
    if (seen.insert({p.x, p.t}).second) out.points.push_back(p);
  }
  for (const auto& p : b.points) {
    if (seen.insert({p.x, p.t}).second) out.points.push_back(p);
  }
  return out;
}

double predict(const MfModel& model, double x, double t) {
  const double L = model.setup_high.thickness;
  const double duration = model.setup_high.cycle.total_duration();
  if (x < 0.0 || x > L)
    throw DomainError("predict: x outside [0, L]");
  if (t < 0.0 || t > duration)
    throw DomainError("predict: t outside the cure cycle");
  return model.norm.from_u(
      compose_value(model, model.norm.to_xi(x), model.norm.to_tau(t)));
}

// ---------------------------------------------------------------------------
// Bundle IO
// ---------------------------------------------------------------------------

namespace {

json setup_to_json(const heat::ThermalSetup& s) {
  json j;
  j["density"] = s.material.density;
  j["specific_heat"] = s.material.specific_heat;
  j["conductivity"] = s.material.conductivity;
  j["thickness"] = s.thickness;
  j["htc_bottom"] = s.htc_bottom;
  j["htc_top"] = s.htc_top;
  j["initial_temperature"] = s.initial_temperature;
  json kt = json::array(), kv = json::array();
  for (const auto& [t, v] : s.cycle.knots) {
    kt.push_back(t);
    kv.push_back(v);
  }
  j["cycle_t"] = kt;
  j["cycle_temp"] = kv;
  return j;
}

heat::ThermalSetup setup_from_json(const json& j) {
  heat::ThermalSetup s;
  s.material.density = j.at("density").get<double>();
  s.material.specific_heat = j.at("specific_heat").get<double>();
  s.material.conductivity = j.at("conductivity").get<double>();
  s.thickness = j.at("thickness").get<double>();
  s.htc_bottom = j.at("htc_bottom").get<double>();
  s.htc_top = j.at("htc_top").get<double>();
  s.initial_temperature = j.at("initial_temperature").get<double>();
  const auto& kt = j.at("cycle_t");
  const auto& kv = j.at("cycle_temp");
  if (kt.size() != kv.size()) throw IoError("bundle cycle arrays mismatch");
  for (std::size_t i = 0; i < kt.size(); ++i)
    s.cycle.knots.emplace_back(kt[i].get<double>(), kv[i].get<double>());
  s.validate();
  return s;
}

json norm_to_json(const pinn::Normalization& n) {
  return json{{"x_scale", n.x_scale},
              {"t_scale", n.t_scale},
              {"temp_scale", n.temp_scale}};
}

pinn::Normalization norm_from_json(const json& j) {
  pinn::Normalization n;
  n.x_scale = j.at("x_scale").get<double>();
  n.t_scale = j.at("t_scale").get<double>();
  n.temp_scale = j.at("temp_scale").get<double>();
  n.validate();
  return n;
}

void write_manifest(const std::string& dir, const json& j) {
  std::ofstream os(dir + "/manifest.json", std::ios::binary);
  if (!os) throw IoError("cannot write manifest in " + dir);
  os << j.dump(2) << '\n';
}

json read_manifest(const std::string& dir) {
  std::ifstream is(dir + "/manifest.json", std::ios::binary);
  if (!is) throw IoError("missing manifest.json in " + dir);
  json j;
  is >> j;
  return j;
}

}  // namespace

void save_bundle(const std::string& dir, const MfModel& model) {
  model.validate();
  fs::create_directories(dir);
  net::save_checkpoint(dir + "/low.ckpt", model.low);
  net::save_checkpoint(dir + "/high.ckpt", model.high);
  json j;
  j["format"] = "mfpinn-bundle";
  j["version"] = 1;
  j["kind"] = "mfpinn";
  j["normalization"] = norm_to_json(model.norm);
  j["setup_low"] = setup_to_json(model.setup_low);
  j["setup_high"] = setup_to_json(model.setup_high);
  j["seeds"] = json{{"low", model.low.seed}, {"high", model.high.seed}};
  write_manifest(dir, j);
}

void save_pinn_bundle(const std::string& dir, const net::NetworkParams& params,
                      const heat::ThermalSetup& setup,
                      const pinn::Normalization& norm) {
  fs::create_directories(dir);
  net::save_checkpoint(dir + "/model.ckpt", params);
  json j;
  j["format"] = "mfpinn-bundle";
  j["version"] = 1;
  j["kind"] = "pinn";
  j["normalization"] = norm_to_json(norm);
  j["setup"] = setup_to_json(setup);
  j["seeds"] = json{{"model", params.seed}};
  write_manifest(dir, j);
}

SavedModel load_bundle(const std::string& dir) {
  const json j = read_manifest(dir);
  if (j.value("format", "") != "mfpinn-bundle")
    throw IoError("not a model bundle: " + dir);
  if (j.value("version", 0) != 1)
    throw IoError("unsupported bundle version in " + dir);
  SavedModel out;
  out.kind = j.at("kind").get<std::string>();
  out.norm = norm_from_json(j.at("normalization"));
  if (out.kind == "pinn") {
    out.single = net::load_checkpoint(dir + "/model.ckpt");
    out.setup = setup_from_json(j.at("setup"));
  } else if (out.kind == "mfpinn") {
    out.model.low = net::load_checkpoint(dir + "/low.ckpt");
    out.model.high = net::load_checkpoint(dir + "/high.ckpt");
    out.model.norm = out.norm;
    out.model.setup_low = setup_from_json(j.at("setup_low"));
    out.model.setup_high = setup_from_json(j.at("setup_high"));
    out.setup = out.model.setup_high;
    out.model.validate();
  } else {
    throw IoError("unknown bundle kind '" + out.kind + "' in " + dir);
  }
  return out;
}

double SavedModel::predict_at(double x, double t) const {
  if (kind == "mfpinn") return predict(model, x, t);
  const double L = setup.thickness;
  const double duration = setup.cycle.total_duration();
  if (x < 0.0 || x > L) throw DomainError("predict: x outside [0, L]");
  if (t < 0.0 || t > duration)
    throw DomainError("predict: t outside the cure cycle");
  return norm.from_u(net::forward(
      single, std::array<double, 2>{norm.to_xi(x), norm.to_tau(t)}));
}

}  // namespace mfpinn::mf
