#pragma once

#include <cstdint>
#include <string>

#include "mfpinn/heat.hpp"
#include "mfpinn/net.hpp"
#include "mfpinn/pinn.hpp"

namespace mfpinn::mf {

// Two-stage model: the low-fidelity network learns its own system first and
// is then frozen; the high-fidelity map is y_low + NN(xi, tau, y_low),
// with the network carrying the correction between the two systems.
struct MfModel {
  net::NetworkParams low;   // input width 2
  net::NetworkParams high;  // input width 3
  pinn::Normalization norm;
  heat::ThermalSetup setup_low;
  heat::ThermalSetup setup_high;

  void validate() const;
};

// Glorot hidden layers with a zeroed output layer: the correction branch
// starts at exactly zero, so the composed model begins at the prior.
net::NetworkParams init_correction_params(const std::vector<int>& layer_sizes,
                                          std::uint64_t seed);

// Stage one: PINN training on the low-fidelity system plus its labeled
// set. Both multifidelity stages balance their loss terms once, from the
// gradient statistics at initialization, and keep those weights for the
// whole run: re-balancing mid-run makes the objective non-stationary and
// measurably degrades the correction learning.
pinn::TrainResult train_low(const net::NetworkParams& init,
                            const heat::ThermalSetup& setup_low,
                            const pinn::Normalization& norm,
                            const heat::LabeledSet& data_low,
                            const pinn::PointSets& sets,
                            const pinn::TrainConfig& config,
                            const pinn::EpochCallback& on_epoch = {});

// Value and total derivatives of g(xi,tau) = f_H(xi, tau, f_L(xi,tau)):
// the chain rule through the third input, e.g.
//   d2g/dxi2 = fH_xx + 2 fH_xy yL' + fH_yy yL'^2 + fH_y yL''.
net::Jet compose_jet(const MfModel& model, double xi, double tau);
double compose_value(const MfModel& model, double xi, double tau);

// High-fidelity problem with evaluation points routed through the frozen
// low network (inputs and derivative seeds baked in as constants, so
// gradients flow only into the high network).
pinn::TrainProblem build_high_problem(const MfModel& model,
                                      const pinn::PointSets& sets,
                                      const heat::LabeledSet& data_high);

// Stage two: trains model.high in place; model.low is read, never written.
pinn::TrainResult train_high(MfModel& model, const heat::LabeledSet& data_high,
                             const pinn::PointSets& sets,
                             const pinn::TrainConfig& config,
                             const pinn::EpochCallback& on_epoch = {});

// Labeled high-fidelity cloud for a subdomain where the two fidelities
// diverge (default use: the cooldown tail of the cycle).
heat::LabeledSet augment_cooldown(const heat::FieldSolution& field_high, int n,
                                  const heat::Region& region,
                                  std::uint64_t seed);

// Union without duplicate (x,t) lattice points; `a` keeps priority.
heat::LabeledSet merge_labeled(const heat::LabeledSet& a,
                               const heat::LabeledSet& b);

// Denormalized composed prediction in degrees C at physical (x [m], t [s]).
double predict(const MfModel& model, double x, double t);

// Bundle directory: checkpoints plus a versioned JSON manifest carrying the
// normalization, setups, and seeds. Two kinds: "pinn" (one network) and
// "mfpinn" (low + high).
struct SavedModel {
  std::string kind;
  net::NetworkParams single;  // kind == "pinn"
  MfModel model;              // kind == "mfpinn"
  pinn::Normalization norm;
  heat::ThermalSetup setup;   // the evaluated (target) system

  double predict_at(double x, double t) const;
};

void save_bundle(const std::string& dir, const MfModel& model);
void save_pinn_bundle(const std::string& dir, const net::NetworkParams& params,
                      const heat::ThermalSetup& setup,
                      const pinn::Normalization& norm);
SavedModel load_bundle(const std::string& dir);

}  // namespace mfpinn::mf
