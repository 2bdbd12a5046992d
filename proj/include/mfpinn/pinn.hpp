#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mfpinn/errors.hpp"
#include "mfpinn/heat.hpp"
#include "mfpinn/net.hpp"

namespace mfpinn::pinn {

// Maps physical (x, t, T) to the network's (xi, tau, u) coordinates.
struct Normalization {
  double x_scale = 0.0;     // L, m
  double t_scale = 0.0;     // s
  double temp_scale = 0.0;  // C

  double to_xi(double x) const { return x / x_scale; }
  double to_tau(double t) const { return t / t_scale; }
  double to_u(double temp) const { return temp / temp_scale; }
  double from_u(double u) const { return u * temp_scale; }
  void validate() const;
};

enum class Side { Bottom, Top };

struct BoundaryPoint {
  Side side;
  double tau;
};

struct PointSets {
  std::vector<std::array<double, 2>> collocation;  // (xi, tau)
  std::vector<BoundaryPoint> boundary;
  std::vector<double> initial;                     // xi at tau=0
  std::vector<std::array<double, 3>> labeled;      // (xi, tau, u_target)
};

// lambda_pde is pinned to 1 (the reference term of the adaptive scheme).
struct LossWeights {
  double pde = 1.0;
  double bc = 1.0;
  double ic = 1.0;
  double data = 1.0;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double lr_decay_factor = 0.5;
  int lr_patience_epochs = 20;
  double ema_alpha = 0.1;
  int weight_update_stride = 10;  // optimizer steps between weight refreshes
  std::uint64_t seed = 0;
  // The gradient-statistics weighting balances the physics terms; the
  // labeled-data term enters with a fixed weight proportional to the
  // number of labels (independent measurements accumulate evidence like a
  // sum, not a mean), so label abundance translates into pull. Set
  // adapt_data_weight to fold the data term into the adaptive scheme
  // instead.
  bool adapt_data_weight = false;
  double data_weight_per_label = 4.0;
  double improvement_rtol = 1e-4;

  void validate() const;
};

struct LossReport {
  int epoch = 0;
  double pde = 0.0, bc = 0.0, ic = 0.0, data = 0.0;  // raw mean squares
  LossWeights weights;
  double total = 0.0;
  double lr = 0.0;
};

// Thrown when the loss goes non-finite mid-training; carries the last
// parameters that still evaluated cleanly.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& msg, net::NetworkParams last_good,
                long step)
      : Error("training", msg), last_good_params(std::move(last_good)),
        step_index(step) {}

  net::NetworkParams last_good_params;
  long step_index;
};

// Collocation uniform over (0,1)^2, boundary times uniform over (0,1) with
// n_boundary/2 per side (bottom first), initial positions uniform over
// (0,1). Deterministic in seed.
PointSets sample_points(int n_collocation, int n_boundary, int n_initial,
                        std::uint64_t seed);

// alpha * t_scale / L^2, the dimensionless diffusion group of the
// normalized heat equation.
double diffusion_group(const heat::ThermalSetup& setup,
                       const Normalization& norm);

// r = du/dtau - (alpha t_scale / L^2) d2u/dxi2 at a normalized point.
double pde_residual(const net::Jet& jet, const heat::ThermalSetup& setup,
                    const Normalization& norm);

// r_b = h_b (u|0 - u_air) - (k/L) du/dxi|0
// r_t = h_t (u_air - u|1) - (k/L) du/dxi|1
// with u_air = T_air(tau * t_scale) / temp_scale.
std::pair<double, double> boundary_residuals(const net::Jet& jet_bottom,
                                             const net::Jet& jet_top,
                                             double tau,
                                             const heat::ThermalSetup& setup,
                                             const Normalization& norm);

// u|tau=0 - T0/temp_scale.
double initial_residual(const net::Jet& jet, double xi,
                        const heat::ThermalSetup& setup,
                        const Normalization& norm);

// Evaluation points plus the residual coefficients, ready for the training
// loop. The multifidelity stage assembles one of these with composed
// evaluation seeds; everything downstream is shared.
struct TrainProblem {
  std::vector<net::EvalPoint> collocation;
  std::vector<net::EvalPoint> boundary;
  std::vector<Side> boundary_sides;
  std::vector<double> boundary_air_u;  // u_air at each boundary point's tau
  std::vector<net::EvalPoint> initial;
  std::vector<net::EvalPoint> labeled;
  std::vector<double> labeled_u;
  double kappa = 0.0;     // alpha t_scale / L^2
  double h_bottom = 0.0;  // physical W/(m^2 K)
  double h_top = 0.0;
  double k_over_L = 0.0;  // W/(m^2 K)
  double u0 = 0.0;        // T0 / temp_scale

  // Constant jet offsets added to the network jets before the residuals
  // are formed. A plain PINN leaves these empty; the multifidelity high
  // stage puts the frozen low-fidelity prediction here so its high
  // network learns the correction on top of it.
  std::vector<net::Jet> collocation_offset;
  std::vector<net::Jet> boundary_offset;
  std::vector<double> initial_offset_u;
  std::vector<double> labeled_offset_u;

  std::size_t total_points() const {
    return collocation.size() + boundary.size() + initial.size() +
           labeled.size();
  }
};

TrainProblem build_problem(const PointSets& sets,
                           const heat::ThermalSetup& setup,
                           const Normalization& norm);

// Full-batch loss + exact parameter gradient in one call.
std::pair<LossReport, net::Gradient> composite_loss(
    const net::NetworkParams& params, const PointSets& sets,
    const LossWeights& weights, const heat::ThermalSetup& setup,
    const Normalization& norm);

// Gradient-statistics update: lambda_i <- (1-a) lambda_i +
// a * max|grad L_pde| / mean|grad L_i| for each non-PDE term; null or
// zero-gradient terms keep their previous weight, lambda_pde stays 1.
LossWeights update_weights_adaptive(const net::Gradient& g_pde,
                                    const net::Gradient* g_bc,
                                    const net::Gradient* g_ic,
                                    const net::Gradient* g_data,
                                    const LossWeights& current,
                                    double ema_alpha,
                                    bool adapt_data_weight = true);

struct TrainResult {
  net::NetworkParams params;
  std::vector<LossReport> history;
  LossWeights weights;
};

using EpochCallback = std::function<void(const LossReport&)>;

// Adam (beta1 0.9, beta2 0.999, eps 1e-8). Per optimizer step: one
// batch_size minibatch of collocation points plus the full boundary,
// initial, and labeled sets; the collocation set is reshuffled every
// epoch; adaptive weights refresh every weight_update_stride steps; the
// learning rate decays when the epoch-mean total loss stops improving.
// Bit-reproducible in (seed, config, problem).
TrainResult train_core(const net::NetworkParams& init,
                       const TrainProblem& problem, LossWeights weights,
                       const TrainConfig& config,
                       const EpochCallback& on_epoch = {});

TrainResult train(const net::NetworkParams& init, const PointSets& sets,
                  const LossWeights& weights, const TrainConfig& config,
                  const heat::ThermalSetup& setup, const Normalization& norm,
                  const EpochCallback& on_epoch = {});

}  // namespace mfpinn::pinn
