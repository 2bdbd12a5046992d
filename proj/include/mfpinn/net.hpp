#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfpinn/tape.hpp"

namespace mfpinn::net {

// Fully-connected tanh network (linear output layer). Parameters live in
// one flat array, laid out per layer as the row-major weight matrix
// followed by the bias vector; layer l maps layer_sizes[l] ->
// layer_sizes[l+1].
struct NetworkParams {
  std::vector<int> layer_sizes;
  std::vector<double> data;
  std::uint64_t seed = 0;

  int input_width() const { return layer_sizes.front(); }
  int output_width() const { return layer_sizes.back(); }
  int layer_count() const { return static_cast<int>(layer_sizes.size()) - 1; }
  std::size_t param_count() const;

  std::span<double> weight(int layer);
  std::span<const double> weight(int layer) const;
  std::span<double> bias(int layer);
  std::span<const double> bias(int layer) const;
};

// d(loss)/d(theta), shape-congruent with the NetworkParams it came from.
struct Gradient {
  std::vector<int> layer_sizes;
  std::vector<double> data;

  std::span<double> weight(int layer);
  std::span<double> bias(int layer);
  double max_abs() const;
  double mean_abs() const;  // sum |g_i| / count, over every parameter entry
  void add_scaled(double a, const Gradient& other);
};

Gradient zeros_like(const NetworkParams& params);

// Network value at (x, t, ...) together with its input derivatives, all in
// the caller's (normalized) coordinates.
struct Jet {
  double u = 0.0;
  double du_dx = 0.0;
  double d2u_dx2 = 0.0;
  double du_dt = 0.0;
};

// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
// Identical (layer_sizes, seed) pairs give bit-identical parameters.
NetworkParams init_params(const std::vector<int>& layer_sizes,
                          std::uint64_t seed);

double forward(const NetworkParams& params, std::span<const double> input);

// Exact derivatives of the network function at (x, t, extra...), extras
// held constant. Taylor-mode propagation, not finite differences.
Jet forward_jet(const NetworkParams& params, double x, double t,
                std::span<const double> extra = {});

// General form: propagates a second-order input path (tangent tan_x with
// curvature curv_x) and a first-order path (tan_t). The returned du_dx /
// d2u_dx2 / du_dt are the first and second directional derivatives along
// those paths; the multifidelity composition builds its total derivatives
// from this.
Jet forward_jet_seeded(const NetworkParams& params,
                       std::span<const double> input,
                       std::span<const double> tan_x,
                       std::span<const double> curv_x,
                       std::span<const double> tan_t);

// One evaluation request inside a differentiable loss. channels selects how
// much of the jet a loss term actually consumes: 1 = value, 2 = +du_dx,
// 3 = +d2u_dx2, 4 = +du_dt. Empty seed vectors mean the standard basis
// directions (d/dx with zero curvature, d/dt).
struct EvalPoint {
  std::vector<double> input;
  std::vector<double> tan_x;
  std::vector<double> curv_x;
  std::vector<double> tan_t;
  int channels = 4;

  static EvalPoint standard(double x, double t, int channels = 4);
};

struct JetVar {
  ad::Var u, du_dx, d2u_dx2, du_dt;
};

// Builds a scalar loss on the tape from the batch jets; the jets arrive in
// the same order as the evaluation points.
using LossBuilder =
    std::function<ad::Var(ad::Tape&, std::span<const JetVar>)>;

// Exact gradient of builder-defined scalars with respect to every
// parameter: forward Taylor-mode jets per point, reverse accumulation over
// the stored propagation, per-point contributions summed in point order.
// The multi variant shares one forward pass across several scalars.
std::pair<double, Gradient> grad_params(const NetworkParams& params,
                                        std::span<const EvalPoint> points,
                                        const LossBuilder& builder);

struct MultiGrad {
  std::vector<double> values;
  std::vector<Gradient> grads;
};

MultiGrad grad_params_multi(const NetworkParams& params,
                            std::span<const EvalPoint> points,
                            std::span<const LossBuilder> builders);

// Versioned binary checkpoint (little-endian, full double precision;
// round-trips losslessly).
void save_checkpoint(const std::string& path, const NetworkParams& params);
NetworkParams load_checkpoint(const std::string& path);

}  // namespace mfpinn::net
