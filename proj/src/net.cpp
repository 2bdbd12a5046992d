#include "mfpinn/net.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "mfpinn/errors.hpp"
#include "mfpinn/kernels.hpp"
#include "mfpinn/rng.hpp"

namespace mfpinn::net {

namespace {

std::size_t count_params(const std::vector<int>& sizes) {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    total += static_cast<std::size_t>(sizes[l + 1]) *
             (static_cast<std::size_t>(sizes[l]) + 1);
  }
  return total;
}

std::size_t weight_offset(const std::vector<int>& sizes, int layer) {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l) {
    off += static_cast<std::size_t>(sizes[l + 1]) *
           (static_cast<std::size_t>(sizes[l]) + 1);
  }
  return off;
}

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2)
    throw ConfigError("layer_sizes needs at least input and output widths");
  for (int s : sizes)
    if (s < 1) throw ConfigError("layer_sizes entries must be positive");
}

}  // namespace

std::size_t NetworkParams::param_count() const {
  return count_params(layer_sizes);
}

std::span<double> NetworkParams::weight(int layer) {
  const std::size_t off = weight_offset(layer_sizes, layer);
  return {data.data() + off, static_cast<std::size_t>(layer_sizes[layer + 1]) *
                                 layer_sizes[layer]};
}

std::span<const double> NetworkParams::weight(int layer) const {
  const std::size_t off = weight_offset(layer_sizes, layer);
  return {data.data() + off, static_cast<std::size_t>(layer_sizes[layer + 1]) *
                                 layer_sizes[layer]};
}

std::span<double> NetworkParams::bias(int layer) {
  const std::size_t off = weight_offset(layer_sizes, layer) +
                          static_cast<std::size_t>(layer_sizes[layer + 1]) *
                              layer_sizes[layer];
  return {data.data() + off, static_cast<std::size_t>(layer_sizes[layer + 1])};
}

std::span<const double> NetworkParams::bias(int layer) const {
  const std::size_t off = weight_offset(layer_sizes, layer) +
                          static_cast<std::size_t>(layer_sizes[layer + 1]) *
                              layer_sizes[layer];
  return {data.data() + off, static_cast<std::size_t>(layer_sizes[layer + 1])};
}

std::span<double> Gradient::weight(int layer) {
  const std::size_t off = weight_offset(layer_sizes, layer);
  return {data.data() + off, static_cast<std::size_t>(layer_sizes[layer + 1]) *
                                 layer_sizes[layer]};
}

std::span<double> Gradient::bias(int layer) {
  const std::size_t off = weight_offset(layer_sizes, layer) +
                          static_cast<std::size_t>(layer_sizes[layer + 1]) *
                              layer_sizes[layer];
  return {data.data() + off, static_cast<std::size_t>(layer_sizes[layer + 1])};
}

double Gradient::max_abs() const {
  return kernels::active().max_abs(data.data(), static_cast<int>(data.size()));
}

double Gradient::mean_abs() const {
  if (data.empty()) return 0.0;
  return kernels::active().sum_abs(data.data(),
                                   static_cast<int>(data.size())) /
         static_cast<double>(data.size());
}

void Gradient::add_scaled(double a, const Gradient& other) {
  if (other.data.size() != data.size())
    throw DimensionError("gradient shapes differ");
  kernels::active().axpy(a, other.data.data(), data.data(),
                         static_cast<int>(data.size()));
}

Gradient zeros_like(const NetworkParams& params) {
  Gradient g;
  g.layer_sizes = params.layer_sizes;
  g.data.assign(params.param_count(), 0.0);
  return g;
}

NetworkParams init_params(const std::vector<int>& layer_sizes,
                          std::uint64_t seed) {
  check_sizes(layer_sizes);
  NetworkParams p;
  p.layer_sizes = layer_sizes;
  p.seed = seed;
  p.data.assign(count_params(layer_sizes), 0.0);
  Xoshiro256ss rng(seed);
  for (int l = 0; l + 1 < static_cast<int>(layer_sizes.size()); ++l) {
    const double fan_in = layer_sizes[l];
    const double fan_out = layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& w : p.weight(l)) w = rng.uniform(-bound, bound);
    // biases stay zero
  }
  return p;
}

// ---------------------------------------------------------------------------
// Propagation. Channel layout: 0 = value, 1 = first derivative along the
// tan_x path, 2 = second derivative along it, 3 = first derivative along
// the tan_t path. Through an affine layer every channel is multiplied by W
// (the bias feeds only the value channel). Through tanh, with s = tanh(z),
// s1 = 1-s^2, s2 = -2*s*s1:
//   out0 = s, out1 = s1*z1, out2 = s1*z2 + s2*z1^2, out3 = s1*z3.
// ---------------------------------------------------------------------------

namespace {

constexpr int kMaxChannels = 4;

struct Workspace {
  std::vector<double> ping, pong;     // untraced evaluation
  std::vector<double> arena;          // traced batch storage
  std::vector<std::size_t> offsets;   // per-point arena base
  std::vector<double> zbar, abar;     // reverse scratch
};

Workspace& tls_ws() {
  thread_local Workspace ws;
  return ws;
}

ad::Tape& tls_tape() {
  thread_local ad::Tape tape;
  return tape;
}

int max_width(const std::vector<int>& sizes) {
  int m = 0;
  for (int s : sizes) m = std::max(m, s);
  return m;
}

std::size_t trace_size(const std::vector<int>& sizes, int nch) {
  std::size_t total = 0;
  const int layers = static_cast<int>(sizes.size()) - 1;
  for (int l = 0; l < layers; ++l) {
    total += static_cast<std::size_t>(nch) * sizes[l];      // inputs
    total += static_cast<std::size_t>(nch) * sizes[l + 1];  // pre-activations
    if (l + 1 < layers) total += static_cast<std::size_t>(sizes[l + 1]);
  }
  return total;
}

void fill_seeds(const NetworkParams& params, const EvalPoint& pt, double* a,
                int nch) {
  const int n0 = params.input_width();
  if (static_cast<int>(pt.input.size()) != n0)
    throw DimensionError("evaluation input width " +
                         std::to_string(pt.input.size()) + " != network input " +
                         std::to_string(n0));
  std::memcpy(a, pt.input.data(), sizeof(double) * n0);
  auto seed_channel = [&](int ch, const std::vector<double>& v,
                          int standard_axis) {
    double* dst = a + static_cast<std::size_t>(ch) * n0;
    if (v.empty()) {
      std::fill(dst, dst + n0, 0.0);
      if (standard_axis >= 0 && standard_axis < n0) dst[standard_axis] = 1.0;
    } else {
      if (static_cast<int>(v.size()) != n0)
        throw DimensionError("seed vector width mismatch");
      std::memcpy(dst, v.data(), sizeof(double) * n0);
    }
  };
  if (nch > 1) seed_channel(1, pt.tan_x, 0);
  if (nch > 2) seed_channel(2, pt.curv_x, -1);
  if (nch > 3) seed_channel(3, pt.tan_t, 1);
}

// Activation of one hidden layer, z channels -> out channels (width n).
void activate(const double* z, double* out, double* sig, int n, int nch) {
  const double* z1 = z + n;
  const double* z2 = z + 2 * n;
  const double* z3 = z + 3 * n;
  double* o1 = out + n;
  double* o2 = out + 2 * n;
  double* o3 = out + 3 * n;
  for (int i = 0; i < n; ++i) {
    const double s = std::tanh(z[i]);
    sig[i] = s;
    out[i] = s;
    const double s1 = 1.0 - s * s;
    if (nch > 1) o1[i] = s1 * z1[i];
    if (nch > 2) {
      const double s2 = -2.0 * s * s1;
      o2[i] = s1 * z2[i] + s2 * z1[i] * z1[i];
    }
    if (nch > 3) o3[i] = s1 * z3[i];
  }
}

Jet propagate_untraced(const NetworkParams& params, const EvalPoint& pt) {
  const int nch = pt.channels;
  const auto& sizes = params.layer_sizes;
  const int layers = params.layer_count();
  const int w = max_width(sizes);
  auto& ws = tls_ws();
  ws.ping.resize(static_cast<std::size_t>(nch) * w);
  ws.pong.resize(static_cast<std::size_t>(nch) * w);
  double* a = ws.ping.data();
  double* z = ws.pong.data();
  fill_seeds(params, pt, a, nch);

  const auto& k = kernels::active();
  for (int l = 0; l < layers; ++l) {
    const int nin = sizes[l];
    const int nout = sizes[l + 1];
    const double* W = params.weight(l).data();
    const double* b = params.bias(l).data();
    // width per channel changes across layers, so channels are repacked
    // into stride nout here.
    k.matvec_bias(W, a, b, z, nout, nin);
    for (int c = 1; c < nch; ++c) {
      k.matvec(W, a + static_cast<std::size_t>(c) * nin,
               z + static_cast<std::size_t>(c) * nout, nout, nin);
    }
    if (l + 1 < layers) {
      // activate back into `a` for the next layer
      for (int i = 0; i < nout; ++i) {
        const double s = std::tanh(z[i]);
        const double s1 = 1.0 - s * s;
        a[i] = s;
        if (nch > 1) a[nout + i] = s1 * z[nout + i];
        if (nch > 2) {
          const double s2 = -2.0 * s * s1;
          a[2 * nout + i] =
              s1 * z[2 * nout + i] + s2 * z[nout + i] * z[nout + i];
        }
        if (nch > 3) a[3 * nout + i] = s1 * z[3 * nout + i];
      }
    }
  }
  const int nout = sizes[layers];
  Jet j;
  j.u = z[0];
  if (nch > 1) j.du_dx = z[nout * 1];
  if (nch > 2) j.d2u_dx2 = z[nout * 2];
  if (nch > 3) j.du_dt = z[nout * 3];
  return j;
}

// Traced forward for one point into arena at `base`; returns the jet.
Jet propagate_traced(const NetworkParams& params, const EvalPoint& pt,
                     double* base) {
  const int nch = pt.channels;
  const auto& sizes = params.layer_sizes;
  const int layers = params.layer_count();
  const auto& k = kernels::active();

  double* cursor = base;
  double* a = cursor;  // layer-0 inputs
  fill_seeds(params, pt, a, nch);
  cursor += static_cast<std::size_t>(nch) * sizes[0];

  Jet jet;
  for (int l = 0; l < layers; ++l) {
    const int nin = sizes[l];
    const int nout = sizes[l + 1];
    double* z = cursor;
    cursor += static_cast<std::size_t>(nch) * nout;
    const double* W = params.weight(l).data();
    const double* b = params.bias(l).data();
    k.matvec_bias(W, a, b, z, nout, nin);
    for (int c = 1; c < nch; ++c) {
      k.matvec(W, a + static_cast<std::size_t>(c) * nin,
               z + static_cast<std::size_t>(c) * nout, nout, nin);
    }
    if (l + 1 < layers) {
      double* sig = cursor;
      cursor += nout;
      double* next_a = cursor;
      cursor += static_cast<std::size_t>(nch) * nout;
      activate(z, next_a, sig, nout, nch);
      a = next_a;
    } else {
      jet.u = z[0];
      if (nch > 1) jet.du_dx = z[static_cast<std::size_t>(nout)];
      if (nch > 2) jet.d2u_dx2 = z[static_cast<std::size_t>(2) * nout];
      if (nch > 3) jet.du_dt = z[static_cast<std::size_t>(3) * nout];
    }
  }
  return jet;
}

// Reverse sweep over one traced point, accumulating into grad.
void reverse_traced(const NetworkParams& params, const EvalPoint& pt,
                    const double* base, const double jbar[4], Gradient& grad) {
  const int nch = pt.channels;
  const auto& sizes = params.layer_sizes;
  const int layers = params.layer_count();
  const int w = max_width(sizes);
  const auto& k = kernels::active();
  auto& ws = tls_ws();
  ws.zbar.resize(static_cast<std::size_t>(kMaxChannels) * w);
  ws.abar.resize(static_cast<std::size_t>(kMaxChannels) * w);
  double* zbar = ws.zbar.data();
  double* abar = ws.abar.data();

  // Arena offsets of each layer's blocks (recomputed walk, small L).
  thread_local std::vector<const double*> a_blk, z_blk, sig_blk;
  a_blk.assign(layers, nullptr);
  z_blk.assign(layers, nullptr);
  sig_blk.assign(layers, nullptr);
  {
    const double* cursor = base;
    for (int l = 0; l < layers; ++l) {
      a_blk[l] = cursor;
      cursor += static_cast<std::size_t>(nch) * sizes[l];
      z_blk[l] = cursor;
      cursor += static_cast<std::size_t>(nch) * sizes[l + 1];
      if (l + 1 < layers) {
        sig_blk[l] = cursor;
        cursor += sizes[l + 1];
      }
    }
  }

  // Seed output adjoints (output width 1).
  for (int c = 0; c < nch; ++c) zbar[c * w] = 0.0;
  zbar[0 * w] = jbar[0];
  if (nch > 1) zbar[1 * w] = jbar[1];
  if (nch > 2) zbar[2 * w] = jbar[2];
  if (nch > 3) zbar[3 * w] = jbar[3];

  for (int l = layers - 1; l >= 0; --l) {
    const int nin = sizes[l];
    const int nout = sizes[l + 1];
    const double* W = params.weight(l).data();
    double* gW = grad.weight(l).data();
    double* gb = grad.bias(l).data();
    const double* a = a_blk[l];
    for (int c = 0; c < nch; ++c) {
      k.ger_acc(gW, zbar + static_cast<std::size_t>(c) * w,
                a + static_cast<std::size_t>(c) * nin, nout, nin);
    }
    k.axpy(1.0, zbar, gb, nout);  // bias feeds the value channel only
    if (l == 0) break;

    for (int c = 0; c < nch; ++c) {
      double* dst = abar + static_cast<std::size_t>(c) * w;
      std::fill(dst, dst + nin, 0.0);
      k.matvec_t_acc(W, zbar + static_cast<std::size_t>(c) * w, dst, nout,
                     nin);
    }
    // Through the activation of layer l-1.
    const int n = nin;  // width of layer l-1 outputs
    const double* sig = sig_blk[l - 1];
    const double* z = z_blk[l - 1];
    const double* z1 = z + n;
    const double* z2 = z + 2 * n;
    const double* z3 = z + 3 * n;
    for (int i = 0; i < n; ++i) {
      const double s = sig[i];
      const double s1 = 1.0 - s * s;
      const double s2 = -2.0 * s * s1;
      const double a0 = abar[i];
      double nz0 = a0 * s1;
      double nz1 = 0.0, nz2 = 0.0, nz3 = 0.0;
      if (nch > 1) {
        const double a1 = abar[w + i];
        nz0 += a1 * z1[i] * s2;
        nz1 = a1 * s1;
      }
      if (nch > 2) {
        const double a2 = abar[2 * w + i];
        const double s3 = -2.0 * (s1 * s1 + s * s2);
        nz0 += a2 * (z2[i] * s2 + z1[i] * z1[i] * s3);
        nz1 += a2 * 2.0 * s2 * z1[i];
        nz2 = a2 * s1;
      }
      if (nch > 3) {
        const double a3 = abar[3 * w + i];
        nz0 += a3 * z3[i] * s2;
        nz3 = a3 * s1;
      }
      zbar[i] = nz0;
      if (nch > 1) zbar[w + i] = nz1;
      if (nch > 2) zbar[2 * w + i] = nz2;
      if (nch > 3) zbar[3 * w + i] = nz3;
    }
  }
}

void check_scalar_output(const NetworkParams& params) {
  if (params.output_width() != 1)
    throw DimensionError("operation requires an output width of 1");
}

void check_jet_finite(const Jet& j) {
  if (!(std::isfinite(j.u) && std::isfinite(j.du_dx) &&
        std::isfinite(j.d2u_dx2) && std::isfinite(j.du_dt)))
    throw NumericError("non-finite jet evaluation");
}

}  // namespace

EvalPoint EvalPoint::standard(double x, double t, int channels) {
  EvalPoint p;
  p.input = {x, t};
  p.channels = channels;
  return p;
}

double forward(const NetworkParams& params, std::span<const double> input) {
  check_scalar_output(params);
  EvalPoint pt;
  pt.input.assign(input.begin(), input.end());
  pt.channels = 1;
  return propagate_untraced(params, pt).u;
}

Jet forward_jet(const NetworkParams& params, double x, double t,
                std::span<const double> extra) {
  check_scalar_output(params);
  EvalPoint pt;
  pt.input.reserve(2 + extra.size());
  pt.input = {x, t};
  pt.input.insert(pt.input.end(), extra.begin(), extra.end());
  pt.channels = 4;
  Jet j = propagate_untraced(params, pt);
  check_jet_finite(j);
  return j;
}

Jet forward_jet_seeded(const NetworkParams& params,
                       std::span<const double> input,
                       std::span<const double> tan_x,
                       std::span<const double> curv_x,
                       std::span<const double> tan_t) {
  check_scalar_output(params);
  EvalPoint pt;
  pt.input.assign(input.begin(), input.end());
  pt.tan_x.assign(tan_x.begin(), tan_x.end());
  pt.curv_x.assign(curv_x.begin(), curv_x.end());
  pt.tan_t.assign(tan_t.begin(), tan_t.end());
  pt.channels = 4;
  Jet j = propagate_untraced(params, pt);
  check_jet_finite(j);
  return j;
}

MultiGrad grad_params_multi(const NetworkParams& params,
                            std::span<const EvalPoint> points,
                            std::span<const LossBuilder> builders) {
  check_scalar_output(params);
  for (const auto& pt : points) {
    if (pt.channels < 1 || pt.channels > kMaxChannels)
      throw DimensionError("EvalPoint channels must be 1..4");
  }

  auto& ws = tls_ws();
  const std::size_t n_pts = points.size();
  ws.offsets.resize(n_pts);
  std::size_t total = 0;
  for (std::size_t i = 0; i < n_pts; ++i) {
    ws.offsets[i] = total;
    total += trace_size(params.layer_sizes, points[i].channels);
  }
  ws.arena.resize(total);

  std::vector<Jet> jets(n_pts);
  for (std::size_t i = 0; i < n_pts; ++i) {
    jets[i] = propagate_traced(params, points[i], ws.arena.data() + ws.offsets[i]);
  }

  ad::Tape& tape = tls_tape();
  tape.clear();
  std::vector<JetVar> jvars(n_pts);
  for (std::size_t i = 0; i < n_pts; ++i) {
    jvars[i].u = tape.input(jets[i].u);
    jvars[i].du_dx = tape.input(jets[i].du_dx);
    jvars[i].d2u_dx2 = tape.input(jets[i].d2u_dx2);
    jvars[i].du_dt = tape.input(jets[i].du_dt);
  }

  MultiGrad out;
  out.values.reserve(builders.size());
  out.grads.reserve(builders.size());
  std::vector<ad::Var> roots;
  roots.reserve(builders.size());
  for (std::size_t k = 0; k < builders.size(); ++k) {
    ad::Var loss = builders[k](tape, jvars);
    if (!std::isfinite(loss.v)) {
      std::size_t bad = n_pts;
      for (std::size_t i = 0; i < n_pts; ++i) {
        if (!(std::isfinite(jets[i].u) && std::isfinite(jets[i].du_dx) &&
              std::isfinite(jets[i].d2u_dx2) && std::isfinite(jets[i].du_dt))) {
          bad = i;
          break;
        }
      }
      throw NumericError(
          "non-finite loss (builder " + std::to_string(k) + ", batch of " +
          std::to_string(n_pts) + " points" +
          (bad < n_pts ? ", first bad point index " + std::to_string(bad) : "") +
          ")");
    }
    roots.push_back(loss);
    out.values.push_back(loss.v);
  }

  for (std::size_t k = 0; k < builders.size(); ++k) {
    tape.backward(roots[k]);
    Gradient g = zeros_like(params);
    for (std::size_t i = 0; i < n_pts; ++i) {
      const double jbar[4] = {tape.grad(jvars[i].u), tape.grad(jvars[i].du_dx),
                              tape.grad(jvars[i].d2u_dx2),
                              tape.grad(jvars[i].du_dt)};
      if (jbar[0] == 0.0 && jbar[1] == 0.0 && jbar[2] == 0.0 && jbar[3] == 0.0)
        continue;
      reverse_traced(params, points[i], ws.arena.data() + ws.offsets[i], jbar,
                     g);
    }
    out.grads.push_back(std::move(g));
  }
  return out;
}

std::pair<double, Gradient> grad_params(const NetworkParams& params,
                                        std::span<const EvalPoint> points,
                                        const LossBuilder& builder) {
  const LossBuilder builders[1] = {builder};
  MultiGrad mg = grad_params_multi(params, points, builders);
  return {mg.values[0], std::move(mg.grads[0])};
}

// ---------------------------------------------------------------------------
// Checkpoint IO: magic, version, seed, layer sizes, raw doubles, all
// little-endian.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'M', 'F', 'P', 'N', 'N', 'E', 'T', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 4);
}

void put_f64(std::ostream& os, double v) {
  put_u64(os, std::bit_cast<std::uint64_t>(v));
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  return std::bit_cast<double>(get_u64(is));
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 8);
  put_u32(os, 1);
  put_u64(os, params.seed);
  put_u32(os, static_cast<std::uint32_t>(params.layer_sizes.size()));
  for (int s : params.layer_sizes) put_u32(os, static_cast<std::uint32_t>(s));
  put_u64(os, params.data.size());
  for (double v : params.data) put_f64(os, v);
  if (!os) throw IoError("short write on checkpoint: " + path);
}

NetworkParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("bad checkpoint magic: " + path);
  const std::uint32_t version = get_u32(is);
  if (version != 1)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  NetworkParams p;
  p.seed = get_u64(is);
  const std::uint32_t n_sizes = get_u32(is);
  if (n_sizes < 2 || n_sizes > 1024) throw IoError("corrupt checkpoint sizes");
  p.layer_sizes.resize(n_sizes);
  for (auto& s : p.layer_sizes) s = static_cast<int>(get_u32(is));
  const std::uint64_t count = get_u64(is);
  if (count != count_params(p.layer_sizes))
    throw IoError("checkpoint parameter count mismatch");
  p.data.resize(count);
  for (auto& v : p.data) v = get_f64(is);
  if (!is) throw IoError("truncated checkpoint: " + path);
  return p;
}

}  // namespace mfpinn::net
