#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <thread>
#include <vector>

#include "mfpinn/errors.hpp"
#include "mfpinn/net.hpp"
#include "mfpinn/rng.hpp"

using namespace mfpinn;
using net::EvalPoint;
using net::Jet;
using net::NetworkParams;

namespace {

NetworkParams manual_net(const std::vector<int>& sizes,
                         const std::vector<std::vector<double>>& weights,
                         const std::vector<std::vector<double>>& biases) {
  NetworkParams p = net::init_params(sizes, 0);
  for (std::size_t l = 0; l < weights.size(); ++l) {
    auto w = p.weight(static_cast<int>(l));
    REQUIRE(w.size() == weights[l].size());
    std::copy(weights[l].begin(), weights[l].end(), w.begin());
    auto b = p.bias(static_cast<int>(l));
    REQUIRE(b.size() == biases[l].size());
    std::copy(biases[l].begin(), biases[l].end(), b.begin());
  }
  return p;
}

// Test-local dense evaluation, written without the library kernels.
double naive_forward(const NetworkParams& p, std::vector<double> act) {
  for (int l = 0; l < p.layer_count(); ++l) {
    const int nin = p.layer_sizes[l];
    const int nout = p.layer_sizes[l + 1];
    auto W = p.weight(l);
    auto b = p.bias(l);
    std::vector<double> next(static_cast<std::size_t>(nout));
    for (int r = 0; r < nout; ++r) {
      double acc = b[r];
      for (int c = 0; c < nin; ++c) acc += W[r * nin + c] * act[c];
      next[r] = (l + 1 < p.layer_count()) ? std::tanh(acc) : acc;
    }
    act = std::move(next);
  }
  return act[0];
}

bool close_rel(double a, double b, double rel, double floor_abs) {
  return std::fabs(a - b) <= rel * std::max(std::fabs(a), std::fabs(b)) + floor_abs;
}

}  // namespace

TEST_CASE("init_params: parameter counts and Glorot bounds") {
  // 5 hidden layers of 30: sum over layers of n_out*(n_in+1).
  const auto p = net::init_params({2, 30, 30, 30, 30, 30, 1}, 42);
  CHECK(p.param_count() == 3841);
  CHECK(p.data.size() == 3841);

  const auto tiny = net::init_params({1, 1}, 99);
  CHECK(tiny.param_count() == 2);
  CHECK(tiny.bias(0)[0] == 0.0);

  const auto p3 = net::init_params({3, 30, 30, 30, 30, 30, 1}, 42);
  CHECK(p3.param_count() == 3871);
  const double bound = std::sqrt(6.0 / 33.0);
  for (double w : p3.weight(0)) {
    CHECK(std::fabs(w) <= bound);
  }
  for (int l = 0; l < p3.layer_count(); ++l) {
    for (double b : p3.bias(l)) CHECK(b == 0.0);
  }
}

TEST_CASE("init_params is bit-deterministic in (sizes, seed)") {
  const auto a = net::init_params({2, 30, 30, 1}, 7);
  const auto b = net::init_params({2, 30, 30, 1}, 7);
  CHECK(a.data == b.data);
  const auto c = net::init_params({2, 30, 30, 1}, 8);
  CHECK(a.data != c.data);
}

TEST_CASE("init_params rejects bad layer lists") {
  CHECK_THROWS_AS(net::init_params({}, 0), ConfigError);
  CHECK_THROWS_AS(net::init_params({3}, 0), ConfigError);
  CHECK_THROWS_AS(net::init_params({2, 0, 1}, 0), ConfigError);
}

TEST_CASE("forward: zero weights give the output bias") {
  auto p = net::init_params({2, 4, 1}, 1);
  std::fill(p.data.begin(), p.data.end(), 0.0);
  p.bias(1)[0] = 2.5;
  const double in[2] = {0.3, -0.8};
  CHECK(net::forward(p, in) == 2.5);
}

TEST_CASE("forward: single linear layer projects its input") {
  const auto p = manual_net({2, 1}, {{1.0, 0.0}}, {{0.0}});
  for (double x : {-1.0, 0.25, 2.0}) {
    const double in[2] = {x, 0.77};
    CHECK(net::forward(p, in) == doctest::Approx(x).epsilon(1e-15));
  }
}

TEST_CASE("forward matches an independent dense evaluation") {
  const auto p = net::init_params({2, 3, 1}, 2024);
  const double in[2] = {0.5, 0.25};
  const double got = net::forward(p, in);
  const double want = naive_forward(p, {0.5, 0.25});
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("forward rejects dimension mismatches") {
  const auto p = net::init_params({2, 3, 1}, 5);
  const double in3[3] = {1, 2, 3};
  CHECK_THROWS_AS(net::forward(p, in3), DimensionError);
  const auto wide = net::init_params({2, 3, 2}, 5);
  const double in2[2] = {1, 2};
  CHECK_THROWS_AS(net::forward(wide, in2), DimensionError);
}

TEST_CASE("forward_jet: affine network has the exact affine jet") {
  // u = 2x - 3t + 0.5
  const auto p = manual_net({2, 1}, {{2.0, -3.0}}, {{0.5}});
  const Jet j = net::forward_jet(p, 0.7, -0.2);
  CHECK(j.u == doctest::Approx(2.0 * 0.7 + 3.0 * 0.2 + 0.5).epsilon(1e-15));
  CHECK(j.du_dx == doctest::Approx(2.0));
  CHECK(j.d2u_dx2 == doctest::Approx(0.0));
  CHECK(j.du_dt == doctest::Approx(-3.0));
}

TEST_CASE("forward_jet: closed-form tanh derivatives") {
  // u = tanh(2x); hidden layer [2]->[1] with weight (2,0), output identity.
  const auto p = manual_net({2, 1, 1}, {{2.0, 0.0}, {1.0}}, {{0.0}, {0.0}});
  const double x = 0.3;
  const Jet j = net::forward_jet(p, x, 123.0);
  const double th = std::tanh(2.0 * x);
  const double sech2 = 1.0 - th * th;
  CHECK(j.u == doctest::Approx(th).epsilon(1e-15));
  CHECK(j.du_dx == doctest::Approx(2.0 * sech2).epsilon(1e-14));
  CHECK(j.d2u_dx2 == doctest::Approx(-8.0 * th * sech2).epsilon(1e-13));
  CHECK(j.du_dt == 0.0);
}

TEST_CASE("forward_jet matches finite differences of forward") {
  const auto p = net::init_params({2, 30, 30, 30, 30, 30, 1}, 11);
  Xoshiro256ss rng(17);
  const double h = 1e-4;
  for (int trial = 0; trial < 20; ++trial) {
    const double x = rng.uniform(0.05, 0.95);
    const double t = rng.uniform(0.05, 0.95);
    const Jet j = net::forward_jet(p, x, t);
    auto f = [&](double xx, double tt) {
      const double in[2] = {xx, tt};
      return net::forward(p, in);
    };
    const double fd_dx = (f(x + h, t) - f(x - h, t)) / (2 * h);
    const double fd_dt = (f(x, t + h) - f(x, t - h)) / (2 * h);
    const double fd_dxx = (f(x + h, t) - 2 * f(x, t) + f(x - h, t)) / (h * h);
    CHECK(close_rel(j.u, f(x, t), 0.0, 0.0));  // exact same value path
    CHECK(close_rel(j.du_dx, fd_dx, 1e-5, 1e-10));
    CHECK(close_rel(j.du_dt, fd_dt, 1e-5, 1e-10));
    CHECK(close_rel(j.d2u_dx2, fd_dxx, 1e-5, 1e-7));
  }
}

TEST_CASE("jet value equals forward bitwise") {
  const auto p = net::init_params({2, 30, 30, 1}, 3);
  Xoshiro256ss rng(4);
  for (int i = 0; i < 50; ++i) {
    const double x = rng.uniform(-1, 1), t = rng.uniform(-1, 1);
    const double in[2] = {x, t};
    CHECK(net::forward_jet(p, x, t).u == net::forward(p, in));
  }
}

TEST_CASE("derivative symmetry for an input-symmetric network") {
  auto p = net::init_params({2, 20, 20, 1}, 5);
  {  // make u(x,t) == u(t,x): first-layer columns equal
    auto w0 = p.weight(0);
    const int rows = p.layer_sizes[1];
    for (int r = 0; r < rows; ++r) w0[r * 2 + 1] = w0[r * 2];
  }
  Xoshiro256ss rng(6);
  for (int i = 0; i < 20; ++i) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
    const Jet jab = net::forward_jet(p, a, b);
    const Jet jba = net::forward_jet(p, b, a);
    CHECK(jab.du_dx == doctest::Approx(jba.du_dt).epsilon(1e-13));
  }
}

TEST_CASE("forward_jet_seeded: directional derivatives along a curve") {
  //  u(a,b) known net; path p(s) = (a+s, b+2s) with curvature (0, 6):
  //  du/ds = u_a + 2 u_b;  d2u/ds2 = u_aa + 4 u_ab + 4 u_bb + 6 u_b.
  const auto p = net::init_params({2, 10, 10, 1}, 21);
  const double a = 0.2, b = -0.4, h = 1e-4;
  const double in[2] = {a, b};
  const double tan_x[2] = {1.0, 2.0};
  const double curv_x[2] = {0.0, 6.0};
  const double tan_t[2] = {0.0, 0.0};
  const Jet j = net::forward_jet_seeded(p, in, tan_x, curv_x, tan_t);
  auto g = [&](double s) {
    const double inp[2] = {a + s, b + 2 * s + 3 * s * s};
    return net::forward(p, inp);
  };
  const double fd1 = (g(h) - g(-h)) / (2 * h);
  const double fd2 = (g(h) - 2 * g(0) + g(-h)) / (h * h);
  CHECK(close_rel(j.du_dx, fd1, 1e-5, 1e-10));
  CHECK(close_rel(j.d2u_dx2, fd2, 1e-5, 1e-7));
  CHECK(j.du_dt == 0.0);
}

TEST_CASE("grad_params: empty batch gives a zero gradient") {
  const auto p = net::init_params({2, 5, 1}, 8);
  auto [val, grad] = net::grad_params(
      p, {}, [](ad::Tape& t, std::span<const net::JetVar>) {
        return t.constant(0.0);
      });
  CHECK(val == 0.0);
  for (double gi : grad.data) CHECK(gi == 0.0);
}

TEST_CASE("grad_params: hand chain rule on a linear layer") {
  // u = w1 x + w2 t + b; loss = u(x0,t0)^2.
  const double w1 = 1.3, w2 = -0.6, b = 0.25, x0 = 0.8, t0 = -0.3;
  const auto p = manual_net({2, 1}, {{w1, w2}}, {{b}});
  std::vector<EvalPoint> pts{EvalPoint::standard(x0, t0, 1)};
  auto [val, grad] = net::grad_params(
      p, pts, [](ad::Tape&, std::span<const net::JetVar> jets) {
        return square(jets[0].u);
      });
  const double u = w1 * x0 + w2 * t0 + b;
  CHECK(val == doctest::Approx(u * u).epsilon(1e-14));
  CHECK(grad.weight(0)[0] == doctest::Approx(2 * u * x0).epsilon(1e-13));
  CHECK(grad.weight(0)[1] == doctest::Approx(2 * u * t0).epsilon(1e-13));
  CHECK(grad.bias(0)[0] == doctest::Approx(2 * u).epsilon(1e-13));
}

TEST_CASE("grad_params matches finite differences over parameters") {
  // loss = mean over 5 points of (du_dt - 0.1 d2u_dx2)^2; every gradient
  // entry checked against a central difference of the loss.
  auto p = net::init_params({2, 10, 10, 1}, 31);
  Xoshiro256ss rng(32);
  std::vector<EvalPoint> pts;
  for (int i = 0; i < 5; ++i)
    pts.push_back(EvalPoint::standard(rng.uniform(0.1, 0.9),
                                      rng.uniform(0.1, 0.9), 4));
  const net::LossBuilder builder = [](ad::Tape& t,
                                      std::span<const net::JetVar> jets) {
    ad::Var sum = t.constant(0.0);
    for (const auto& j : jets) sum = sum + square(j.du_dt - 0.1 * j.d2u_dx2);
    return sum * (1.0 / static_cast<double>(jets.size()));
  };
  auto [val, grad] = net::grad_params(p, pts, builder);

  auto loss_at = [&](const NetworkParams& q) {
    double sum = 0.0;
    for (const auto& pt : pts) {
      const Jet j = net::forward_jet(q, pt.input[0], pt.input[1]);
      const double r = j.du_dt - 0.1 * j.d2u_dx2;
      sum += r * r;
    }
    return sum / static_cast<double>(pts.size());
  };
  CHECK(val == doctest::Approx(loss_at(p)).epsilon(1e-12));

  const double h = 1e-6;
  NetworkParams q = p;
  for (std::size_t i = 0; i < q.data.size(); ++i) {
    const double save = q.data[i];
    q.data[i] = save + h;
    const double lp = loss_at(q);
    q.data[i] = save - h;
    const double lm = loss_at(q);
    q.data[i] = save;
    const double fd = (lp - lm) / (2 * h);
    CHECK(close_rel(grad.data[i], fd, 1e-6, 1e-10));
  }
}

TEST_CASE("grad_params_multi shares the forward pass across losses") {
  const auto p = net::init_params({2, 8, 1}, 77);
  std::vector<EvalPoint> pts{EvalPoint::standard(0.3, 0.6, 4),
                             EvalPoint::standard(0.9, 0.1, 4)};
  const net::LossBuilder b1 = [](ad::Tape&, std::span<const net::JetVar> j) {
    return square(j[0].u) + square(j[1].du_dx);
  };
  const net::LossBuilder b2 = [](ad::Tape&, std::span<const net::JetVar> j) {
    return square(j[1].du_dt);
  };
  const net::LossBuilder builders[2] = {b1, b2};
  const auto multi = net::grad_params_multi(p, pts, builders);
  const auto single1 = net::grad_params(p, pts, b1);
  const auto single2 = net::grad_params(p, pts, b2);
  CHECK(multi.values[0] == single1.first);
  CHECK(multi.values[1] == single2.first);
  CHECK(multi.grads[0].data == single1.second.data);
  CHECK(multi.grads[1].data == single2.second.data);
}

TEST_CASE("grad_params surfaces non-finite losses as numeric errors") {
  const auto p = net::init_params({2, 4, 1}, 9);
  std::vector<EvalPoint> pts{EvalPoint::standard(0.5, 0.5, 1)};
  CHECK_THROWS_AS(net::grad_params(p, pts,
                                   [](ad::Tape& t, std::span<const net::JetVar> j) {
                                     return j[0].u / t.constant(0.0);
                                   }),
                  NumericError);
}

TEST_CASE("checkpoint round-trip is lossless") {
  const auto p = net::init_params({2, 30, 30, 1}, 123456789ULL);
  const std::string path =
      (std::filesystem::temp_directory_path() / "mfpinn_ckpt_test.bin").string();
  net::save_checkpoint(path, p);
  const auto q = net::load_checkpoint(path);
  CHECK(q.layer_sizes == p.layer_sizes);
  CHECK(q.seed == p.seed);
  CHECK(q.data == p.data);  // bitwise
  std::filesystem::remove(path);
  CHECK_THROWS_AS(net::load_checkpoint(path), IoError);
}

TEST_CASE("evaluation is safe and identical across concurrent callers") {
  const auto p = net::init_params({2, 30, 30, 1}, 99);
  std::vector<EvalPoint> pts;
  for (int i = 0; i < 8; ++i)
    pts.push_back(EvalPoint::standard(0.1 + 0.1 * i, 0.9 - 0.1 * i, 4));
  const net::LossBuilder builder = [](ad::Tape&,
                                      std::span<const net::JetVar> jets) {
    ad::Var sum = square(jets[0].u);
    for (std::size_t i = 1; i < jets.size(); ++i)
      sum = sum + square(jets[i].du_dt - 0.2 * jets[i].d2u_dx2);
    return sum;
  };
  const auto serial = net::grad_params(p, pts, builder);

  std::vector<std::pair<double, net::Gradient>> results(4);
  std::vector<std::thread> pool;
  for (int w = 0; w < 4; ++w) {
    pool.emplace_back([&, w] {
      for (int rep = 0; rep < 16; ++rep)
        results[static_cast<std::size_t>(w)] = net::grad_params(p, pts, builder);
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& [val, grad] : results) {
    CHECK(val == serial.first);            // bitwise
    CHECK(grad.data == serial.second.data);
  }
}
