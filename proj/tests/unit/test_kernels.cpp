#include <doctest.h>

#include <cmath>
#include <vector>

#include "mfpinn/kernels.hpp"
#include "mfpinn/rng.hpp"

using namespace mfpinn;
namespace k = mfpinn::kernels;

namespace {

std::vector<double> random_vec(Xoshiro256ss& rng, int n, double lo = -1.0,
                               double hi = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Naive loops, written independently of the backend implementations.
void ref_matvec_bias(const std::vector<double>& W, const std::vector<double>& x,
                     const std::vector<double>& b, std::vector<double>& y,
                     int rows, int cols) {
  y.assign(static_cast<std::size_t>(rows), 0.0);
  for (int r = 0; r < rows; ++r) {
    double acc = b.empty() ? 0.0 : b[r];
    for (int c = 0; c < cols; ++c)
      acc += W[static_cast<std::size_t>(r) * cols + c] * x[c];
    y[r] = acc;
  }
}

struct BackendGuard {
  BackendGuard() : saved(k::active().name) {}
  ~BackendGuard() { k::force(saved); }
  std::string saved;
};

constexpr double kTol = 1e-12;

double scaled_err(double a, double b, double scale) {
  return std::fabs(a - b) / std::max(scale, 1.0);
}

}  // namespace

TEST_CASE("scalar kernels match naive reference loops") {
  Xoshiro256ss rng(11);
  const auto& be = k::scalar_backend();
  for (int rows : {1, 2, 3, 5, 30, 33}) {
    for (int cols : {1, 2, 4, 7, 30, 32}) {
      const auto W = random_vec(rng, rows * cols);
      const auto x = random_vec(rng, cols);
      const auto b = random_vec(rng, rows);
      std::vector<double> want, got(static_cast<std::size_t>(rows));
      ref_matvec_bias(W, x, b, want, rows, cols);
      be.matvec_bias(W.data(), x.data(), b.data(), got.data(), rows, cols);
      for (int r = 0; r < rows; ++r)
        CHECK(got[r] == doctest::Approx(want[r]).epsilon(1e-14));
    }
  }
}

TEST_CASE("every available backend agrees with scalar") {
  BackendGuard guard;
  Xoshiro256ss rng(22);
  for (const auto& name : k::available()) {
    CAPTURE(name);
    const auto& be = name == "scalar" ? k::scalar_backend() : k::avx2_backend();
    for (int rows : {1, 3, 4, 5, 8, 30, 31, 64}) {
      const int cols = (rows * 7) % 37 + 1;
      const auto W = random_vec(rng, rows * cols);
      const auto x = random_vec(rng, cols);
      const auto b = random_vec(rng, rows);
      const auto y = random_vec(rng, rows);

      std::vector<double> y_s(static_cast<std::size_t>(rows)),
          y_v(static_cast<std::size_t>(rows));
      k::scalar_backend().matvec_bias(W.data(), x.data(), b.data(), y_s.data(),
                                      rows, cols);
      be.matvec_bias(W.data(), x.data(), b.data(), y_v.data(), rows, cols);
      for (int r = 0; r < rows; ++r)
        CHECK(scaled_err(y_s[r], y_v[r], std::fabs(y_s[r])) < kTol);

      k::scalar_backend().matvec(W.data(), x.data(), y_s.data(), rows, cols);
      be.matvec(W.data(), x.data(), y_v.data(), rows, cols);
      for (int r = 0; r < rows; ++r)
        CHECK(scaled_err(y_s[r], y_v[r], std::fabs(y_s[r])) < kTol);

      std::vector<double> xt_s(static_cast<std::size_t>(cols), 0.25),
          xt_v(static_cast<std::size_t>(cols), 0.25);
      k::scalar_backend().matvec_t_acc(W.data(), y.data(), xt_s.data(), rows,
                                       cols);
      be.matvec_t_acc(W.data(), y.data(), xt_v.data(), rows, cols);
      for (int c = 0; c < cols; ++c)
        CHECK(scaled_err(xt_s[c], xt_v[c], std::fabs(xt_s[c])) < kTol);

      std::vector<double> G_s(W.size(), 0.5), G_v(W.size(), 0.5);
      k::scalar_backend().ger_acc(G_s.data(), y.data(), x.data(), rows, cols);
      be.ger_acc(G_v.data(), y.data(), x.data(), rows, cols);
      for (std::size_t i = 0; i < W.size(); ++i)
        CHECK(scaled_err(G_s[i], G_v[i], std::fabs(G_s[i])) < kTol);

      const int n = rows * cols;
      auto a1 = random_vec(rng, n);
      auto a2 = a1;
      k::scalar_backend().axpy(0.7, W.data(), a1.data(), n);
      be.axpy(0.7, W.data(), a2.data(), n);
      for (int i = 0; i < n; ++i)
        CHECK(scaled_err(a1[i], a2[i], std::fabs(a1[i])) < kTol);

      const double d_s = k::scalar_backend().dot(W.data(), W.data(), n);
      const double d_v = be.dot(W.data(), W.data(), n);
      CHECK(scaled_err(d_s, d_v, std::fabs(d_s)) < kTol);

      CHECK(scaled_err(k::scalar_backend().sum_abs(W.data(), n),
                       be.sum_abs(W.data(), n), n) < kTol);
      CHECK(k::scalar_backend().max_abs(W.data(), n) ==
            be.max_abs(W.data(), n));
    }
  }
}

TEST_CASE("adam update agrees across backends") {
  BackendGuard guard;
  Xoshiro256ss rng(33);
  const int n = 101;
  const auto g = random_vec(rng, n);
  const auto th0 = random_vec(rng, n);
  const auto m0 = random_vec(rng, n, 0.0, 0.1);
  const auto v0 = random_vec(rng, n, 0.0, 0.1);
  std::vector<double> th_ref, m_ref, v_ref;
  bool first = true;
  for (const auto& name : k::available()) {
    auto th = th0;
    auto m = m0;
    auto v = v0;
    const auto& be = name == "scalar" ? k::scalar_backend() : k::avx2_backend();
    be.adam_update(th.data(), m.data(), v.data(), g.data(), n, 1e-3, 0.9,
                   0.999, 1e-8, 0.1, 0.001);
    if (first) {
      th_ref = th;
      m_ref = m;
      v_ref = v;
      first = false;
    } else {
      for (int i = 0; i < n; ++i) {
        CHECK(th[i] == doctest::Approx(th_ref[i]).epsilon(1e-13));
        CHECK(m[i] == doctest::Approx(m_ref[i]).epsilon(1e-13));
        CHECK(v[i] == doctest::Approx(v_ref[i]).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("edge sizes: zero-length inputs are no-ops") {
  for (const auto& name : k::available()) {
    const auto& be = name == "scalar" ? k::scalar_backend() : k::avx2_backend();
    double y = 7.0;
    be.axpy(2.0, &y, &y, 0);
    CHECK(y == 7.0);
    CHECK(be.dot(&y, &y, 0) == 0.0);
    CHECK(be.sum_abs(&y, 0) == 0.0);
    CHECK(be.max_abs(&y, 0) == 0.0);
  }
}

TEST_CASE("forcing a backend switches active()") {
  BackendGuard guard;
  k::force("scalar");
  CHECK(std::string(k::active().name) == "scalar");
  CHECK_THROWS(k::force("no-such-backend"));
  if (k::avx2_supported()) {
    k::force("avx2");
    CHECK(std::string(k::active().name) == "avx2");
  }
}
