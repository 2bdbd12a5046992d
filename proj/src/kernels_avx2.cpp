#include "mfpinn/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

// AVX2/FMA variants of the dense kernels. 4-wide double lanes, unaligned
// loads, scalar tails. Accumulation order differs from the scalar backend
// (per-row 4-lane partial sums), so cross-backend comparisons are made to a
// tight relative tolerance rather than bitwise.

namespace mfpinn::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

inline double row_dot(const double* row, const double* x, int cols) {
  __m256d acc = _mm256_setzero_pd();
  int c = 0;
  for (; c + 4 <= cols; c += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(row + c), _mm256_loadu_pd(x + c),
                          acc);
  }
  double total = hsum(acc);
  for (; c < cols; ++c) total += row[c] * x[c];
  return total;
}

void v_matvec_bias(const double* W, const double* x, const double* b,
                   double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    y[r] = b[r] + row_dot(W + static_cast<std::size_t>(r) * cols, x, cols);
  }
}

void v_matvec(const double* W, const double* x, double* y, int rows,
              int cols) {
  for (int r = 0; r < rows; ++r) {
    y[r] = row_dot(W + static_cast<std::size_t>(r) * cols, x, cols);
  }
}

void v_matvec_t_acc(const double* W, const double* y, double* x, int rows,
                    int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = W + static_cast<std::size_t>(r) * cols;
    const __m256d yr = _mm256_set1_pd(y[r]);
    int c = 0;
    for (; c + 4 <= cols; c += 4) {
      __m256d xv = _mm256_loadu_pd(x + c);
      xv = _mm256_fmadd_pd(yr, _mm256_loadu_pd(row + c), xv);
      _mm256_storeu_pd(x + c, xv);
    }
    const double ys = y[r];
    for (; c < cols; ++c) x[c] += ys * row[c];
  }
}

void v_ger_acc(double* G, const double* y, const double* x, int rows,
               int cols) {
  for (int r = 0; r < rows; ++r) {
    double* row = G + static_cast<std::size_t>(r) * cols;
    const __m256d yr = _mm256_set1_pd(y[r]);
    int c = 0;
    for (; c + 4 <= cols; c += 4) {
      __m256d g = _mm256_loadu_pd(row + c);
      g = _mm256_fmadd_pd(yr, _mm256_loadu_pd(x + c), g);
      _mm256_storeu_pd(row + c, g);
    }
    const double ys = y[r];
    for (; c < cols; ++c) row[c] += ys * x[c];
  }
}

void v_axpy(double a, const double* x, double* y, int n) {
  const __m256d av = _mm256_set1_pd(a);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double v_dot(const double* x, const double* y, int n) {
  __m256d acc = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += x[i] * y[i];
  return total;
}

double v_sum_abs(const double* x, int n) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7FFFFFFFFFFFFFFFLL));
  __m256d acc = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_and_pd(mask, _mm256_loadu_pd(x + i)));
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += std::fabs(x[i]);
  return total;
}

double v_max_abs(const double* x, int n) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7FFFFFFFFFFFFFFFLL));
  __m256d acc = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_max_pd(acc, _mm256_and_pd(mask, _mm256_loadu_pd(x + i)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double m = lanes[0];
  for (int k = 1; k < 4; ++k)
    if (lanes[k] > m) m = lanes[k];
  for (; i < n; ++i) {
    const double a = std::fabs(x[i]);
    if (a > m) m = a;
  }
  return m;
}

void v_adam_update(double* theta, double* m, double* v, const double* g, int n,
                   double lr, double beta1, double beta2, double eps,
                   double bias1, double bias2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d ob1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d ob2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d inv1 = _mm256_set1_pd(1.0 / bias1);
  const __m256d inv2 = _mm256_set1_pd(1.0 / bias2);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    mv = _mm256_fmadd_pd(ob1, gv, _mm256_mul_pd(b1, mv));
    vv = _mm256_fmadd_pd(ob2, _mm256_mul_pd(gv, gv), _mm256_mul_pd(b2, vv));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(mv, inv1);
    const __m256d vhat = _mm256_mul_pd(vv, inv2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
    __m256d th = _mm256_loadu_pd(theta + i);
    th = _mm256_sub_pd(th, _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom));
    _mm256_storeu_pd(theta + i, th);
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    theta[i] -= lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + eps);
  }
}

}  // namespace

bool avx2_supported() {
#if defined(__GNUC__) || defined(__clang__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Backend& avx2_backend() {
  static const Backend k{"avx2",    v_matvec_bias, v_matvec, v_matvec_t_acc,
                         v_ger_acc, v_axpy,        v_dot,    v_sum_abs,
                         v_max_abs, v_adam_update};
  return k;
}

}  // namespace mfpinn::kernels

#else  // non-x86: scalar only

namespace mfpinn::kernels {
bool avx2_supported() { return false; }
const Backend& avx2_backend() { return scalar_backend(); }
}  // namespace mfpinn::kernels

#endif
