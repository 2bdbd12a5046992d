#include "mfpinn/kernels.hpp"

#include <cmath>
#include <cstdlib>

// Reference kernels. Plain sequential loops with a fixed accumulation
// order; every other backend is tested against these.

namespace mfpinn::kernels {
namespace {

void s_matvec_bias(const double* W, const double* x, const double* b,
                   double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = W + static_cast<std::size_t>(r) * cols;
    double acc = b[r];
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void s_matvec(const double* W, const double* x, double* y, int rows,
              int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = W + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void s_matvec_t_acc(const double* W, const double* y, double* x, int rows,
                    int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = W + static_cast<std::size_t>(r) * cols;
    const double yr = y[r];
    for (int c = 0; c < cols; ++c) x[c] += yr * row[c];
  }
}

void s_ger_acc(double* G, const double* y, const double* x, int rows,
               int cols) {
  for (int r = 0; r < rows; ++r) {
    double* row = G + static_cast<std::size_t>(r) * cols;
    const double yr = y[r];
    for (int c = 0; c < cols; ++c) row[c] += yr * x[c];
  }
}

void s_axpy(double a, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

double s_dot(const double* x, const double* y, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double s_sum_abs(const double* x, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::fabs(x[i]);
  return acc;
}

double s_max_abs(const double* x, int n) {
  double m = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = std::fabs(x[i]);
    if (a > m) m = a;
  }
  return m;
}

void s_adam_update(double* theta, double* m, double* v, const double* g, int n,
                   double lr, double beta1, double beta2, double eps,
                   double bias1, double bias2) {
  for (int i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const Backend& scalar_backend() {
  static const Backend k{"scalar",    s_matvec_bias, s_matvec, s_matvec_t_acc,
                         s_ger_acc,   s_axpy,        s_dot,    s_sum_abs,
                         s_max_abs,   s_adam_update};
  return k;
}

}  // namespace mfpinn::kernels
