#pragma once

#include <string>
#include <vector>

namespace mfpinn::kernels {

// Dense double-precision primitives behind the network and optimizer hot
// loops. Scalar implementations are the reference semantics; SIMD variants
// (AVX2/FMA on x86-64) are selected at runtime and equivalence-tested
// against the scalar ones. Within one process the selected backend never
// changes, so repeated runs are bit-identical.
struct Backend {
  const char* name;

  // y = W x + b, W row-major (rows x cols).
  void (*matvec_bias)(const double* W, const double* x, const double* b,
                      double* y, int rows, int cols);
  // y = W x.
  void (*matvec)(const double* W, const double* x, double* y, int rows,
                 int cols);
  // x += W^T y. Accumulates row by row: x += y[r] * W[r,:].
  void (*matvec_t_acc)(const double* W, const double* y, double* x, int rows,
                       int cols);
  // G += y (x)  x^T, outer-product accumulation (rows x cols).
  void (*ger_acc)(double* G, const double* y, const double* x, int rows,
                  int cols);
  // y += a * x.
  void (*axpy)(double a, const double* x, double* y, int n);
  double (*dot)(const double* x, const double* y, int n);
  double (*sum_abs)(const double* x, int n);
  double (*max_abs)(const double* x, int n);
  // One Adam step on flat arrays; bias1/bias2 are the 1-beta^t corrections.
  void (*adam_update)(double* theta, double* m, double* v, const double* g,
                      int n, double lr, double beta1, double beta2, double eps,
                      double bias1, double bias2);
};

const Backend& scalar_backend();
bool avx2_supported();
const Backend& avx2_backend();  // valid only if avx2_supported()

// Runtime-selected backend. Resolution order: explicit force(), the
// MFPINN_KERNELS environment variable ("scalar"/"avx2"), best supported.
const Backend& active();
void force(const std::string& name);  // throws on unknown/unsupported
std::vector<std::string> available();

}  // namespace mfpinn::kernels
