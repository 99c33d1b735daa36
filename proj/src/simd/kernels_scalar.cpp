#include "sixdgs/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sixdgs::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double max_scalar(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

double exp_shift_sum_scalar(double* x, std::size_t n, double shift) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - shift);
    sum += x[i];
  }
  return sum;
}

void scaled_residual_scalar(const double* a, const double* g, double g_mean, double* out,
                            std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * (g[i] - g_mean);
}

void silu_scalar(const double* z, double* y, double* dy, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-z[i]));
    y[i] = z[i] * s;
    dy[i] = s * (1.0 + z[i] * (1.0 - s));
  }
}

void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * lda + p];
      const double* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      Isa::Scalar,         "scalar",     dot_scalar, axpy_scalar, max_scalar,
      exp_shift_sum_scalar, scaled_residual_scalar, silu_scalar, gemm_scalar,
  };
  return table;
}

}  // namespace sixdgs::simd
