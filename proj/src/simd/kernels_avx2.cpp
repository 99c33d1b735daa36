// Compiled with -mavx2 -mfma. Nothing in here may run unless
// cpu_supports(Isa::Avx2) returned true.
#include "sixdgs/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace sixdgs::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// exp(x) for 4 doubles. Range reduction x = n*ln2 + r with |r| <= ln2/2 and a
// degree-13 Taylor polynomial; relative error ~1 ulp. Inputs below -708 flush
// to zero, inputs above 709 saturate to +inf.
inline __m256d exp4(__m256d x) {
  const __m256d lo_bound = _mm256_set1_pd(-708.0);
  const __m256d hi_bound = _mm256_set1_pd(709.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo_bound, _CMP_LT_OQ);
  const __m256d overflow = _mm256_cmp_pd(x, hi_bound, _CMP_GT_OQ);
  x = _mm256_max_pd(_mm256_min_pd(x, hi_bound), lo_bound);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93147180369123816490e-01), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.90821492927058770002e-10), r);

  static constexpr double kInvFact[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
      1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,      1.0 / 720.0,
      1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,         0.5,
      1.0,                1.0};
  __m256d p = _mm256_set1_pd(kInvFact[0]);
  for (int i = 1; i < 14; ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[i]));

  // 2^n: place (n + 1023) in the exponent field.
  const __m256d biased = _mm256_add_pd(n, _mm256_set1_pd(1023.0 + 4503599627370496.0));
  const __m256i bits = _mm256_slli_epi64(_mm256_castpd_si256(biased), 52);
  __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));

  result = _mm256_andnot_pd(underflow, result);
  result = _mm256_blendv_pd(result, _mm256_set1_pd(std::numeric_limits<double>::infinity()),
                            overflow);
  return result;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double sum = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double max_avx2(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  if (n >= 4) {
    __m256d vm = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, vm);
    m = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
  }
  for (; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

double exp_shift_sum_avx2(double* x, std::size_t n, double shift) {
  const __m256d vs = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d e = exp4(_mm256_sub_pd(_mm256_loadu_pd(x + i), vs));
    _mm256_storeu_pd(x + i, e);
    acc = _mm256_add_pd(acc, e);
  }
  double sum = hsum(acc);
  for (; i < n; ++i) {
    x[i] = std::exp(x[i] - shift);
    sum += x[i];
  }
  return sum;
}

void scaled_residual_avx2(const double* a, const double* g, double g_mean, double* out,
                          std::size_t n) {
  const __m256d vm = _mm256_set1_pd(g_mean);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_sub_pd(_mm256_loadu_pd(g + i), vm)));
  for (; i < n; ++i) out[i] = a[i] * (g[i] - g_mean);
}

void silu_avx2(const double* z, double* y, double* dy, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d sign = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vz = _mm256_loadu_pd(z + i);
    const __m256d s = _mm256_div_pd(one, _mm256_add_pd(one, exp4(_mm256_xor_pd(vz, sign))));
    _mm256_storeu_pd(y + i, _mm256_mul_pd(vz, s));
    _mm256_storeu_pd(dy + i,
                     _mm256_mul_pd(s, _mm256_fmadd_pd(vz, _mm256_sub_pd(one, s), one)));
  }
  for (; i < n; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-z[i]));
    y[i] = z[i] * s;
    dy[i] = s * (1.0 + z[i] * (1.0 - s));
  }
}

// 4x8 register tile: rows i..i+3, columns j..j+7.
inline void gemm_tile_4x8(std::size_t k, const double* a, std::size_t lda, const double* b,
                          std::size_t ldb, double* c, std::size_t ldc) {
  __m256d c00 = _mm256_loadu_pd(c), c01 = _mm256_loadu_pd(c + 4);
  __m256d c10 = _mm256_loadu_pd(c + ldc), c11 = _mm256_loadu_pd(c + ldc + 4);
  __m256d c20 = _mm256_loadu_pd(c + 2 * ldc), c21 = _mm256_loadu_pd(c + 2 * ldc + 4);
  __m256d c30 = _mm256_loadu_pd(c + 3 * ldc), c31 = _mm256_loadu_pd(c + 3 * ldc + 4);
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * ldb);
    const __m256d b1 = _mm256_loadu_pd(b + p * ldb + 4);
    __m256d av = _mm256_broadcast_sd(a + p);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a + lda + p);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a + 2 * lda + p);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a + 3 * lda + p);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  _mm256_storeu_pd(c, c00);
  _mm256_storeu_pd(c + 4, c01);
  _mm256_storeu_pd(c + ldc, c10);
  _mm256_storeu_pd(c + ldc + 4, c11);
  _mm256_storeu_pd(c + 2 * ldc, c20);
  _mm256_storeu_pd(c + 2 * ldc + 4, c21);
  _mm256_storeu_pd(c + 3 * ldc, c30);
  _mm256_storeu_pd(c + 3 * ldc + 4, c31);
}

// One output row over columns [j0, n): 4-wide then scalar.
inline void gemm_row_tail(std::size_t j0, std::size_t n, std::size_t k, const double* arow,
                          const double* b, std::size_t ldb, double* crow) {
  std::size_t j = j0;
  for (; j + 4 <= n; j += 4) {
    __m256d acc = _mm256_loadu_pd(crow + j);
    for (std::size_t p = 0; p < k; ++p)
      acc = _mm256_fmadd_pd(_mm256_broadcast_sd(arow + p), _mm256_loadu_pd(b + p * ldb + j), acc);
    _mm256_storeu_pd(crow + j, acc);
  }
  for (; j < n; ++j) {
    double acc = crow[j];
    for (std::size_t p = 0; p < k; ++p) acc = std::fma(arow[p], b[p * ldb + j], acc);
    crow[j] = acc;
  }
}

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  const std::size_t n8 = n - n % 8;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    for (std::size_t j = 0; j < n8; j += 8)
      gemm_tile_4x8(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    if (n8 < n)
      for (std::size_t r = 0; r < 4; ++r)
        gemm_row_tail(n8, n, k, a + (i + r) * lda, b, ldb, c + (i + r) * ldc);
  }
  for (; i < m; ++i) gemm_row_tail(0, n, k, a + i * lda, b, ldb, c + i * ldc);
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{
      Isa::Avx2,          "avx2",     dot_avx2,  axpy_avx2, max_avx2,
      exp_shift_sum_avx2, scaled_residual_avx2, silu_avx2, gemm_avx2,
  };
  return &table;
}

}  // namespace sixdgs::simd
