#pragma once
// Data-parallel double-precision kernels used by the scorer (MLP and
// attention). Every kernel has a scalar reference implementation; an AVX2+FMA
// variant is compiled in a separate translation unit and selected at runtime
// when the CPU supports it. SIXDGS_SIMD=scalar in the environment forces the
// reference path.

#include <cstddef>
#include <string_view>

namespace sixdgs::simd {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*max)(const double* x, std::size_t n);
  // x[i] = exp(x[i] - shift); returns the sum of the new values.
  double (*exp_shift_sum)(double* x, std::size_t n, double shift);
  // out[i] = a[i] * (g[i] - g_mean)   (softmax backward, one row)
  void (*scaled_residual)(const double* a, const double* g, double g_mean, double* out,
                          std::size_t n);
  // y = z * sigmoid(z), dy = d y / d z
  void (*silu)(const double* z, double* y, double* dy, std::size_t n);
  // C(m x n) += A(m x k) * B(k x n), all row-major with leading dimensions.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled into this build.
const KernelTable* avx2_kernels();

bool cpu_supports(Isa isa);

// Table chosen for this process. The first call resolves the choice from the
// CPU and the SIXDGS_SIMD environment variable.
const KernelTable& active();

// Pin the active table (tests and benchmarks). Throws if the ISA is not
// available on this machine.
void select(Isa isa);

std::string_view isa_name(Isa isa);

}  // namespace sixdgs::simd
