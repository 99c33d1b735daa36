#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "sixdgs/simd/kernels.hpp"

namespace sixdgs::simd {

#if !defined(SIXDGS_HAVE_AVX2)
const KernelTable* avx2_kernels() { return nullptr; }
#endif

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(SIXDGS_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return avx2_kernels() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

namespace {

const KernelTable* resolve_default() {
  if (const char* env = std::getenv("SIXDGS_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_kernels();
  }
  if (cpu_supports(Isa::Avx2)) return avx2_kernels();
  return &scalar_kernels();
}

std::atomic<const KernelTable*> g_active{nullptr};

}  // namespace

const KernelTable& active() {
  const KernelTable* table = g_active.load(std::memory_order_acquire);
  if (table == nullptr) {
    table = resolve_default();
    g_active.store(table, std::memory_order_release);
  }
  return *table;
}

void select(Isa isa) {
  if (!cpu_supports(isa)) throw std::runtime_error("ISA not available: " + std::string(isa_name(isa)));
  g_active.store(isa == Isa::Avx2 ? avx2_kernels() : &scalar_kernels(), std::memory_order_release);
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

}  // namespace sixdgs::simd
