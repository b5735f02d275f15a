#include <cstdlib>
#include <string>

#include "idlewatch/simd/geo_kernels.hpp"

namespace idlewatch::simd {

namespace detail {
#if defined(IDLEWATCH_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(IDLEWATCH_HAVE_NEON)
const KernelTable& neon_table();
#endif
}  // namespace detail

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

const KernelTable* avx2_kernels() {
#if defined(IDLEWATCH_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &detail::avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() {
#if defined(IDLEWATCH_HAVE_NEON)
  // Advanced SIMD is mandatory on AArch64.
  return &detail::neon_table();
#else
  return nullptr;
#endif
}

std::vector<const KernelTable*> available_kernels() {
  std::vector<const KernelTable*> out{&scalar_kernels()};
  if (auto* t = avx2_kernels()) out.push_back(t);
  if (auto* t = neon_kernels()) out.push_back(t);
  return out;
}

namespace {

const KernelTable& select_kernels() {
  const char* forced = std::getenv("IDLEWATCH_SIMD");
  if (forced) {
    const std::string choice(forced);
    if (choice == "scalar") return scalar_kernels();
    if (choice == "avx2" && avx2_kernels()) return *avx2_kernels();
    if (choice == "neon" && neon_kernels()) return *neon_kernels();
    return scalar_kernels();
  }
  if (auto* t = avx2_kernels()) return *t;
  if (auto* t = neon_kernels()) return *t;
  return scalar_kernels();
}

}  // namespace

const KernelTable& active_kernels() {
  static const KernelTable& table = select_kernels();
  return table;
}

}  // namespace idlewatch::simd
