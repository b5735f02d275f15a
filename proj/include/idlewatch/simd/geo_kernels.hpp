#pragma once

// Data-parallel inner loops of the audit battery. Every kernel has a scalar
// reference implementation; the vector variants return bit-identical results
// (tests/unit/simd_kernels_test.cpp).

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace idlewatch::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);

struct BoundCounts {
  std::size_t zero = 0;
  std::size_t above = 0;  // value > hi
  std::size_t below = 0;  // value < lo

  bool operator==(const BoundCounts&) const = default;
};

/// Function table for one instruction set.
struct KernelTable {
  Isa isa;
  /// min over i of (xs[i]-qx)^2 + (ys[i]-qy)^2; +inf when n == 0.
  double (*min_sq_distance)(double qx, double qy, const double* xs, const double* ys, std::size_t n);
  /// Exact-zero, above-hi and below-lo counts. NaN lands in no bucket.
  BoundCounts (*count_bounds)(const double* values, std::size_t n, double lo, double hi);
  /// Number of values <= threshold.
  std::size_t (*count_at_most)(const double* values, std::size_t n, double threshold);
};

const KernelTable& scalar_kernels();
/// Null when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

/// Variants usable on this machine, scalar first.
std::vector<const KernelTable*> available_kernels();

/// Best available variant. IDLEWATCH_SIMD=scalar|avx2|neon in the
/// environment forces a choice (falling back to scalar if unavailable).
const KernelTable& active_kernels();

inline double min_sq_distance(double qx, double qy, std::span<const double> xs,
                              std::span<const double> ys) {
  return active_kernels().min_sq_distance(qx, qy, xs.data(), ys.data(),
                                          xs.size() < ys.size() ? xs.size() : ys.size());
}

inline BoundCounts count_bounds(std::span<const double> values, double lo, double hi) {
  return active_kernels().count_bounds(values.data(), values.size(), lo, hi);
}

inline std::size_t count_at_most(std::span<const double> values, double threshold) {
  return active_kernels().count_at_most(values.data(), values.size(), threshold);
}

}  // namespace idlewatch::simd
