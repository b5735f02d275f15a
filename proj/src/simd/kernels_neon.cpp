#include <arm_neon.h>

#include <limits>

#include "idlewatch/simd/geo_kernels.hpp"

namespace idlewatch::simd {
namespace {

double min_sq_distance_neon(double qx, double qy, const double* xs, const double* ys,
                            std::size_t n) {
  const float64x2_t vqx = vdupq_n_f64(qx);
  const float64x2_t vqy = vdupq_n_f64(qy);
  float64x2_t best = vdupq_n_f64(std::numeric_limits<double>::infinity());

  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t dx = vsubq_f64(vld1q_f64(xs + i), vqx);
    const float64x2_t dy = vsubq_f64(vld1q_f64(ys + i), vqy);
    // Separate multiply and add; a fused vfmaq would round differently.
    const float64x2_t d = vaddq_f64(vmulq_f64(dx, dx), vmulq_f64(dy, dy));
    best = vminq_f64(best, d);
  }
  double result = vminvq_f64(best);
  for (; i < n; ++i) {
    const double dx = xs[i] - qx;
    const double dy = ys[i] - qy;
    const double d = dx * dx + dy * dy;
    if (d < result) result = d;
  }
  return result;
}

BoundCounts count_bounds_neon(const double* values, std::size_t n, double lo, double hi) {
  const float64x2_t vzero = vdupq_n_f64(0.0);
  const float64x2_t vlo = vdupq_n_f64(lo);
  const float64x2_t vhi = vdupq_n_f64(hi);
  uint64x2_t zero_acc = vdupq_n_u64(0);
  uint64x2_t above_acc = vdupq_n_u64(0);
  uint64x2_t below_acc = vdupq_n_u64(0);

  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t v = vld1q_f64(values + i);
    // Comparison lanes are all-ones (== -1 as signed); subtracting adds one.
    zero_acc = vsubq_u64(zero_acc, vceqq_f64(v, vzero));
    above_acc = vsubq_u64(above_acc, vcgtq_f64(v, vhi));
    below_acc = vsubq_u64(below_acc, vcltq_f64(v, vlo));
  }
  BoundCounts counts;
  counts.zero = vaddvq_u64(zero_acc);
  counts.above = vaddvq_u64(above_acc);
  counts.below = vaddvq_u64(below_acc);
  for (; i < n; ++i) {
    const double v = values[i];
    counts.zero += (v == 0.0);
    counts.above += (v > hi);
    counts.below += (v < lo);
  }
  return counts;
}

std::size_t count_at_most_neon(const double* values, std::size_t n, double threshold) {
  const float64x2_t vt = vdupq_n_f64(threshold);
  uint64x2_t acc = vdupq_n_u64(0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vsubq_u64(acc, vcleq_f64(vld1q_f64(values + i), vt));
  std::size_t count = vaddvq_u64(acc);
  for (; i < n; ++i) count += (values[i] <= threshold);
  return count;
}

}  // namespace

namespace detail {
const KernelTable& neon_table() {
  static const KernelTable table{Isa::Neon, &min_sq_distance_neon, &count_bounds_neon,
                                 &count_at_most_neon};
  return table;
}
}  // namespace detail

}  // namespace idlewatch::simd
