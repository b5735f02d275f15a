// Built with -mavx2 and without FMA; squared distances round exactly like the
// scalar loop.

#include <immintrin.h>

#include <limits>

#include "idlewatch/simd/geo_kernels.hpp"

namespace idlewatch::simd {
namespace {

double min_sq_distance_avx2(double qx, double qy, const double* xs, const double* ys,
                            std::size_t n) {
  const __m256d vqx = _mm256_set1_pd(qx);
  const __m256d vqy = _mm256_set1_pd(qy);
  __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), vqx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), vqy);
    const __m256d d = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
    best = _mm256_min_pd(best, d);
  }

  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, best);
  double result = lanes[0];
  for (int k = 1; k < 4; ++k) {
    if (lanes[k] < result) result = lanes[k];
  }
  for (; i < n; ++i) {
    const double dx = xs[i] - qx;
    const double dy = ys[i] - qy;
    const double d = dx * dx + dy * dy;
    if (d < result) result = d;
  }
  return result;
}

BoundCounts count_bounds_avx2(const double* values, std::size_t n, double lo, double hi) {
  const __m256d vzero = _mm256_setzero_pd();
  const __m256d vlo = _mm256_set1_pd(lo);
  const __m256d vhi = _mm256_set1_pd(hi);

  BoundCounts counts;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(values + i);
    const int zero_mask = _mm256_movemask_pd(_mm256_cmp_pd(v, vzero, _CMP_EQ_OQ));
    const int above_mask = _mm256_movemask_pd(_mm256_cmp_pd(v, vhi, _CMP_GT_OQ));
    const int below_mask = _mm256_movemask_pd(_mm256_cmp_pd(v, vlo, _CMP_LT_OQ));
    counts.zero += static_cast<std::size_t>(__builtin_popcount(zero_mask));
    counts.above += static_cast<std::size_t>(__builtin_popcount(above_mask));
    counts.below += static_cast<std::size_t>(__builtin_popcount(below_mask));
  }
  for (; i < n; ++i) {
    const double v = values[i];
    counts.zero += (v == 0.0);
    counts.above += (v > hi);
    counts.below += (v < lo);
  }
  return counts;
}

std::size_t count_at_most_avx2(const double* values, std::size_t n, double threshold) {
  const __m256d vt = _mm256_set1_pd(threshold);
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(values + i);
    count += static_cast<std::size_t>(
        __builtin_popcount(_mm256_movemask_pd(_mm256_cmp_pd(v, vt, _CMP_LE_OQ))));
  }
  for (; i < n; ++i) count += (values[i] <= threshold);
  return count;
}

}  // namespace

namespace detail {
const KernelTable& avx2_table() {
  static const KernelTable table{Isa::Avx2, &min_sq_distance_avx2, &count_bounds_avx2,
                                 &count_at_most_avx2};
  return table;
}
}  // namespace detail

}  // namespace idlewatch::simd
