#include <limits>

#include "idlewatch/simd/geo_kernels.hpp"

namespace idlewatch::simd {
namespace {

double min_sq_distance_scalar(double qx, double qy, const double* xs, const double* ys,
                              std::size_t n) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - qx;
    const double dy = ys[i] - qy;
    const double d = dx * dx + dy * dy;
    if (d < best) best = d;
  }
  return best;
}

BoundCounts count_bounds_scalar(const double* values, std::size_t n, double lo, double hi) {
  BoundCounts counts;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = values[i];
    counts.zero += (v == 0.0);
    counts.above += (v > hi);
    counts.below += (v < lo);
  }
  return counts;
}

std::size_t count_at_most_scalar(const double* values, std::size_t n, double threshold) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) count += (values[i] <= threshold);
  return count;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::Scalar, &min_sq_distance_scalar, &count_bounds_scalar,
                                 &count_at_most_scalar};
  return table;
}

}  // namespace idlewatch::simd
