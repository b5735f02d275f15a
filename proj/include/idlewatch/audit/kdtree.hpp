#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace idlewatch::audit {

/// Static 2-d tree over (x, y) points for nearest-point queries.
///
/// Distances are squared Euclidean in the input units. Leaves hold up to
/// kLeafSize points in structure-of-arrays order and are scanned with the
/// active SIMD kernel. Pruning only skips subtrees whose splitting plane is
/// at least as far as the best distance found, so results are bit-identical
/// to a linear scan evaluating (x-qx)^2 + (y-qy)^2 per point.
class KdTree {
 public:
  static constexpr std::size_t kLeafSize = 16;

  KdTree() = default;
  explicit KdTree(std::vector<std::pair<double, double>> points);

  std::size_t size() const { return xs_.size(); }
  bool empty() const { return xs_.empty(); }

  /// Minimum squared distance to any point; +inf for an empty tree.
  double nearest_sq(double qx, double qy) const;

 private:
  struct Node {
    // Leaf when left < 0: points [begin, end).
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::uint8_t axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::vector<std::pair<double, double>>& pts, std::size_t begin, std::size_t end,
                     int depth);
  void search(std::int32_t node, double qx, double qy, double& best) const;

  std::vector<Node> nodes_;
  std::vector<double> xs_;
  std::vector<double> ys_;
};

}  // namespace idlewatch::audit
