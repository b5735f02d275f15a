#include "idlewatch/audit/kdtree.hpp"

#include <algorithm>
#include <limits>

#include "idlewatch/simd/geo_kernels.hpp"

namespace idlewatch::audit {

KdTree::KdTree(std::vector<std::pair<double, double>> points) {
  if (points.empty()) return;
  nodes_.reserve(2 * (points.size() / kLeafSize + 1));
  build(points, 0, points.size(), 0);
  xs_.reserve(points.size());
  ys_.reserve(points.size());
  for (const auto& [x, y] : points) {
    xs_.push_back(x);
    ys_.push_back(y);
  }
}

std::int32_t KdTree::build(std::vector<std::pair<double, double>>& pts, std::size_t begin,
                           std::size_t end, int depth) {
  const auto index = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    nodes_[index].begin = static_cast<std::uint32_t>(begin);
    nodes_[index].end = static_cast<std::uint32_t>(end);
    return index;
  }

  const std::uint8_t axis = depth % 2;
  const std::size_t mid = begin + (end - begin) / 2;
  auto key = [axis](const std::pair<double, double>& p) { return axis == 0 ? p.first : p.second; };
  std::nth_element(pts.begin() + static_cast<std::ptrdiff_t>(begin), pts.begin() + static_cast<std::ptrdiff_t>(mid),
                   pts.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](const auto& a, const auto& b) { return key(a) < key(b); });
  // Everything in [begin, mid) is <= split and everything in [mid, end) is >= split.
  const double split = key(pts[mid]);

  const std::int32_t left = build(pts, begin, mid, depth + 1);
  const std::int32_t right = build(pts, mid, end, depth + 1);
  Node& node = nodes_[index];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return index;
}

double KdTree::nearest_sq(double qx, double qy) const {
  double best = std::numeric_limits<double>::infinity();
  if (!nodes_.empty()) search(0, qx, qy, best);
  return best;
}

void KdTree::search(std::int32_t index, double qx, double qy, double& best) const {
  const Node& node = nodes_[index];
  if (node.left < 0) {
    const auto& k = simd::active_kernels();
    const double d = k.min_sq_distance(qx, qy, xs_.data() + node.begin, ys_.data() + node.begin,
                                       node.end - node.begin);
    best = std::min(best, d);
    return;
  }

  const double q = node.axis == 0 ? qx : qy;
  const double diff = q - node.split;
  const std::int32_t near = diff < 0 ? node.left : node.right;
  const std::int32_t far = diff < 0 ? node.right : node.left;
  search(near, qx, qy, best);
  // Rounding is monotone, so every point across the plane is at least
  // diff^2 away after rounding as well.
  if (diff * diff < best) search(far, qx, qy, best);
}

}  // namespace idlewatch::audit
