#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "idlewatch/audit/gtfs_static.hpp"
#include "idlewatch/audit/kdtree.hpp"

namespace idlewatch::audit {

class DegenerateLatitude : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// No event of the city could be tied to a route shape.
class NoMapping : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Degree-space radius for a metric threshold at mean latitude `phi`:
/// D_m / (111320 * cos(phi)). Throws DegenerateLatitude when |phi| >= 90.
///
/// The divisor is the length of one degree of longitude at phi, so the
/// conversion is exact east-west and generous north-south by up to 1/cos(phi).
double meters_to_degrees(double d_m, double phi);

/// Per-shape K-D trees plus the identifier maps used to pick candidate
/// shapes for an event.
class ShapeIndex {
 public:
  explicit ShapeIndex(const GtfsStatic& bundle);

  /// Shapes for the route (through its trips); otherwise the trip's own
  /// shape; otherwise none.
  std::vector<std::size_t> candidates(const std::optional<std::string>& route_id,
                                      const std::optional<std::string>& trip_id) const;

  const KdTree& tree(std::size_t shape) const { return trees_.at(shape); }
  const std::string& shape_id(std::size_t shape) const { return shape_ids_.at(shape); }
  std::size_t shape_count() const { return trees_.size(); }

 private:
  std::vector<std::string> shape_ids_;
  std::vector<KdTree> trees_;
  std::map<std::string, std::vector<std::size_t>> by_route_;
  std::map<std::string, std::size_t> by_trip_;
};

struct EventPoint {
  double latitude = 0.0;
  double longitude = 0.0;
  std::optional<std::string> route_id;
  std::optional<std::string> trip_id;
};

/// Distance from each mappable event to its closest candidate shape point.
struct NearestDistances {
  /// Degrees, one per mapped event, in input order.
  std::vector<double> degrees;
  /// Mean latitude of the mapped events.
  double mean_latitude = 0.0;
  /// Events without any candidate shape; excluded from n.
  std::size_t unmapped = 0;

  std::size_t n() const { return degrees.size(); }
};

/// Throws NoMapping when no event has a candidate shape.
NearestDistances nearest_shape_distances(std::span<const EventPoint> events, const ShapeIndex& index);

/// Percentage of mapped events farther than D_d from every candidate shape.
double error_percent(const NearestDistances& nearest, double d_m);

struct SpatialResult {
  double error_percent = 0.0;
  std::size_t n = 0;
  std::size_t unmapped = 0;
  double mean_latitude = 0.0;
  double d_d = 0.0;
};

SpatialResult spatial_point_error(std::span<const EventPoint> events, const ShapeIndex& index, double d_m);

struct ThresholdSweep {
  std::vector<double> d_m;
  /// Arithmetic mean of the per-city errors.
  std::vector<double> unweighted;
  /// Mean weighted by each city's n.
  std::vector<double> weighted;
};

/// Errors for D_m = 0, step, ..., max_m over every city with n >= 1.
/// Throws std::invalid_argument when no city qualifies.
ThresholdSweep threshold_sweep(std::span<const NearestDistances> cities, double max_m = 100.0,
                               double step_m = 1.0);

/// Unweighted and n-weighted mean of per-city values.
std::pair<double, double> city_averages(std::span<const double> values, std::span<const std::size_t> weights);

}  // namespace idlewatch::audit
