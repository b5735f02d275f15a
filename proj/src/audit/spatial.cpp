#include "idlewatch/audit/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "idlewatch/simd/geo_kernels.hpp"

namespace idlewatch::audit {

double meters_to_degrees(double d_m, double phi) {
  if (!(std::abs(phi) < 90.0)) {
    throw DegenerateLatitude("mean latitude " + std::to_string(phi) + " leaves no longitude scale");
  }
  return d_m / (111320.0 * std::cos(phi * std::numbers::pi / 180.0));
}

ShapeIndex::ShapeIndex(const GtfsStatic& bundle) {
  std::map<std::string, std::size_t> position;
  for (const auto& shape : bundle.shapes) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(shape.points.size());
    for (const auto& p : shape.points) pts.emplace_back(p.latitude, p.longitude);
    position[shape.shape_id] = trees_.size();
    shape_ids_.push_back(shape.shape_id);
    trees_.emplace_back(std::move(pts));
  }

  std::map<std::string, std::set<std::size_t>> routes;
  for (const auto& trip : bundle.trips) {
    if (!trip.shape_id) continue;
    auto it = position.find(*trip.shape_id);
    if (it == position.end()) continue;
    routes[trip.route_id].insert(it->second);
    by_trip_.emplace(trip.trip_id, it->second);
  }
  for (auto& [route, shapes] : routes) by_route_[route].assign(shapes.begin(), shapes.end());
}

std::vector<std::size_t> ShapeIndex::candidates(const std::optional<std::string>& route_id,
                                                const std::optional<std::string>& trip_id) const {
  if (route_id) {
    if (auto it = by_route_.find(*route_id); it != by_route_.end()) return it->second;
  }
  if (trip_id) {
    if (auto it = by_trip_.find(*trip_id); it != by_trip_.end()) return {it->second};
  }
  return {};
}

NearestDistances nearest_shape_distances(std::span<const EventPoint> events, const ShapeIndex& index) {
  NearestDistances out;
  double lat_sum = 0.0;
  for (const auto& ev : events) {
    const auto shapes = index.candidates(ev.route_id, ev.trip_id);
    if (shapes.empty()) {
      ++out.unmapped;
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    for (auto s : shapes) best = std::min(best, index.tree(s).nearest_sq(ev.latitude, ev.longitude));
    out.degrees.push_back(std::sqrt(best));
    lat_sum += ev.latitude;
  }
  if (out.degrees.empty()) {
    throw NoMapping(events.empty() ? "no events to map"
                                   : "no route_id or trip_id maps to a route shape");
  }
  out.mean_latitude = lat_sum / static_cast<double>(out.degrees.size());
  return out;
}

double error_percent(const NearestDistances& nearest, double d_m) {
  if (nearest.degrees.empty()) return 0.0;
  const double d_d = meters_to_degrees(d_m, nearest.mean_latitude);
  const std::size_t covered = simd::count_at_most(nearest.degrees, d_d);
  const auto n = static_cast<double>(nearest.degrees.size());
  return 100.0 * (n - static_cast<double>(covered)) / n;
}

SpatialResult spatial_point_error(std::span<const EventPoint> events, const ShapeIndex& index, double d_m) {
  const auto nearest = nearest_shape_distances(events, index);
  SpatialResult r;
  r.n = nearest.n();
  r.unmapped = nearest.unmapped;
  r.mean_latitude = nearest.mean_latitude;
  r.d_d = meters_to_degrees(d_m, nearest.mean_latitude);
  r.error_percent = error_percent(nearest, d_m);
  return r;
}

std::pair<double, double> city_averages(std::span<const double> values, std::span<const std::size_t> weights) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  double wsum = 0.0;
  double wtotal = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    wsum += values[i] * static_cast<double>(weights[i]);
    wtotal += static_cast<double>(weights[i]);
  }
  return {sum / static_cast<double>(values.size()), wtotal > 0 ? wsum / wtotal : 0.0};
}

ThresholdSweep threshold_sweep(std::span<const NearestDistances> cities, double max_m, double step_m) {
  if (!(step_m > 0)) throw std::invalid_argument("sweep step must be positive");
  std::vector<const NearestDistances*> usable;
  std::vector<std::size_t> weights;
  for (const auto& c : cities) {
    if (c.n() == 0) continue;
    usable.push_back(&c);
    weights.push_back(c.n());
  }
  if (usable.empty()) throw std::invalid_argument("threshold sweep needs at least one auditable city");

  ThresholdSweep out;
  const auto steps = static_cast<std::size_t>(std::floor(max_m / step_m + 1e-9));
  std::vector<double> errors(usable.size());
  for (std::size_t k = 0; k <= steps; ++k) {
    const double d_m = static_cast<double>(k) * step_m;
    for (std::size_t c = 0; c < usable.size(); ++c) errors[c] = error_percent(*usable[c], d_m);
    const auto [unweighted, weighted] = city_averages(errors, weights);
    out.d_m.push_back(d_m);
    out.unweighted.push_back(unweighted);
    out.weighted.push_back(weighted);
  }
  return out;
}

}  // namespace idlewatch::audit
