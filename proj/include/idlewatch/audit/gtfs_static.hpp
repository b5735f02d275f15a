#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace idlewatch::audit {

class GtfsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ShapePoint {
  double latitude = 0.0;
  double longitude = 0.0;
};

struct RouteShape {
  std::string shape_id;
  std::vector<ShapePoint> points;  // in shape_pt_sequence order
};

struct TripRow {
  std::string trip_id;
  std::string route_id;
  std::optional<std::string> shape_id;
};

/// The parts of a GTFS static bundle the spatial audit needs.
struct GtfsStatic {
  std::vector<std::string> route_ids;
  std::vector<TripRow> trips;
  std::vector<RouteShape> shapes;  // ordered by shape_id
  /// Shapes dropped for having fewer than two points or points outside
  /// WGS84 bounds.
  std::size_t rejected_shapes = 0;
};

/// Parses routes.txt, trips.txt and shapes.txt given as CSV text. A missing
/// shapes table yields a bundle with no shapes.
GtfsStatic parse_gtfs_tables(const std::string& routes_txt, const std::string& trips_txt,
                             const std::optional<std::string>& shapes_txt);

/// Loads a bundle from a directory or a .zip archive (tables may sit in a
/// subfolder of the archive).
GtfsStatic load_gtfs_static(const std::string& path);

/// Minimal reader for stored and deflated zip members.
std::map<std::string, std::string> read_zip(const std::string& path);

}  // namespace idlewatch::audit
