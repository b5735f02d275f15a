#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace idlewatch {

/// Unix epoch seconds.
using EpochSeconds = std::int64_t;

/// Fleet identity: vehicle ids are only unique within one IATA-coded fleet.
struct VehicleKey {
  std::string iata_id;
  std::string vehicle_id;

  auto operator<=>(const VehicleKey&) const = default;
  bool operator==(const VehicleKey&) const = default;
};

/// One vehicle's position sample at one instant.
struct VehicleRecord {
  std::string iata_id;
  std::string vehicle_id;
  std::optional<std::string> route_id;
  std::optional<std::string> trip_id;
  double latitude = 0.0;
  double longitude = 0.0;
  EpochSeconds timestamp = 0;

  VehicleKey key() const { return {iata_id, vehicle_id}; }
  bool operator==(const VehicleRecord&) const = default;
};

enum class RejectReason {
  OutOfBoundsLat,
  OutOfBoundsLon,
  ZeroCoordinate,
  MissingIds,
  BadTimestamp,
};

std::string_view to_string(RejectReason reason);

/// Accepts a record iff every VehicleRecord invariant holds.
///
/// Checks run in a fixed order (timestamp, ids, zero coordinate, latitude,
/// longitude) so the reported reason is stable for records with several
/// defects. Non-finite coordinates are reported as out of bounds.
std::variant<VehicleRecord, RejectReason> validate_record(VehicleRecord rec);

bool is_valid_iata(std::string_view code);

/// Per-source merge of vehicle records for one region at one poll.
struct FeedSnapshot {
  std::string region_id;
  EpochSeconds poll_time = 0;
  std::map<VehicleKey, VehicleRecord> records;
  /// Sources that failed this tick, with a short error description.
  std::vector<std::pair<std::string, std::string>> source_errors;

  /// Inserts under the duplicate rule: larger timestamp wins, ties keep the
  /// record inserted last.
  void merge(VehicleRecord rec);
};

struct IdlingEvent {
  std::string iata_id;
  std::string vehicle_id;
  std::optional<std::string> route_id;
  std::optional<std::string> trip_id;
  double latitude = 0.0;
  double longitude = 0.0;
  EpochSeconds datetime = 0;
  std::int64_t duration = 0;

  bool operator==(const IdlingEvent&) const = default;
};

struct AgencyInfo {
  std::string iata_id;
  std::string agency;
  std::string city;
  std::string country;
  std::string region;
  std::string continent;

  bool operator==(const AgencyInfo&) const = default;
};

class InvalidParams : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Detector control parameters.
///   poll_interval (r): seconds between feed requests
///   horizon (h):       buffer steps between the A and B snapshots
///   eviction_bound (m): misses after which a candidate is dropped
struct DetectorParams {
  int poll_interval = 30;
  int horizon = 1;
  int eviction_bound = 10;
  /// Coordinate tolerance for the stationarity test. Zero means exact
  /// equality, which is the reference behaviour.
  double coordinate_epsilon = 0.0;

  /// Shortest duration that can ever be emitted, (h+1)*r.
  std::int64_t min_duration() const {
    return static_cast<std::int64_t>(horizon + 1) * poll_interval;
  }
  /// h+2 snapshots.
  std::size_t buffer_length() const { return static_cast<std::size_t>(horizon) + 2; }

  /// Throws InvalidParams unless r, h, m >= 1 and epsilon >= 0.
  void validate() const;
};

}  // namespace idlewatch
