#include "idlewatch/model.hpp"

#include <cmath>

namespace idlewatch {

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::OutOfBoundsLat: return "OutOfBoundsLat";
    case RejectReason::OutOfBoundsLon: return "OutOfBoundsLon";
    case RejectReason::ZeroCoordinate: return "ZeroCoordinate";
    case RejectReason::MissingIds: return "MissingIds";
    case RejectReason::BadTimestamp: return "BadTimestamp";
  }
  return "Unknown";
}

bool is_valid_iata(std::string_view code) {
  if (code.size() != 3) return false;
  for (char c : code) {
    if (c < 'A' || c > 'Z') return false;
  }
  return true;
}

namespace {

bool present(const std::optional<std::string>& id) { return id.has_value() && !id->empty(); }

}  // namespace

std::variant<VehicleRecord, RejectReason> validate_record(VehicleRecord rec) {
  if (rec.timestamp <= 0) return RejectReason::BadTimestamp;
  if (!present(rec.route_id) && !present(rec.trip_id)) return RejectReason::MissingIds;
  if (rec.latitude == 0.0 || rec.longitude == 0.0) return RejectReason::ZeroCoordinate;
  if (!std::isfinite(rec.latitude) || rec.latitude < -90.0 || rec.latitude > 90.0) {
    return RejectReason::OutOfBoundsLat;
  }
  if (!std::isfinite(rec.longitude) || rec.longitude < -180.0 || rec.longitude > 180.0) {
    return RejectReason::OutOfBoundsLon;
  }
  // Empty ids are stored as absent.
  if (rec.route_id && rec.route_id->empty()) rec.route_id.reset();
  if (rec.trip_id && rec.trip_id->empty()) rec.trip_id.reset();
  return rec;
}

void FeedSnapshot::merge(VehicleRecord rec) {
  auto key = rec.key();
  auto it = records.find(key);
  if (it == records.end()) {
    records.emplace(std::move(key), std::move(rec));
  } else if (rec.timestamp >= it->second.timestamp) {
    it->second = std::move(rec);
  }
}

void DetectorParams::validate() const {
  if (poll_interval < 1) throw InvalidParams("poll interval r must be >= 1");
  if (horizon < 1) throw InvalidParams("horizon h must be >= 1");
  if (eviction_bound < 1) throw InvalidParams("eviction bound m must be >= 1");
  if (!(coordinate_epsilon >= 0.0)) throw InvalidParams("coordinate epsilon must be >= 0");
}

}  // namespace idlewatch
