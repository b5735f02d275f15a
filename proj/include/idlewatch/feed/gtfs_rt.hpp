#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "idlewatch/model.hpp"

namespace idlewatch::feed {

/// The protobuf envelope could not be parsed. Callers treat this as a
/// skipped poll for the source.
class MalformedPayload : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DecodeResult {
  std::vector<VehicleRecord> records;
  /// Entities that carried a position but failed validate_record.
  std::size_t dropped = 0;
};

/// Decodes a binary GTFS Realtime FeedMessage into vehicle records.
///
/// One record per non-deleted entity that carries a vehicle position. The
/// vehicle id is VehicleDescriptor.id, falling back to the entity id. The
/// record timestamp is the entity timestamp if non-zero, else the header
/// timestamp if non-zero, else `fallback_time`. Latitude and longitude are
/// the feed's 32-bit floats widened to double, never rounded.
DecodeResult decode_feed(std::string_view payload, const std::string& iata_id,
                         EpochSeconds fallback_time);

/// One entity's worth of data for encode_feed.
struct EncodedVehicle {
  std::string entity_id;
  std::string vehicle_id;
  std::string route_id;  // empty: field omitted
  std::string trip_id;   // empty: field omitted
  float latitude = 0.0f;
  float longitude = 0.0f;
  std::uint64_t timestamp = 0;  // 0: field omitted
};

/// Serializes a FULL_DATASET FeedMessage, gtfs_realtime_version "2.0".
/// Entity order is preserved so payloads are byte-stable.
std::string encode_feed(std::uint64_t header_timestamp, const std::vector<EncodedVehicle>& vehicles);

}  // namespace idlewatch::feed
