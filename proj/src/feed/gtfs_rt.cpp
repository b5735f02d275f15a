#include "idlewatch/feed/gtfs_rt.hpp"

#include <limits>

#include "gtfs-realtime.pb.h"

namespace idlewatch::feed {

namespace tr = transit_realtime;

DecodeResult decode_feed(std::string_view payload, const std::string& iata_id,
                         EpochSeconds fallback_time) {
  if (payload.size() > static_cast<std::size_t>(std::numeric_limits<int>::max())) {
    throw MalformedPayload("payload too large");
  }
  tr::FeedMessage message;
  if (!message.ParseFromArray(payload.data(), static_cast<int>(payload.size()))) {
    throw MalformedPayload("not a GTFS Realtime FeedMessage");
  }

  const auto header_time = static_cast<EpochSeconds>(message.header().timestamp());
  DecodeResult result;
  for (const auto& entity : message.entity()) {
    if (entity.is_deleted() || !entity.has_vehicle()) continue;
    const auto& vp = entity.vehicle();
    if (!vp.has_position()) continue;

    VehicleRecord rec;
    rec.iata_id = iata_id;
    rec.vehicle_id = (vp.has_vehicle() && !vp.vehicle().id().empty()) ? vp.vehicle().id() : entity.id();
    if (vp.has_trip()) {
      if (vp.trip().has_route_id()) rec.route_id = vp.trip().route_id();
      if (vp.trip().has_trip_id()) rec.trip_id = vp.trip().trip_id();
    }
    rec.latitude = static_cast<double>(vp.position().latitude());
    rec.longitude = static_cast<double>(vp.position().longitude());
    const auto entity_time = static_cast<EpochSeconds>(vp.timestamp());
    rec.timestamp = entity_time > 0 ? entity_time : (header_time > 0 ? header_time : fallback_time);

    auto checked = validate_record(std::move(rec));
    if (auto* ok = std::get_if<VehicleRecord>(&checked)) {
      result.records.push_back(std::move(*ok));
    } else {
      ++result.dropped;
    }
  }
  return result;
}

std::string encode_feed(std::uint64_t header_timestamp, const std::vector<EncodedVehicle>& vehicles) {
  tr::FeedMessage message;
  auto* header = message.mutable_header();
  header->set_gtfs_realtime_version("2.0");
  header->set_incrementality(tr::FeedHeader::FULL_DATASET);
  header->set_timestamp(header_timestamp);

  for (const auto& v : vehicles) {
    auto* entity = message.add_entity();
    entity->set_id(v.entity_id);
    auto* vp = entity->mutable_vehicle();
    if (!v.route_id.empty() || !v.trip_id.empty()) {
      auto* trip = vp->mutable_trip();
      if (!v.trip_id.empty()) trip->set_trip_id(v.trip_id);
      if (!v.route_id.empty()) trip->set_route_id(v.route_id);
    }
    vp->mutable_vehicle()->set_id(v.vehicle_id);
    vp->mutable_position()->set_latitude(v.latitude);
    vp->mutable_position()->set_longitude(v.longitude);
    if (v.timestamp) vp->set_timestamp(v.timestamp);
  }

  std::string out;
  message.SerializeToString(&out);
  return out;
}

}  // namespace idlewatch::feed
