#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "idlewatch/model.hpp"

namespace idlewatch::api {

/// Compact JSON array, one object per event with keys in the order
/// iata_id, vehicle_id, route_id, trip_id, latitude, longitude, datetime,
/// duration. Missing ids serialize as null; coordinates use the shortest
/// round-trip decimal form; datetime and duration are bare integers. An
/// empty batch is "[]".
std::string events_to_json(std::span<const IdlingEvent> batch);

/// Inverse of events_to_json. Throws std::invalid_argument on a message
/// that is not an array of eight-key event objects.
std::vector<IdlingEvent> events_from_json(std::string_view text);

}  // namespace idlewatch::api
