#include "idlewatch/api/event_json.hpp"

#include <array>
#include <stdexcept>

#include "json.hpp"

namespace idlewatch::api {

namespace {

using ordered = nlohmann::ordered_json;

constexpr std::array<const char*, 8> kKeys{"iata_id",  "vehicle_id", "route_id", "trip_id",
                                           "latitude", "longitude",  "datetime", "duration"};

ordered optional_string(const std::optional<std::string>& v) { return v ? ordered(*v) : ordered(nullptr); }

std::optional<std::string> read_optional(const nlohmann::json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<std::string>();
}

}  // namespace

std::string events_to_json(std::span<const IdlingEvent> batch) {
  ordered array = ordered::array();
  for (const auto& ev : batch) {
    ordered obj;
    obj[kKeys[0]] = ev.iata_id;
    obj[kKeys[1]] = ev.vehicle_id;
    obj[kKeys[2]] = optional_string(ev.route_id);
    obj[kKeys[3]] = optional_string(ev.trip_id);
    obj[kKeys[4]] = ev.latitude;
    obj[kKeys[5]] = ev.longitude;
    obj[kKeys[6]] = ev.datetime;
    obj[kKeys[7]] = ev.duration;
    array.push_back(std::move(obj));
  }
  return array.dump();
}

std::vector<IdlingEvent> events_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("invalid event JSON: ") + e.what());
  }
  if (!doc.is_array()) throw std::invalid_argument("event message is not a JSON array");

  std::vector<IdlingEvent> out;
  out.reserve(doc.size());
  for (const auto& obj : doc) {
    if (!obj.is_object() || obj.size() != kKeys.size()) {
      throw std::invalid_argument("event object must have exactly eight keys");
    }
    try {
      IdlingEvent ev;
      ev.iata_id = obj.at("iata_id").get<std::string>();
      ev.vehicle_id = obj.at("vehicle_id").get<std::string>();
      ev.route_id = read_optional(obj.at("route_id"));
      ev.trip_id = read_optional(obj.at("trip_id"));
      ev.latitude = obj.at("latitude").get<double>();
      ev.longitude = obj.at("longitude").get<double>();
      if (!obj.at("datetime").is_number_integer() || !obj.at("duration").is_number_integer()) {
        throw std::invalid_argument("datetime and duration must be integers");
      }
      ev.datetime = obj.at("datetime").get<EpochSeconds>();
      ev.duration = obj.at("duration").get<std::int64_t>();
      out.push_back(std::move(ev));
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(std::string("malformed event object: ") + e.what());
    }
  }
  return out;
}

}  // namespace idlewatch::api
