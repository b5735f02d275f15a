#include "idlewatch/sim/fleet_script.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "json.hpp"

namespace idlewatch::sim {

using nlohmann::json;

namespace {

bool in_bounds(double lat, double lon) {
  return std::isfinite(lat) && std::isfinite(lon) && std::abs(lat) <= 90.0 && std::abs(lon) <= 180.0;
}

std::pair<double, double> interpolate(const ScriptVehicle& v, double t) {
  const auto& wp = v.waypoints;
  if (wp.size() == 1 || t <= wp.front().t) return {wp.front().latitude, wp.front().longitude};
  if (v.loop && wp.back().t > 0) t = std::fmod(t, wp.back().t);
  if (t >= wp.back().t) return {wp.back().latitude, wp.back().longitude};
  auto hi = std::upper_bound(wp.begin(), wp.end(), t, [](double x, const Waypoint& w) { return x < w.t; });
  auto lo = hi - 1;
  const double f = (t - lo->t) / (hi->t - lo->t);
  return {lo->latitude + f * (hi->latitude - lo->latitude), lo->longitude + f * (hi->longitude - lo->longitude)};
}

/// Uniform double in [0, 1) from the top 53 bits, identical on every
/// standard library.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }
std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) { return n == 0 ? 0 : rng() % n; }

constexpr double kMetersPerDegree = 111320.0;

}  // namespace

void FleetScript::validate() const {
  if (tick < 1) throw InvalidScript("tick must be >= 1");
  if (!is_valid_iata(iata_id)) throw InvalidScript("iata_id must be three uppercase letters");
  if (start_time <= 0) throw InvalidScript("start_time must be positive");

  std::set<std::string> ids;
  for (const auto& v : vehicles) {
    if (v.vehicle_id.empty()) throw InvalidScript("vehicle without vehicle_id");
    if (!ids.insert(v.vehicle_id).second) throw InvalidScript("duplicate vehicle_id " + v.vehicle_id);
    if (v.route_id.empty() && v.trip_id.empty()) {
      throw InvalidScript("vehicle " + v.vehicle_id + " needs a route_id or trip_id");
    }
    if (v.waypoints.empty()) throw InvalidScript("vehicle " + v.vehicle_id + " has no waypoints");
    for (std::size_t i = 0; i < v.waypoints.size(); ++i) {
      const auto& w = v.waypoints[i];
      if (!in_bounds(w.latitude, w.longitude)) throw InvalidScript("waypoint out of bounds for " + v.vehicle_id);
      if (i > 0 && !(w.t > v.waypoints[i - 1].t)) {
        throw InvalidScript("waypoint times must increase for " + v.vehicle_id);
      }
    }
  }

  std::map<std::string, std::vector<const IdleSegment*>> by_vehicle;
  for (const auto& s : idle_segments) {
    if (!ids.contains(s.vehicle_id)) throw InvalidScript("idle segment for unknown vehicle " + s.vehicle_id);
    if (!(s.length > 0) || s.start < 0) throw InvalidScript("idle segment needs start >= 0 and length > 0");
    if (!in_bounds(s.latitude, s.longitude)) throw InvalidScript("idle segment out of bounds for " + s.vehicle_id);
    by_vehicle[s.vehicle_id].push_back(&s);
  }
  for (auto& [id, segs] : by_vehicle) {
    std::sort(segs.begin(), segs.end(), [](auto* a, auto* b) { return a->start < b->start; });
    for (std::size_t i = 1; i < segs.size(); ++i) {
      if (segs[i]->start < segs[i - 1]->start + segs[i - 1]->length) {
        throw InvalidScript("overlapping idle segments for " + id);
      }
    }
  }
}

FleetScript script_from_json(const std::string& text) {
  FleetScript s;
  try {
    const json doc = json::parse(text);
    s.seed = doc.value("seed", std::uint64_t{0});
    s.tick = doc.value("tick", 30);
    s.iata_id = doc.value("iata_id", std::string("SIM"));
    s.start_time = doc.value("start_time", EpochSeconds{1706573400});
    for (const auto& v : doc.at("vehicles")) {
      ScriptVehicle sv;
      sv.vehicle_id = v.at("vehicle_id").get<std::string>();
      sv.route_id = v.value("route_id", std::string());
      sv.trip_id = v.value("trip_id", std::string());
      sv.loop = v.value("loop", false);
      for (const auto& w : v.at("waypoints")) {
        sv.waypoints.push_back({w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>()});
      }
      s.vehicles.push_back(std::move(sv));
    }
    if (doc.contains("idle_segments")) {
      for (const auto& i : doc.at("idle_segments")) {
        s.idle_segments.push_back({i.at("vehicle_id").get<std::string>(), i.at("start").get<double>(),
                                   i.at("length").get<double>(), i.at("latitude").get<double>(),
                                   i.at("longitude").get<double>()});
      }
    }
  } catch (const json::exception& e) {
    throw InvalidScript(std::string("malformed fleet script: ") + e.what());
  }
  s.validate();
  return s;
}

std::string script_to_json(const FleetScript& script) {
  nlohmann::ordered_json doc;
  doc["seed"] = script.seed;
  doc["tick"] = script.tick;
  doc["iata_id"] = script.iata_id;
  doc["start_time"] = script.start_time;
  auto vehicles = nlohmann::ordered_json::array();
  for (const auto& v : script.vehicles) {
    nlohmann::ordered_json o;
    o["vehicle_id"] = v.vehicle_id;
    o["route_id"] = v.route_id;
    o["trip_id"] = v.trip_id;
    o["loop"] = v.loop;
    auto wps = nlohmann::ordered_json::array();
    for (const auto& w : v.waypoints) wps.push_back({w.t, w.latitude, w.longitude});
    o["waypoints"] = std::move(wps);
    vehicles.push_back(std::move(o));
  }
  doc["vehicles"] = std::move(vehicles);
  auto idles = nlohmann::ordered_json::array();
  for (const auto& i : script.idle_segments) {
    idles.push_back({{"vehicle_id", i.vehicle_id},
                     {"start", i.start},
                     {"length", i.length},
                     {"latitude", i.latitude},
                     {"longitude", i.longitude}});
  }
  doc["idle_segments"] = std::move(idles);
  return doc.dump(2);
}

FleetScript load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidScript("cannot read fleet script " + path);
  return script_from_json({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

std::vector<feed::EncodedVehicle> state_at(const FleetScript& script, EpochSeconds t) {
  const double elapsed = static_cast<double>(t - script.start_time);
  const double q = elapsed <= 0 ? 0.0 : std::floor(elapsed / script.tick) * script.tick;

  std::vector<feed::EncodedVehicle> out;
  out.reserve(script.vehicles.size());
  for (const auto& v : script.vehicles) {
    auto [lat, lon] = interpolate(v, q);
    for (const auto& s : script.idle_segments) {
      if (s.vehicle_id == v.vehicle_id && q >= s.start && q < s.start + s.length) {
        lat = s.latitude;
        lon = s.longitude;
        break;
      }
    }
    feed::EncodedVehicle ev;
    ev.entity_id = v.vehicle_id;
    ev.vehicle_id = v.vehicle_id;
    ev.route_id = v.route_id;
    ev.trip_id = v.trip_id;
    ev.latitude = static_cast<float>(lat);
    ev.longitude = static_cast<float>(lon);
    ev.timestamp = static_cast<std::uint64_t>(t);
    out.push_back(std::move(ev));
  }
  return out;
}

std::string feed_at(const FleetScript& script, EpochSeconds t) {
  return feed::encode_feed(static_cast<std::uint64_t>(t), state_at(script, t));
}

FeedSnapshot snapshot_at(const FleetScript& script, EpochSeconds poll_time, const std::string& region_id) {
  FeedSnapshot snap;
  snap.region_id = region_id;
  snap.poll_time = poll_time;
  for (auto& rec : feed::decode_feed(feed_at(script, poll_time), script.iata_id, poll_time).records) {
    snap.merge(std::move(rec));
  }
  return snap;
}

std::vector<EpochSeconds> poll_schedule(const FleetScript& script, int poll_interval, std::size_t count) {
  std::vector<EpochSeconds> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(script.start_time + static_cast<EpochSeconds>(k) * poll_interval);
  }
  return out;
}

FleetScript random_script(std::uint64_t seed, const RandomScriptOptions& options) {
  std::mt19937_64 rng(seed);
  FleetScript s;
  s.seed = seed;
  s.tick = options.tick;
  s.iata_id = "SIM";

  const double lat_scale = 1.0 / kMetersPerDegree;
  const double lon_scale = 1.0 / (kMetersPerDegree * std::cos(options.center_latitude * std::numbers::pi / 180.0));

  for (std::size_t i = 0; i < options.vehicles; ++i) {
    ScriptVehicle v;
    v.vehicle_id = "v" + std::to_string(1000 + i);
    v.route_id = "R" + std::to_string(below(rng, 8) + 1);
    v.trip_id = "T" + std::to_string(seed % 100000) + "-" + std::to_string(i);

    // A meandering path at 4-12 m/s; legs of 60-180 s. Heading changes are
    // bounded so the path never doubles back onto itself.
    double lat = options.center_latitude + uniform(rng, -3000, 3000) * lat_scale;
    double lon = options.center_longitude + uniform(rng, -3000, 3000) * lon_scale;
    double heading = uniform(rng, 0, 2 * std::numbers::pi);
    double t = 0.0;
    v.waypoints.push_back({t, lat, lon});
    while (t < options.horizon + 600.0) {
      const double leg = uniform(rng, 60, 180);
      const double speed = uniform(rng, 4, 12);
      heading += uniform(rng, -0.6, 0.6);
      t += leg;
      lat += std::cos(heading) * speed * leg * lat_scale;
      lon += std::sin(heading) * speed * leg * lon_scale;
      v.waypoints.push_back({t, lat, lon});
    }

    // Idle spots sit 3-8 m to the side of the path.
    const auto idles = static_cast<int>(below(rng, static_cast<std::uint64_t>(options.max_idles) + 1));
    double cursor = uniform(rng, 0, 4.0 * options.tick);
    for (int k = 0; k < idles && cursor < options.horizon; ++k) {
      const double length = uniform(rng, options.tick / 2.0, static_cast<double>(options.max_idle_ticks) * options.tick);
      const auto [plat, plon] = interpolate(v, cursor);
      const double side = uniform(rng, 0, 2 * std::numbers::pi);
      const double offset = uniform(rng, 3, 8);
      s.idle_segments.push_back({v.vehicle_id, cursor, length, plat + std::cos(side) * offset * lat_scale,
                                 plon + std::sin(side) * offset * lon_scale});
      cursor += length + uniform(rng, 2.0 * options.tick, options.horizon / (idles + 1));
    }
    s.vehicles.push_back(std::move(v));
  }
  s.validate();
  return s;
}

}  // namespace idlewatch::sim
