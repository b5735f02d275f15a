#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "idlewatch/feed/gtfs_rt.hpp"
#include "idlewatch/model.hpp"

namespace idlewatch::sim {

class InvalidScript : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Waypoint {
  double t = 0.0;  // seconds after script start
  double latitude = 0.0;
  double longitude = 0.0;
};

struct ScriptVehicle {
  std::string vehicle_id;
  std::string route_id;
  std::string trip_id;
  /// Strictly increasing in t; positions are linearly interpolated.
  std::vector<Waypoint> waypoints;
  /// Repeat the timeline with period waypoints.back().t; otherwise the
  /// vehicle holds its last waypoint.
  bool loop = false;
};

struct IdleSegment {
  std::string vehicle_id;
  double start = 0.0;   // seconds after script start
  double length = 0.0;  // seconds
  double latitude = 0.0;
  double longitude = 0.0;
};

/// A deterministic fleet.
///
/// Positions change only on multiples of `tick` after start_time: a request
/// at time t sees the state at floor((t - start_time) / tick) * tick. While
/// that instant lies in [start, start + length) of one of its idle
/// segments a vehicle reports the segment's coordinates, otherwise its
/// interpolated waypoint position. Coordinates are rounded to 32-bit floats,
/// the precision the feed carries.
struct FleetScript {
  std::uint64_t seed = 0;
  int tick = 30;
  std::string iata_id = "SIM";
  EpochSeconds start_time = 1706573400;
  std::vector<ScriptVehicle> vehicles;
  std::vector<IdleSegment> idle_segments;

  /// Throws InvalidScript describing the first violated rule.
  void validate() const;
};

FleetScript script_from_json(const std::string& text);
std::string script_to_json(const FleetScript& script);
FleetScript load_script(const std::string& path);

/// Vehicle states at epoch time `t`, in script order. The entity timestamp
/// is `t` itself.
std::vector<feed::EncodedVehicle> state_at(const FleetScript& script, EpochSeconds t);

/// GTFS Realtime payload for a request at time `t`.
std::string feed_at(const FleetScript& script, EpochSeconds t);

/// The snapshot a poller would assemble at `poll_time`, going through the
/// protobuf encoding and decode_feed.
FeedSnapshot snapshot_at(const FleetScript& script, EpochSeconds poll_time, const std::string& region_id);

/// start_time, start_time + r, ... (count entries).
std::vector<EpochSeconds> poll_schedule(const FleetScript& script, int poll_interval, std::size_t count);

struct RandomScriptOptions {
  std::size_t vehicles = 20;
  /// Seconds of motion each vehicle's path must cover.
  double horizon = 6000.0;
  int tick = 30;
  /// Idle segments drawn per vehicle, uniformly in [0, max_idles].
  int max_idles = 3;
  /// Idle lengths are drawn uniformly in [tick/2, max_idle_ticks * tick].
  int max_idle_ticks = 12;
  double center_latitude = 40.7580;
  double center_longitude = -73.9855;
};

/// Reproducible random fleet: each vehicle drives a non-repeating path and
/// idles at spots a few metres off that path, so no coordinate tuple is
/// ever visited twice by the same vehicle.
FleetScript random_script(std::uint64_t seed, const RandomScriptOptions& options = {});

}  // namespace idlewatch::sim
