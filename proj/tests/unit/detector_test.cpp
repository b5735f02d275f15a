#include <random>

#include "doctest.h"
#include "idlewatch/detect/detector.hpp"

using namespace idlewatch;
using namespace idlewatch::detect;

namespace {

constexpr EpochSeconds kStart = 1697178720;

VehicleRecord record(const std::string& vehicle, double lat, double lon, EpochSeconds ts) {
  VehicleRecord r;
  r.iata_id = "NYC";
  r.vehicle_id = vehicle;
  r.route_id = "M42";
  r.trip_id = "T-" + vehicle;
  r.latitude = lat;
  r.longitude = lon;
  r.timestamp = ts;
  return r;
}

FeedSnapshot snapshot(int tick, const std::vector<VehicleRecord>& records, int r = 30) {
  FeedSnapshot s;
  s.region_id = "us-east";
  s.poll_time = kStart + tick * r;
  for (auto rec : records) {
    rec.timestamp = s.poll_time;
    s.merge(rec);
  }
  return s;
}

/// One vehicle, stationary on the ticks listed in `still`, moving otherwise.
std::vector<FeedSnapshot> single_vehicle(int ticks, const std::vector<bool>& still) {
  std::vector<FeedSnapshot> out;
  double lon = -74.0;
  for (int t = 0; t < ticks; ++t) {
    if (!still[t]) lon += 0.0001 * (t + 1);
    out.push_back(snapshot(t, {record("9750", 40.76, lon, 0)}));
  }
  return out;
}

std::vector<std::int64_t> durations(const std::vector<std::vector<IdlingEvent>>& batches) {
  std::vector<std::int64_t> out;
  for (const auto& b : batches)
    for (const auto& e : b) out.push_back(e.duration);
  return out;
}

}  // namespace

TEST_CASE("buffer warm-up and capacity") {
  DetectorParams p;
  BufferState state(p);
  auto r1 = push_snapshot(state, snapshot(0, {}));
  CHECK(r1.state.size() == 1);
  CHECK_FALSE(r1.ready);
  auto r2 = push_snapshot(r1.state, snapshot(1, {}));
  auto r3 = push_snapshot(r2.state, snapshot(2, {}));
  CHECK(r3.state.size() == 3);
  CHECK(r3.ready);
  auto r4 = push_snapshot(r3.state, snapshot(3, {}));
  CHECK(r4.state.size() == 3);
  CHECK(r4.state.slot(0).poll_time == kStart + 30);
  CHECK(r4.state.sequence(0) == 1);
  CHECK_THROWS_AS(push_snapshot(r4.state, snapshot(1, {})), OutOfOrderSnapshot);
}

TEST_CASE("intersect_stationary uses exact coordinates") {
  auto a = snapshot(0, {record("1", 40.76, -74.0, 0), record("2", 40.77, -74.1, 0)});
  auto b = snapshot(1, {record("1", 40.76, -74.0, 0), record("2", 40.77, -74.1 + 1e-7, 0)});
  auto both = intersect_stationary(a, b);
  REQUIRE(both.size() == 1);
  CHECK(both[0].vehicle_id == "1");
  CHECK(intersect_stationary(a, b, 1e-6).size() == 2);
}

TEST_CASE("intersect_stationary requires the same ids") {
  auto rec = record("1", 40.76, -74.0, 0);
  auto a = snapshot(0, {rec});
  rec.trip_id = "other";
  auto b = snapshot(1, {rec});
  CHECK(intersect_stationary(a, b).empty());
}

TEST_CASE("three stationary snapshots give one 60 s event, then 90 s") {
  // ticks 0..3 share coordinates: tick 0 sets the spot, ticks 1-3 keep it
  auto snaps = single_vehicle(5, {false, true, true, true, false});
  auto batches = run_detector(snaps, DetectorParams{});
  REQUIRE(batches.size() == 3);
  CHECK(durations(batches) == std::vector<std::int64_t>{60, 90});
  REQUIRE(batches[0].size() == 1);
  CHECK(batches[0][0].datetime == kStart);
  CHECK(batches[1][0].datetime == kStart);
  CHECK(batches[2].empty());
}

TEST_CASE("two stationary snapshots never produce an event") {
  auto batches = run_detector(single_vehicle(6, {false, true, false, false, false, false}), DetectorParams{});
  CHECK(durations(batches).empty());
}

TEST_CASE("two snapshots with h=1 yield no batches") {
  CHECK(run_detector(single_vehicle(2, {false, true}), DetectorParams{}).empty());
}

TEST_CASE("all vehicles moving gives empty batches") {
  std::vector<FeedSnapshot> snaps;
  for (int t = 0; t < 10; ++t)
    snaps.push_back(snapshot(t, {record("1", 40.0 + t * 1e-4, -74.0, 0), record("2", 41.0, -74.0 - t * 1e-4, 0)}));
  for (const auto& b : run_detector(snaps, DetectorParams{})) CHECK(b.empty());
}

TEST_CASE("larger horizon delays the first event to (h+1)r") {
  DetectorParams p;
  p.horizon = 3;
  auto batches = run_detector(single_vehicle(8, {false, true, true, true, true, true, false, false}), p);
  CHECK(durations(batches) == std::vector<std::int64_t>{120, 150});
}

TEST_CASE("eviction after m misses gives a re-idling vehicle a fresh datetime") {
  DetectorParams p;
  p.eviction_bound = 2;
  const auto spot = record("1", 40.76, -74.0, 0);
  std::vector<FeedSnapshot> snaps;
  int t = 0;
  for (; t < 3; ++t) snaps.push_back(snapshot(t, {spot}));
  for (int k = 0; k < 4; ++k, ++t) snaps.push_back(snapshot(t, {record("1", 40.7 + t * 1e-3, -74.0, 0)}));
  const int back = t;
  for (int k = 0; k < 3; ++k, ++t) snaps.push_back(snapshot(t, {spot}));

  Detector d(p);
  std::vector<IdlingEvent> events;
  for (auto& s : snaps) {
    if (auto batch = d.push(s)) events.insert(events.end(), batch->begin(), batch->end());
    for (const auto& [tuple, entry] : d.candidates()) CHECK(entry.miss_count < p.eviction_bound);
  }
  REQUIRE(events.size() == 2);
  CHECK(events[0].datetime == kStart);
  CHECK(events[1].datetime == kStart + back * 30);
  CHECK(events[1].duration == 60);
}

TEST_CASE("out-of-order snapshots are skipped, not fatal") {
  Detector d(DetectorParams{});
  d.push(snapshot(5, {}));
  CHECK_FALSE(d.push(snapshot(3, {})).has_value());
  CHECK(d.skipped() == 1);
}

TEST_CASE("randomized stream keeps the buffer and H bounded") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> move(0, 3);
  DetectorParams p;
  p.horizon = 2;
  p.eviction_bound = 3;
  Detector d(p);
  std::vector<double> lat(8, 40.0);
  for (int t = 0; t < 2000; ++t) {
    std::vector<VehicleRecord> recs;
    for (int v = 0; v < 8; ++v) {
      if (move(rng) == 0) lat[v] += 1e-4;
      if (move(rng) != 3) recs.push_back(record(std::to_string(v), lat[v], -74.0, 0));
    }
    if (auto batch = d.push(snapshot(t, recs))) {
      for (const auto& e : *batch) {
        CHECK(e.duration >= p.min_duration());
        CHECK(e.duration % p.poll_interval == 0);
      }
    }
    CHECK(d.buffer().size() <= p.buffer_length());
    for (const auto& [tuple, entry] : d.candidates()) CHECK(entry.miss_count < p.eviction_bound);
  }
}
