#include <filesystem>

#include "doctest.h"
#include "idlewatch/audit/gtfs_static.hpp"
#include "idlewatch/detect/detector.hpp"
#include "idlewatch/feed/gtfs_rt.hpp"
#include "idlewatch/feed/poller.hpp"
#include "idlewatch/sim/fleet_script.hpp"
#include "idlewatch/sim/oracle.hpp"
#include "idlewatch/sim/sim_server.hpp"

using namespace idlewatch;
using namespace idlewatch::sim;

namespace {

/// One bus driving north from (40.0, -74.0) at about 0.9 m/s per second of script time.
FleetScript one_bus(std::vector<IdleSegment> idles) {
  FleetScript s;
  s.vehicles.push_back({"bus1", "R1", "T1", {{0, 40.0, -74.0}, {6000, 40.05, -74.0}}, false});
  s.idle_segments = std::move(idles);
  return s;
}

IdleSegment idle(double start, double length, double lat = 40.00011, double lon = -74.00007) {
  return {"bus1", start, length, lat, lon};
}

std::vector<std::int64_t> oracle_durations(const FleetScript& s, std::size_t polls) {
  DetectorParams p;
  std::vector<std::int64_t> out;
  for (const auto& batch : oracle_events(s, p, poll_schedule(s, 30, polls)))
    for (const auto& e : batch) out.push_back(e.duration);
  return out;
}

}  // namespace

TEST_CASE("script validation") {
  auto s = one_bus({});
  CHECK_NOTHROW(s.validate());
  s.vehicles[0].waypoints = {{10, 40, -74}, {5, 40.1, -74}};
  CHECK_THROWS_AS(s.validate(), InvalidScript);
  s = one_bus({idle(0, 60)});
  s.idle_segments[0].vehicle_id = "ghost";
  CHECK_THROWS_AS(s.validate(), InvalidScript);
}

TEST_CASE("json round trip") {
  auto s = random_script(4, {.vehicles = 5, .horizon = 900});
  auto back = script_from_json(script_to_json(s));
  CHECK(script_to_json(back) == script_to_json(s));
  CHECK(back.vehicles.size() == 5);
}

TEST_CASE("idling vehicles report identical coordinates; moving ones advance") {
  auto s = one_bus({idle(60, 120)});
  const auto t0 = s.start_time;
  auto at = [&](EpochSeconds dt) { return state_at(s, t0 + dt).at(0); };
  CHECK(at(60).latitude == at(90).latitude);
  CHECK(at(90).longitude == at(150).longitude);
  CHECK(at(60).latitude == static_cast<float>(40.00011));
  CHECK(at(0).latitude < at(30).latitude);
  CHECK(at(180).latitude < at(210).latitude);
  CHECK(at(30).latitude == at(59).latitude);
  CHECK(at(31).timestamp == static_cast<std::uint64_t>(t0 + 31));
}

TEST_CASE("served payload decodes to the script state") {
  auto s = random_script(8, {.vehicles = 6, .horizon = 900});
  auto clock = std::make_shared<ScaledClock>(static_cast<double>(s.start_time) + 45, 1.0);
  SimServer server(s, clock);
  feed::SourceConfig src{"r", server.url(), std::nullopt, s.iata_id};
  auto body = feed::HttpFetcher().fetch(src, 2.0);
  auto decoded = feed::decode_feed(body, s.iata_id, 1);
  REQUIRE(decoded.records.size() == 6);
  const auto t = decoded.records[0].timestamp;
  auto expected = state_at(s, t);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(decoded.records[i].vehicle_id == expected[i].vehicle_id);
    CHECK(decoded.records[i].latitude == static_cast<double>(expected[i].latitude));
    CHECK(decoded.records[i].longitude == static_cast<double>(expected[i].longitude));
  }
  server.set_failing(true);
  CHECK_THROWS_AS(feed::HttpFetcher().fetch(src, 2.0), feed::FetchError);
  CHECK(server.requests() == 2);
}

TEST_CASE("oracle threshold examples") {
  CHECK(oracle_durations(one_bus({idle(0, 95)}), 10) == std::vector<std::int64_t>{60, 90});
  CHECK(oracle_durations(one_bus({idle(0, 45)}), 10).empty());
  auto two = oracle_events(one_bus({idle(0, 95), idle(100, 95, 40.0009, -74.0009)}), DetectorParams{},
                           poll_schedule(one_bus({}), 30, 12));
  std::vector<EpochSeconds> starts;
  for (const auto& b : two)
    for (const auto& e : b)
      if (e.duration == 60) starts.push_back(e.datetime);
  REQUIRE(starts.size() == 2);
  CHECK(starts[0] != starts[1]);
}

TEST_CASE("detector agrees with the oracle on a random fleet") {
  for (int h : {1, 2}) {
    auto s = random_script(100 + h, {.vehicles = 15, .horizon = 3000});
    DetectorParams p;
    p.horizon = h;
    const auto polls = poll_schedule(s, 30, 100);
    std::vector<FeedSnapshot> snaps;
    for (auto t : polls) snaps.push_back(snapshot_at(s, t, "sim"));
    auto got = detect::run_detector(snaps, p);
    auto want = oracle_events(s, p, polls);
    REQUIRE(got.size() + h + 1 == want.size());
    std::size_t total = 0;
    for (std::size_t k = 0; k < got.size(); ++k) {
      auto a = got[k], b = want[k + h + 1];
      auto key = [](const IdlingEvent& e) { return std::tie(e.vehicle_id, e.datetime, e.duration); };
      std::sort(a.begin(), a.end(), [&](auto& x, auto& y) { return key(x) < key(y); });
      std::sort(b.begin(), b.end(), [&](auto& x, auto& y) { return key(x) < key(y); });
      CHECK(a == b);
      total += a.size();
    }
    CHECK(total > 0);
  }
}

TEST_CASE("gtfs bundle written for a script parses back") {
  auto s = random_script(3, {.vehicles = 4, .horizon = 600});
  const auto dir = std::filesystem::temp_directory_path() / "idlewatch_sim_gtfs";
  std::filesystem::remove_all(dir);
  write_gtfs_bundle(s, dir.string());
  auto bundle = audit::load_gtfs_static(dir.string());
  CHECK(bundle.shapes.size() == 4);
  CHECK(bundle.trips.size() == 4);
  std::filesystem::remove_all(dir);
}
