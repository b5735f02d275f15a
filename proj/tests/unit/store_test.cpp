#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "idlewatch/csv.hpp"
#include "idlewatch/store/event_store.hpp"

using namespace idlewatch;
using namespace idlewatch::store;

namespace {

AgencyInfo nyc() { return {"NYC", "MTA", "New York", "United States", "United States East", "North America"}; }
AgencyInfo lax() { return {"LAX", "Metro", "Los Angeles", "United States", "United States West", "North America"}; }

std::vector<IdlingEvent> batch() {
  return {
      {"NYC", "MTA NYCT_9750", "M42", "MQ_D3-Weekday-SDon-012900_M42_301", 40.7625617980957, -74.00098419189453,
       1697178720, 90},
      {"NYC", "MTA NYCT_9890", "M104", "MV_D3-Weekday-SDon-011000_M104_101", 40.814937591552734,
       -73.95511627197266, 1697178722, 120},
      {"NYC", "MTA NYCT_5975", "BX9", "KB_D3-Weekday-SDon-011000_BX9_602", 40.84089279174805, -73.87944030761719,
       1697178721, 60},
  };
}

}  // namespace

TEST_CASE("agency upsert is idempotent and rejects conflicting duplicates") {
  EventStore store(":memory:");
  std::vector<AgencyInfo> one{lax()};
  CHECK(store.upsert_agencies(one) == 1);
  CHECK(store.upsert_agencies(one) == 1);
  CHECK(store.agencies().size() == 1);

  auto other = lax();
  other.city = "Pasadena";
  std::vector<AgencyInfo> clash{lax(), other};
  CHECK_THROWS_AS(store.upsert_agencies(clash), DuplicateIata);
  CHECK(store.agencies().front().city == "Los Angeles");

  std::vector<AgencyInfo> bad{{"la", "x", "y", "z", "w", "v"}};
  CHECK_THROWS_AS(store.upsert_agencies(bad), std::invalid_argument);
}

TEST_CASE("events insert, reject unknown fleets atomically, and export") {
  EventStore store(":memory:");
  std::vector<AgencyInfo> agencies{nyc()};
  store.upsert_agencies(agencies);
  auto events = batch();
  CHECK(store.insert_events(events) == 3);
  CHECK(store.insert_events(std::span<const IdlingEvent>{}) == 0);

  auto bad = batch();
  bad[1].iata_id = "ZZZ";
  CHECK_THROWS_AS(store.insert_events(bad), UnknownIata);
  CHECK(store.event_count() == 3);

  std::ostringstream out;
  CHECK(store.export_csv({1697178000, 1697179000}, out) == 3);
  auto table = csv::parse(out.str());
  CHECK(table.header == export_header());
  REQUIRE(table.rows.size() == 3);
  const auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(table.header.begin(), table.header.end(), name) - table.header.begin());
  };
  for (const auto& row : table.rows) CHECK(row[col("city")] == "New York");
  CHECK(table.rows[0][col("vehicle_id")] == "MTA NYCT_9750");
  CHECK(table.rows[1][col("vehicle_id")] == "MTA NYCT_5975");
  CHECK(table.rows[2][col("vehicle_id")] == "MTA NYCT_9890");
  CHECK(std::stod(table.rows[0][col("latitude")]) == 40.7625617980957);
  CHECK(table.rows[2][col("duration")] == "120");

  std::ostringstream empty;
  CHECK(store.export_csv({0, 1}, empty) == 0);
  CHECK(csv::parse(empty.str()).rows.empty());
}

TEST_CASE("null ids export as empty cells") {
  EventStore store(":memory:");
  std::vector<AgencyInfo> agencies{nyc()};
  store.upsert_agencies(agencies);
  std::vector<IdlingEvent> one{{"NYC", "v", std::nullopt, "trip", 40.5, -73.5, 100, 60}};
  store.insert_events(one);
  std::ostringstream out;
  store.export_csv({0, 200}, out);
  auto table = csv::parse(out.str());
  const auto route = std::find(table.header.begin(), table.header.end(), "route_id") - table.header.begin();
  CHECK(table.rows.at(0).at(route).empty());
}

TEST_CASE("export range validation") {
  CHECK_THROWS_AS((ExportRange{5, 5}.validate()), std::invalid_argument);
  CHECK_NOTHROW((ExportRange{5, 6}.validate()));
}

TEST_CASE("file-backed store persists across reopen") {
  const auto path = std::filesystem::temp_directory_path() / "idlewatch_store_test.db";
  std::filesystem::remove(path);
  {
    EventStore store(path.string());
    std::vector<AgencyInfo> agencies{nyc()};
    store.upsert_agencies(agencies);
    auto events = batch();
    store.insert_events(events);
  }
  EventStore reopened(path.string());
  CHECK(reopened.event_count() == 3);
  std::filesystem::remove(path);
}
