#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "doctest.h"
#include "idlewatch/audit/battery.hpp"
#include "idlewatch/audit/gtfs_static.hpp"
#include "idlewatch/audit/kdtree.hpp"
#include "idlewatch/audit/spatial.hpp"
#include "idlewatch/audit/table_audits.hpp"
#include "idlewatch/store/event_store.hpp"

using namespace idlewatch;
using namespace idlewatch::audit;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Row {
  std::string vehicle = "v1";
  std::string route = "R1";
  std::string trip = "T1";
  std::string lat = "40.5";
  std::string lon = "-73.5";
  std::string datetime = "1700000000";
  std::string duration = "60";
};

csv::Table table_of(const std::vector<Row>& rows) {
  csv::Table t;
  t.header = store::export_header();
  for (const auto& r : rows) {
    t.rows.push_back({"NYC", "MTA", "New York", "United States", "United States East", "North America", r.vehicle,
                      r.trip, r.route, r.lat, r.lon, r.datetime, r.duration});
  }
  return t;
}

/// 20 distinct clean rows: 2 vehicles, one 30 s apart datetime each.
std::vector<Row> clean_rows() {
  std::vector<Row> rows;
  for (int i = 0; i < 20; ++i) {
    Row r;
    r.vehicle = "v" + std::to_string(i % 2);
    r.datetime = std::to_string(1700000000 + 30 * i);
    r.duration = std::to_string(60 + 30 * (i / 2));
    r.lat = std::to_string(40.5 + i * 1e-4);
    rows.push_back(r);
  }
  return rows;
}

double brute_nearest_sq(double qx, double qy, const std::vector<std::pair<double, double>>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [x, y] : pts) {
    const double dx = x - qx, dy = y - qy;
    best = std::min(best, dx * dx + dy * dy);
  }
  return best;
}

/// One straight shape per route; events scattered around them.
struct Corpus {
  GtfsStatic bundle;
  std::vector<EventPoint> events;
};

Corpus synthetic_city(std::uint64_t seed, double lat0, std::size_t n_events, std::size_t shape_points) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.002, 0.002);
  Corpus c;
  for (int s = 0; s < 3; ++s) {
    const std::string route = "R" + std::to_string(s), shape = "S" + std::to_string(s);
    c.bundle.route_ids.push_back(route);
    c.bundle.trips.push_back({"T" + std::to_string(s), route, shape});
    RouteShape rs{shape, {}};
    for (std::size_t i = 0; i < shape_points; ++i)
      rs.points.push_back({lat0 + 0.01 * s + i * 2e-5, -73.9 + i * 3e-5 * (s + 1)});
    c.bundle.shapes.push_back(rs);
  }
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_int_distribution<std::size_t> along(0, shape_points - 1);
  for (std::size_t i = 0; i < n_events; ++i) {
    const int s = pick(rng);
    const auto& p = c.bundle.shapes[s].points[along(rng)];
    const double scale = i % 4 == 0 ? 0.0 : 1.0;
    c.events.push_back({p.latitude + scale * jitter(rng) / 4, p.longitude + scale * jitter(rng),
                        "R" + std::to_string(s), std::nullopt});
  }
  return c;
}

/// All-pairs reference for the spatial error.
std::vector<double> brute_distances(const Corpus& c) {
  std::vector<double> out;
  for (const auto& e : c.events) {
    const int s = std::stoi(e.route_id->substr(1));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : c.bundle.shapes[s].points) {
      const double dx = p.longitude - e.longitude, dy = p.latitude - e.latitude;
      best = std::min(best, dx * dx + dy * dy);
    }
    out.push_back(std::sqrt(best));
  }
  return out;
}

double brute_error(const Corpus& c, double d_m) {
  const auto d = brute_distances(c);
  double lat_sum = 0.0;
  for (const auto& e : c.events) lat_sum += e.latitude;
  const double phi = lat_sum / c.events.size();
  const double d_d = d_m / (111320.0 * std::cos(phi * kPi / 180.0));
  std::size_t far = 0;
  for (double x : d) far += x > d_d;
  return 100.0 * far / d.size();
}

}  // namespace

TEST_CASE("kd tree matches a linear scan exactly") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  for (std::size_t n : {0u, 1u, 5u, 16u, 17u, 100u, 3000u}) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng));
    if (n > 10) pts[3] = pts[7];  // duplicates
    KdTree tree(pts);
    CHECK(tree.size() == n);
    for (int q = 0; q < 200; ++q) {
      const double qx = u(rng) * 1.5, qy = u(rng) * 1.5;
      CHECK(tree.nearest_sq(qx, qy) == brute_nearest_sq(qx, qy, pts));
    }
  }
}

TEST_CASE("gtfs tables from a zip archive") {
  auto bundle = load_gtfs_static(std::string(IDLEWATCH_TEST_DATA) + "/gtfs_small.zip");
  CHECK(bundle.route_ids == std::vector<std::string>{"R1", "R2"});
  CHECK(bundle.trips.size() == 3);
  REQUIRE(bundle.shapes.size() == 2);
  CHECK(bundle.rejected_shapes == 2);
  CHECK(bundle.shapes[0].shape_id == "S1");
  REQUIRE(bundle.shapes[0].points.size() == 3);
  CHECK(bundle.shapes[0].points[0].latitude == 40.0);
  CHECK(bundle.shapes[0].points[1].latitude == 40.001);

  ShapeIndex index(bundle);
  CHECK(index.candidates(std::string("R1"), std::nullopt).size() == 1);
  CHECK(index.candidates(std::nullopt, std::string("T2")).size() == 1);
  CHECK(index.candidates(std::string("R9"), std::nullopt).empty());
}

TEST_CASE("gtfs loads from a directory and rejects missing tables") {
  const auto dir = std::filesystem::temp_directory_path() / "idlewatch_gtfs_dir";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "routes.txt") << "route_id\nR1\n";
  std::ofstream(dir / "trips.txt") << "route_id,trip_id,shape_id\nR1,T1,S1\n";
  std::ofstream(dir / "shapes.txt") << "shape_id,shape_pt_lat,shape_pt_lon,shape_pt_sequence\nS1,1,1,1\nS1,1,2,2\n";
  CHECK(load_gtfs_static(dir.string()).shapes.size() == 1);
  std::filesystem::remove(dir / "trips.txt");
  CHECK_THROWS_AS(load_gtfs_static(dir.string()), GtfsError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("meters to degrees") {
  CHECK(meters_to_degrees(25, 0) == doctest::Approx(25.0 / 111320.0).epsilon(1e-12));
  CHECK(meters_to_degrees(25, 0) == doctest::Approx(2.2458e-4).epsilon(1e-4));
  CHECK(meters_to_degrees(0, 45) == 0.0);
  CHECK(meters_to_degrees(25, 60) == doctest::Approx(2 * meters_to_degrees(25, 0)).epsilon(1e-12));
  CHECK_THROWS_AS(meters_to_degrees(25, 90), DegenerateLatitude);
}

TEST_CASE("spatial error on vertices, far events, and a displaced subset") {
  GtfsStatic bundle;
  bundle.route_ids = {"R"};
  bundle.trips = {{"T", "R", std::string("S")}};
  RouteShape shape{"S", {}};
  for (int i = 0; i < 50; ++i) shape.points.push_back({40.0 + i * 1e-4, -74.0});
  bundle.shapes = {shape};
  ShapeIndex index(bundle);

  std::vector<EventPoint> on, far, mixed;
  for (int i = 0; i < 50; ++i) {
    on.push_back({shape.points[i].latitude, shape.points[i].longitude, std::string("R"), std::nullopt});
    far.push_back({shape.points[i].latitude, shape.points[i].longitude + 0.02, std::string("R"), std::nullopt});
    const double shift = i < 10 ? 0.001 : 0.0;  // about 85 m east at this latitude
    mixed.push_back({shape.points[i].latitude, shape.points[i].longitude + shift, std::nullopt, std::string("T")});
  }
  CHECK(spatial_point_error(on, index, 25).error_percent == 0.0);
  CHECK(spatial_point_error(far, index, 25).error_percent == 100.0);
  auto r = spatial_point_error(mixed, index, 25);
  CHECK(r.error_percent == 20.0);
  CHECK(r.n == 50);

  std::vector<EventPoint> unmapped{{40.0, -74.0, std::string("X"), std::string("Y")}};
  CHECK_THROWS_AS(spatial_point_error(unmapped, index, 25), NoMapping);
  mixed.push_back(unmapped[0]);
  CHECK(spatial_point_error(mixed, index, 25).unmapped == 1);
}

TEST_CASE("spatial error and sweep agree with the brute-force oracle") {
  const auto a = synthetic_city(1, 40.7, 400, 60);
  const auto b = synthetic_city(2, 34.0, 150, 40);
  ShapeIndex ia(a.bundle), ib(b.bundle);
  for (double d_m : {0.0, 5.0, 25.0, 60.0, 100.0}) {
    CHECK(std::abs(spatial_point_error(a.events, ia, d_m).error_percent - brute_error(a, d_m)) <= 1e-9);
    CHECK(std::abs(spatial_point_error(b.events, ib, d_m).error_percent - brute_error(b, d_m)) <= 1e-9);
  }
  std::vector<NearestDistances> cities{nearest_shape_distances(a.events, ia), nearest_shape_distances(b.events, ib)};
  auto sweep = threshold_sweep(cities);
  REQUIRE(sweep.d_m.size() == 101);
  for (std::size_t i = 0; i < sweep.d_m.size(); ++i) {
    const double ea = brute_error(a, sweep.d_m[i]), eb = brute_error(b, sweep.d_m[i]);
    CHECK(std::abs(sweep.unweighted[i] - (ea + eb) / 2) <= 1e-9);
    CHECK(std::abs(sweep.weighted[i] - (ea * 400 + eb * 150) / 550) <= 1e-9);
    if (i > 0) {
      CHECK(sweep.unweighted[i] <= sweep.unweighted[i - 1]);
      CHECK(sweep.weighted[i] <= sweep.weighted[i - 1]);
    }
  }
  // A quarter of the events sit exactly on a vertex.
  CHECK(sweep.unweighted[0] < 100.0);

  std::vector<NearestDistances> one{cities[0]};
  auto single = threshold_sweep(one);
  for (std::size_t i = 0; i < single.d_m.size(); ++i) CHECK(single.weighted[i] == single.unweighted[i]);
}

TEST_CASE("type audit") {
  auto table = table_of(clean_rows());
  for (const auto& v : audit_types(table)) CHECK(v.pass);
  CHECK(audit_types(table).size() == 13);
  table.rows[3][12] = "abc";
  auto verdicts = audit_types(table);
  CHECK_FALSE(verdicts.back().pass);
  CHECK(verdicts.back().field == "duration");
}

TEST_CASE("duplication by hand count") {
  auto rows = clean_rows();
  rows.resize(10);
  rows[9] = rows[4];
  auto d = audit_duplication(table_of(rows));
  CHECK(d.fields_percent == 0.0);
  CHECK(d.observations_percent == doctest::Approx(10.0));
  CHECK(audit_duplication(table_of(clean_rows())).observations_percent == 0.0);
}

TEST_CASE("missingness by hand count") {
  auto rows = clean_rows();
  rows[0].route = "";
  rows[1].route = "";
  rows[1].trip = "";
  auto m = audit_missingness(table_of(rows));
  REQUIRE(m.size() == 14);
  CHECK(m[7].field == "route_id");
  CHECK(m[7].percent == doctest::Approx(10.0));
  CHECK(m[8].percent == doctest::Approx(5.0));
  CHECK(m[9].field == "route_id | trip_id");
  CHECK(m[9].percent == doctest::Approx(5.0));
  CHECK(m[0].percent == 0.0);
}

TEST_CASE("geobounds") {
  std::vector<Row> rows(100);
  for (int i = 0; i < 100; ++i) rows[i].datetime = std::to_string(1700000000 + i);
  rows[5].lat = "95";
  rows[6].lon = "0";
  auto g = audit_geobounds(table_of(rows));
  CHECK(g.lat_above == doctest::Approx(1.0));
  CHECK(g.lon_zero == doctest::Approx(1.0));
  CHECK(g.lat_zero == 0.0);
  CHECK(g.lat_below == 0.0);
  CHECK(g.lon_above == 0.0);
  CHECK(g.lon_below == 0.0);
}

TEST_CASE("temporal contiguity") {
  std::vector<Row> hour;
  for (int t = 0; t <= 3600; t += 30) {
    Row r;
    r.datetime = std::to_string(1700000000 + t);
    hour.push_back(r);
  }
  auto h = audit_temporal(table_of(hour));
  CHECK(h.downtime_percent == 0.0);
  CHECK(h.max_gap == 30);
  CHECK(h.elapsed == 3600);

  std::vector<Row> day;
  for (int t = 0; t <= 86400; t += 30) {
    if (t > 39990 && t < 40290) continue;
    Row r;
    r.datetime = std::to_string(1700000000 + t);
    day.push_back(r);
  }
  auto d = audit_temporal(table_of(day));
  CHECK(d.max_gap == 300);
  CHECK(d.downtime_percent == doctest::Approx(100.0 * 300 / 86400));

  auto single = audit_temporal(table_of({Row{}}));
  CHECK(single.elapsed == 0);
  CHECK(single.downtime_percent == 0.0);
  CHECK(single.degenerate);
}

TEST_CASE("duration accounting reconstructs episodes") {
  std::vector<Row> rows;
  for (int d = 60; d <= 2400; d += 30) {
    Row r;
    r.datetime = "1700000000";
    r.duration = std::to_string(d);
    rows.push_back(r);
  }
  Row tail;
  tail.datetime = std::to_string(1700000000 + 5940);
  tail.duration = "60";
  rows.push_back(tail);
  auto d = audit_duration(table_of(rows), 60);
  CHECK(d.episodes == 2);
  CHECK(d.operational_seconds == 6000);
  CHECK(d.idle_adjusted_percent == doctest::Approx(40.0));
  CHECK(d.idle_unadjusted_percent == doctest::Approx(41.0));

  std::vector<Row> ladder(3);
  for (int i = 0; i < 3; ++i) ladder[i].duration = std::to_string(60 + 30 * i);
  CHECK(audit_duration(table_of(ladder), 60).operational_seconds == 120);
}

TEST_CASE("schema check") {
  auto table = table_of(clean_rows());
  CHECK_NOTHROW(require_export_schema(table));
  table.header[0] = "iata";
  CHECK_THROWS_AS(require_export_schema(table), SchemaMismatch);
}

TEST_CASE("battery on a clean file passes every error test") {
  auto report = run_battery(table_of(clean_rows()), {});
  CHECK(report.rows == 20);
  for (int n = 1; n <= 36; ++n) {
    CAPTURE(n);
    REQUIRE(report.find(n) != nullptr);
    CHECK(report.find(n)->pass);
  }
  for (int n = 105; n <= 113; ++n) {
    CAPTURE(n);
    REQUIRE(report.find(n) != nullptr);
    CHECK(report.find(n)->pass);
  }
  REQUIRE(report.excluded.size() == 1);
  CHECK(report.excluded[0].city == "New York");
  CHECK(report.find(37)->error.has_value());
}

TEST_CASE("battery fault injection flags exactly tests 16 and 32") {
  auto rows = clean_rows();
  rows.push_back(rows[3]);
  rows[7].lat = "95";
  auto report = run_battery(table_of(rows), {});
  std::set<int> failing;
  for (const auto& t : report.tests) {
    const bool error_test = (t.number >= 15 && t.number <= 36) || t.number == 105 || t.number == 106 ||
                            t.number == 110 || t.number == 111;
    if (error_test && t.value && *t.value != 0.0) failing.insert(t.number);
  }
  CHECK(failing == std::set<int>{16, 32});
  CHECK_FALSE(report.find(16)->pass);
  CHECK_FALSE(report.find(32)->pass);
}

TEST_CASE("battery on an empty export produces a flagged report") {
  auto report = run_battery(table_of({}), {});
  CHECK(report.rows == 0);
  CHECK_FALSE(report.flags.empty());
  CHECK(report.find(1) != nullptr);
  CHECK(report.find(113) != nullptr);
  CHECK_FALSE(report.to_json().empty());
  CHECK_FALSE(report.to_text().empty());
}

TEST_CASE("battery with a GTFS bundle numbers cities from 39") {
  auto rows = clean_rows();
  for (auto& r : rows) {
    r.lat = "40.001";
    r.lon = "-74.0";
  }
  BatteryOptions options;
  options.cities = {{"New York", "us-east", std::string(IDLEWATCH_TEST_DATA) + "/gtfs_small.zip"}};
  auto report = run_battery(table_of(rows), options);
  REQUIRE(report.find(39) != nullptr);
  CHECK(report.find(39)->subject == "New York");
  CHECK(report.find(39)->value == std::optional<double>(0.0));
  CHECK(report.find(40)->scope == "region");
  CHECK(report.find(41)->scope == "region");
  CHECK(report.find(37)->value == std::optional<double>(0.0));
  REQUIRE(report.sweep.has_value());
  CHECK(report.excluded.empty());
}

TEST_CASE("unreadable file marks every test") {
  auto report = run_battery_file("/nonexistent/export.csv", {});
  REQUIRE_FALSE(report.tests.empty());
  for (const auto& t : report.tests) {
    CHECK_FALSE(t.pass);
    CHECK(t.error.has_value());
  }
}
