#include "idlewatch/audit/battery.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "idlewatch/csv.hpp"
#include "json.hpp"

namespace idlewatch::audit {

namespace {

const std::vector<std::string> kTypeFields{"iata_id",  "agency",   "city",      "country",  "region",
                                           "continent", "vehicle_id", "route_id", "trip_id", "latitude",
                                           "longitude", "datetime", "duration"};

bool in_percent_range(double v) { return v >= 0.0 && v <= 100.0; }

TestEntry entry(int number, std::string name, std::string unit) {
  TestEntry e;
  e.number = number;
  e.name = std::move(name);
  e.scope = "global";
  e.unit = std::move(unit);
  return e;
}

void set_value(TestEntry& e, double value, bool pass) {
  e.value = value;
  e.pass = pass;
}

/// Runs `fill` and converts any exception into an error on `tests`.
void guarded(std::vector<TestEntry>& tests, AuditReport& report, const std::string& audit,
             const std::function<void()>& fill) {
  try {
    fill();
  } catch (const std::exception& e) {
    report.errors.push_back(audit + ": " + e.what());
    for (auto& t : tests) {
      if (!t.value && t.verdict.empty()) {
        t.error = e.what();
        t.pass = false;
      }
    }
  }
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::string> optional_cell(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

void spatial_tests(const csv::Table& table, const BatteryOptions& options, AuditReport& report,
                   std::vector<TestEntry>& out) {
  TestEntry g_unweighted = entry(37, "Spatial point error, average (unweighted)", "%");
  TestEntry g_weighted = entry(38, "Spatial point error, average (weighted)", "%");

  // Events per city.
  std::map<std::string, std::vector<EventPoint>> by_city;
  std::vector<std::string> city_order;
  try {
    const auto c_city = static_cast<std::size_t>(std::find(table.header.begin(), table.header.end(), "city") - table.header.begin());
    const auto c_lat = static_cast<std::size_t>(std::find(table.header.begin(), table.header.end(), "latitude") - table.header.begin());
    const auto c_lon = static_cast<std::size_t>(std::find(table.header.begin(), table.header.end(), "longitude") - table.header.begin());
    const auto c_route = static_cast<std::size_t>(std::find(table.header.begin(), table.header.end(), "route_id") - table.header.begin());
    const auto c_trip = static_cast<std::size_t>(std::find(table.header.begin(), table.header.end(), "trip_id") - table.header.begin());
    for (auto c : {c_city, c_lat, c_lon, c_route, c_trip}) {
      if (c >= table.header.size()) throw SchemaMismatch("export lacks a column needed for the spatial audit");
    }
    for (const auto& row : table.rows) {
      const auto lat = parse_double(row[c_lat]);
      const auto lon = parse_double(row[c_lon]);
      if (!lat || !lon) continue;
      auto [it, fresh] = by_city.try_emplace(row[c_city]);
      if (fresh) city_order.push_back(row[c_city]);
      it->second.push_back({*lat, *lon, optional_cell(row[c_route]), optional_cell(row[c_trip])});
    }
  } catch (const std::exception& e) {
    report.errors.push_back(std::string("spatial: ") + e.what());
    g_unweighted.error = g_weighted.error = e.what();
    out.push_back(std::move(g_unweighted));
    out.push_back(std::move(g_weighted));
    return;
  }

  std::map<std::string, const CityBundle*> bundles;
  std::vector<std::string> regions;
  for (const auto& b : options.cities) {
    bundles.try_emplace(b.city, &b);
    if (std::find(regions.begin(), regions.end(), b.region) == regions.end()) regions.push_back(b.region);
  }
  for (const auto& city : city_order) {
    if (!bundles.contains(city)) report.excluded.push_back({city, "no GTFS static bundle configured"});
  }

  std::vector<NearestDistances> audited;
  std::vector<double> all_errors;
  std::vector<std::size_t> all_weights;
  std::vector<TestEntry> regional;
  int number = 39;

  for (const auto& region : regions) {
    std::vector<double> errors;
    std::vector<std::size_t> weights;
    for (const auto& b : options.cities) {
      if (b.region != region || bundles.at(b.city) != &b) continue;
      TestEntry t = entry(number++, "Spatial point error", "%");
      t.scope = "city";
      t.subject = b.city;
      auto events = by_city.find(b.city);
      try {
        if (events == by_city.end() || events->second.empty()) throw NoMapping("no events for this city");
        const ShapeIndex index(load_gtfs_static(b.gtfs_path));
        auto nearest = nearest_shape_distances(events->second, index);
        const double e = error_percent(nearest, options.d_m);
        set_value(t, e, in_percent_range(e));
        t.observations = nearest.n();
        if (nearest.unmapped > 0) {
          report.flags.push_back(b.city + ": " + std::to_string(nearest.unmapped) +
                                 " events without a matching route shape were left out");
        }
        errors.push_back(e);
        weights.push_back(nearest.n());
        audited.push_back(std::move(nearest));
      } catch (const std::exception& ex) {
        t.error = ex.what();
        report.excluded.push_back({b.city, ex.what()});
      }
      regional.push_back(std::move(t));
    }
    TestEntry ru = entry(number++, "Spatial point error, average (unweighted)", "%");
    TestEntry rw = entry(number++, "Spatial point error, average (weighted)", "%");
    ru.scope = rw.scope = "region";
    ru.subject = rw.subject = region;
    if (errors.empty()) {
      ru.error = rw.error = "no auditable city in region";
    } else {
      const auto [u, w] = city_averages(errors, weights);
      set_value(ru, u, in_percent_range(u));
      set_value(rw, w, in_percent_range(w));
      all_errors.insert(all_errors.end(), errors.begin(), errors.end());
      all_weights.insert(all_weights.end(), weights.begin(), weights.end());
    }
    regional.push_back(std::move(ru));
    regional.push_back(std::move(rw));
  }
  if (number > 105) report.flags.push_back("spatial test numbers run past 104 and overlap the temporal block");

  if (all_errors.empty()) {
    g_unweighted.error = g_weighted.error = "no auditable city";
  } else {
    const auto [u, w] = city_averages(all_errors, all_weights);
    set_value(g_unweighted, u, in_percent_range(u));
    set_value(g_weighted, w, in_percent_range(w));
    report.sweep = threshold_sweep(audited, options.sweep_max_m, options.sweep_step_m);
  }
  out.push_back(std::move(g_unweighted));
  out.push_back(std::move(g_weighted));
  for (auto& t : regional) out.push_back(std::move(t));
}

std::string format_seconds(double s) {
  const auto total = static_cast<long long>(std::llround(s));
  const long long h = total / 3600, m = (total % 3600) / 60, sec = total % 60;
  std::ostringstream out;
  if (h > 0) out << h << " h ";
  if (h > 0 || m > 0) out << m << " min ";
  out << sec << " s";
  return out.str();
}

std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f %%", v);
  return buf;
}

}  // namespace

const TestEntry* AuditReport::find(int number) const {
  for (const auto& t : tests) {
    if (t.number == number) return &t;
  }
  return nullptr;
}

AuditReport run_battery(const csv::Table& table, const BatteryOptions& options) {
  AuditReport report;
  report.rows = table.rows.size();
  if (table.rows.empty()) report.flags.push_back("zero-row: export contains no events");

  try {
    require_export_schema(table);
  } catch (const SchemaMismatch& e) {
    report.errors.push_back(std::string("schema: ") + e.what());
  }

  // 1-14 data types.
  std::vector<TestEntry> types;
  {
    TestEntry object = entry(1, "Object", "type");
    object.verdict = "table";
    object.pass = true;
    types.push_back(std::move(object));
    for (std::size_t i = 0; i < kTypeFields.size(); ++i) {
      types.push_back(entry(static_cast<int>(i) + 2, "Data type: " + kTypeFields[i], "type"));
    }
    guarded(types, report, "types", [&] {
      const auto verdicts = audit_types(table);
      for (std::size_t i = 0; i < verdicts.size(); ++i) {
        types[i + 1].verdict = verdicts[i].observed;
        types[i + 1].pass = verdicts[i].pass;
      }
    });
  }

  // 15-16 duplication.
  std::vector<TestEntry> dup{entry(15, "Duplication: fields", "%"), entry(16, "Duplication: observations", "%")};
  guarded(dup, report, "duplication", [&] {
    const auto d = audit_duplication(table);
    set_value(dup[0], d.fields_percent, d.fields_percent == 0.0);
    set_value(dup[1], d.observations_percent, d.observations_percent == 0.0);
  });

  // 17-30 missingness; route_id and trip_id may be missing individually.
  std::vector<TestEntry> miss;
  {
    static const std::vector<std::string> names{"iata_id",  "agency",     "city",     "country",
                                                "region",   "continent",  "vehicle_id", "route_id",
                                                "trip_id",  "route_id | trip_id", "latitude", "longitude",
                                                "datetime", "duration"};
    for (std::size_t i = 0; i < names.size(); ++i) {
      miss.push_back(entry(static_cast<int>(i) + 17, "Missingness: " + names[i], "%"));
    }
    guarded(miss, report, "missingness", [&] {
      const auto m = audit_missingness(table);
      for (std::size_t i = 0; i < m.size(); ++i) {
        const bool optional = m[i].field == "route_id" || m[i].field == "trip_id";
        set_value(miss[i], m[i].percent, optional ? in_percent_range(m[i].percent) : m[i].percent == 0.0);
      }
    });
  }

  // 31-36 general geolocation error.
  std::vector<TestEntry> geo{entry(31, "latitude: zero values", "%"),  entry(32, "latitude: exceed max (> 90)", "%"),
                             entry(33, "latitude: exceed min (< -90)", "%"), entry(34, "longitude: zero values", "%"),
                             entry(35, "longitude: exceed max (> 180)", "%"), entry(36, "longitude: exceed min (< -180)", "%")};
  guarded(geo, report, "geobounds", [&] {
    const auto g = audit_geobounds(table);
    const double values[] = {g.lat_zero, g.lat_above, g.lat_below, g.lon_zero, g.lon_above, g.lon_below};
    for (std::size_t i = 0; i < 6; ++i) set_value(geo[i], values[i], values[i] == 0.0);
  });

  // 37.. spatial point error.
  std::vector<TestEntry> spatial;
  spatial_tests(table, options, report, spatial);

  // 105-109 temporal contiguity.
  std::vector<TestEntry> temporal{entry(105, "datetime: zero values", "%"), entry(106, "datetime: negative values", "%"),
                                  entry(107, "Downtime (> 1 min.)", "%"), entry(108, "Downtime max. interval", "s"),
                                  entry(109, "Elapsed time", "s")};
  guarded(temporal, report, "temporal", [&] {
    const auto t = audit_temporal(table);
    set_value(temporal[0], t.zero_percent, t.zero_percent == 0.0);
    set_value(temporal[1], t.negative_percent, t.negative_percent == 0.0);
    set_value(temporal[2], t.downtime_percent, in_percent_range(t.downtime_percent));
    set_value(temporal[3], static_cast<double>(t.max_gap), t.max_gap >= 0);
    set_value(temporal[4], static_cast<double>(t.elapsed), t.elapsed >= 0);
    if (t.degenerate) report.flags.push_back("zero-row: fewer than two distinct datetimes, contiguity is degenerate");
  });

  // 110-113 expected duration.
  const std::int64_t min_unadjusted = static_cast<std::int64_t>(options.horizon + 1) * options.poll_interval;
  std::vector<TestEntry> duration{entry(110, "duration: zero values", "%"), entry(111, "duration: negative values", "%"),
                                  entry(112, "Avg. idle adj. (> 5 min.)", "%"),
                                  entry(113, "Avg. idle (>= " + std::to_string(min_unadjusted) + " s)", "%")};
  guarded(duration, report, "duration", [&] {
    const auto d = audit_duration(table, min_unadjusted);
    set_value(duration[0], d.zero_percent, d.zero_percent == 0.0);
    set_value(duration[1], d.negative_percent, d.negative_percent == 0.0);
    set_value(duration[2], d.idle_adjusted_percent, in_percent_range(d.idle_adjusted_percent));
    set_value(duration[3], d.idle_unadjusted_percent, in_percent_range(d.idle_unadjusted_percent));
  });

  for (auto* group : {&types, &dup, &miss, &geo, &spatial, &temporal, &duration}) {
    for (auto& t : *group) report.tests.push_back(std::move(t));
  }
  return report;
}

AuditReport run_battery_file(const std::string& csv_path, const BatteryOptions& options) {
  try {
    return run_battery(csv::read_file(csv_path), options);
  } catch (const std::exception& e) {
    // Produce the full numbered skeleton, every entry failed.
    AuditReport report = run_battery(csv::Table{}, options);
    report.errors.insert(report.errors.begin(), "read: " + std::string(e.what()));
    report.flags.clear();
    for (auto& t : report.tests) {
      t.value.reset();
      t.verdict.clear();
      t.pass = false;
      t.error = e.what();
    }
    report.sweep.reset();
    return report;
  }
}

std::string AuditReport::to_json() const {
  using ordered = nlohmann::ordered_json;
  ordered doc;
  doc["rows"] = rows;
  ordered tests_json = ordered::array();
  for (const auto& t : tests) {
    ordered o;
    o["number"] = t.number;
    o["name"] = t.name;
    o["scope"] = t.scope;
    if (!t.subject.empty()) o["subject"] = t.subject;
    o["value"] = t.value ? ordered(*t.value) : ordered(nullptr);
    if (!t.verdict.empty()) o["verdict"] = t.verdict;
    o["unit"] = t.unit;
    o["pass"] = t.pass;
    if (t.observations) o["observations"] = *t.observations;
    if (t.error) o["error"] = *t.error;
    tests_json.push_back(std::move(o));
  }
  doc["tests"] = std::move(tests_json);
  ordered excluded_json = ordered::array();
  for (const auto& e : excluded) excluded_json.push_back({{"city", e.city}, {"reason", e.reason}});
  doc["excluded_cities"] = std::move(excluded_json);
  if (sweep) {
    doc["sweep"] = {{"d_m", sweep->d_m}, {"unweighted", sweep->unweighted}, {"weighted", sweep->weighted}};
  } else {
    doc["sweep"] = nullptr;
  }
  doc["flags"] = flags;
  doc["errors"] = errors;
  return doc.dump(2);
}

std::string AuditReport::to_text() const {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-5s %-8s %-22s %-44s %-18s %s\n", "No.", "Scope", "Subject", "Test", "Value", "Result");
  out << line;
  for (const auto& t : tests) {
    std::string value;
    if (t.error) {
      value = "n/a";
    } else if (t.unit == "type") {
      value = t.verdict;
    } else if (t.value && t.unit == "%") {
      value = format_percent(*t.value);
    } else if (t.value && t.unit == "s") {
      value = format_seconds(*t.value);
    }
    std::snprintf(line, sizeof line, "%-5d %-8s %-22s %-44s %-18s %s\n", t.number, t.scope.c_str(),
                  t.subject.c_str(), t.name.c_str(), value.c_str(), t.error ? "error" : t.pass ? "pass" : "FAIL");
    out << line;
    if (t.error) out << "      " << *t.error << "\n";
  }
  if (!excluded.empty()) {
    out << "\nExcluded cities:\n";
    for (const auto& e : excluded) out << "  " << e.city << ": " << e.reason << "\n";
  }
  if (sweep) {
    out << "\nThreshold sweep (D_m, unweighted %, weighted %):\n";
    for (std::size_t i = 0; i < sweep->d_m.size(); ++i) {
      std::snprintf(line, sizeof line, "  %6.1f  %8.4f  %8.4f\n", sweep->d_m[i], sweep->unweighted[i], sweep->weighted[i]);
      out << line;
    }
  }
  for (const auto& f : flags) out << "flag: " << f << "\n";
  for (const auto& e : errors) out << "error: " << e << "\n";
  return out.str();
}

}  // namespace idlewatch::audit
