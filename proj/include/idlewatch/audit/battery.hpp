#pragma once

#include <optional>
#include <string>
#include <vector>

#include "idlewatch/audit/spatial.hpp"
#include "idlewatch/audit/table_audits.hpp"
#include "idlewatch/csv.hpp"

namespace idlewatch::audit {

/// GTFS static bundle for one city, as named in the export's city column.
struct CityBundle {
  std::string city;
  std::string region;
  std::string gtfs_path;
};

struct BatteryOptions {
  double d_m = 25.0;
  int poll_interval = 30;
  int horizon = 1;
  std::vector<CityBundle> cities;
  double sweep_max_m = 100.0;
  double sweep_step_m = 1.0;
};

struct TestEntry {
  int number = 0;
  std::string name;
  /// "global", "region" or "city".
  std::string scope;
  /// Region or city name for non-global entries.
  std::string subject;
  std::optional<double> value;
  /// Observed type for tests 1-14.
  std::string verdict;
  /// "%", "s", "type".
  std::string unit;
  bool pass = false;
  std::optional<std::string> error;
  /// Events behind a spatial value.
  std::optional<std::size_t> observations;
};

struct ExcludedCity {
  std::string city;
  std::string reason;
};

struct AuditReport {
  std::size_t rows = 0;
  std::vector<TestEntry> tests;
  std::vector<ExcludedCity> excluded;
  std::optional<ThresholdSweep> sweep;
  std::vector<std::string> flags;
  std::vector<std::string> errors;

  const TestEntry* find(int number) const;
  std::string to_json() const;
  std::string to_text() const;
};

/// Runs every audit over the export table. A failing audit marks its own
/// tests with an error and the rest still run.
///
/// Numbering: 1-36 and 105-113 are fixed; 37/38 are the global spatial
/// averages; cities and their region averages follow from 39 in the order
/// regions first appear in options.cities.
AuditReport run_battery(const csv::Table& table, const BatteryOptions& options);

/// Reads the CSV first; an unreadable file yields a report whose every
/// test carries the read error.
AuditReport run_battery_file(const std::string& csv_path, const BatteryOptions& options);

}  // namespace idlewatch::audit
