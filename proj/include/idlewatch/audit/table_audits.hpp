#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "idlewatch/csv.hpp"

namespace idlewatch::audit {

/// The file's header is not the export column contract.
class SchemaMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws SchemaMismatch unless the header equals the export header.
void require_export_schema(const csv::Table& table);

struct TypeVerdict {
  std::string field;
  std::string expected;  // "string", "float" or "integer"
  std::string observed;
  bool pass = false;
};

/// Tests 2-14: the narrowest of integer, float, string that every
/// non-empty cell of the column parses as. String columns always pass.
std::vector<TypeVerdict> audit_types(const csv::Table& table);

struct DuplicationResult {
  double fields_percent = 0.0;        // repeated header names / header width
  double observations_percent = 0.0;  // rows equal to an earlier row / rows
};

DuplicationResult audit_duplication(const csv::Table& table);

struct MissingResult {
  std::string field;
  double percent = 0.0;
};

/// Tests 17-30 in order; the entry named "route_id | trip_id" counts rows
/// where both ids are empty.
std::vector<MissingResult> audit_missingness(const csv::Table& table);

struct GeoBoundsResult {
  double lat_zero = 0.0, lat_above = 0.0, lat_below = 0.0;
  double lon_zero = 0.0, lon_above = 0.0, lon_below = 0.0;
};

/// Tests 31-36. Unparseable cells count in the denominator only.
GeoBoundsResult audit_geobounds(const csv::Table& table);

struct TemporalResult {
  double zero_percent = 0.0;
  double negative_percent = 0.0;
  /// Sum of gaps longer than 60 s between consecutive distinct datetimes,
  /// as a share of elapsed time.
  double downtime_percent = 0.0;
  std::int64_t max_gap = 0;
  std::int64_t elapsed = 0;
  /// Fewer than two parseable datetimes.
  bool degenerate = false;
};

TemporalResult audit_temporal(const csv::Table& table);

struct DurationResult {
  double zero_percent = 0.0;
  double negative_percent = 0.0;
  /// Idle time in episodes longer than 300 s over operational time.
  double idle_adjusted_percent = 0.0;
  /// Idle time in episodes of at least (h+1)*r over operational time.
  double idle_unadjusted_percent = 0.0;
  std::size_t episodes = 0;
  std::int64_t operational_seconds = 0;
};

/// Episodes are (iata_id, vehicle_id, datetime) groups with length equal to
/// their largest duration. A vehicle's operational time runs from its first
/// datetime to its last datetime + duration.
DurationResult audit_duration(const csv::Table& table, std::int64_t min_unadjusted,
                              std::int64_t adjusted_threshold = 300);

}  // namespace idlewatch::audit
