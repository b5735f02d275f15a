#pragma once

#include <iosfwd>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "idlewatch/model.hpp"

struct sqlite3;

namespace idlewatch::store {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DuplicateIata : public StoreError {
 public:
  using StoreError::StoreError;
};

class UnknownIata : public StoreError {
 public:
  using StoreError::StoreError;
};

/// Inclusive datetime window for exports.
struct ExportRange {
  EpochSeconds start = 0;
  EpochSeconds end = 0;

  /// Throws std::invalid_argument unless start < end.
  void validate() const;
};

/// Column order of the exported CSV: agency fields, then the event fields
/// with trip_id ahead of route_id.
const std::vector<std::string>& export_header();

/// Agency (dimension) and Events (fact) tables joined on iata_id.
///
/// Backed by SQLite. ":memory:" gives a private in-memory database. All
/// operations serialize on one connection, so an export sees every batch
/// committed before it started and none after.
class EventStore {
 public:
  explicit EventStore(const std::string& path);
  ~EventStore();

  EventStore(const EventStore&) = delete;
  EventStore& operator=(const EventStore&) = delete;

  /// Inserts or replaces agencies keyed by iata_id. Returns rows written.
  /// Throws DuplicateIata when the batch itself repeats an iata_id with
  /// different attributes, std::invalid_argument on a malformed iata_id.
  std::size_t upsert_agencies(std::span<const AgencyInfo> rows);

  /// Appends events in one transaction. Throws UnknownIata (and writes
  /// nothing) if any iata_id is missing from the Agency table.
  std::size_t insert_events(std::span<const IdlingEvent> batch);

  /// Writes the joined rows with datetime in [range.start, range.end],
  /// ordered by datetime, iata_id, vehicle_id, then insertion order.
  /// Returns the number of data rows.
  std::size_t export_csv(const ExportRange& range, std::ostream& out) const;
  std::size_t export_csv(const ExportRange& range, const std::string& path) const;

  std::vector<AgencyInfo> agencies() const;
  std::size_t event_count() const;

 private:
  void exec(const char* sql) const;

  sqlite3* db_ = nullptr;
  mutable std::mutex mutex_;
};

}  // namespace idlewatch::store
