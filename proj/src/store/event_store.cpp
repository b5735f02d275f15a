#include "idlewatch/store/event_store.hpp"

#include <sqlite3.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "idlewatch/csv.hpp"

namespace idlewatch::store {

void ExportRange::validate() const {
  if (!(start < end)) throw std::invalid_argument("export range requires start < end");
}

const std::vector<std::string>& export_header() {
  static const std::vector<std::string> header{
      "iata_id", "agency",    "city",      "country",  "region",   "continent", "vehicle_id",
      "trip_id", "route_id", "latitude", "longitude", "datetime", "duration"};
  return header;
}

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS agency (
  iata_id   TEXT PRIMARY KEY CHECK (length(iata_id) = 3),
  agency    TEXT NOT NULL,
  city      TEXT NOT NULL,
  country   TEXT NOT NULL,
  region    TEXT NOT NULL,
  continent TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS events (
  id         INTEGER PRIMARY KEY AUTOINCREMENT,
  iata_id    TEXT NOT NULL REFERENCES agency (iata_id),
  vehicle_id TEXT NOT NULL,
  route_id   TEXT,
  trip_id    TEXT,
  latitude   REAL NOT NULL,
  longitude  REAL NOT NULL,
  datetime   INTEGER NOT NULL,
  duration   INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS events_datetime ON events (datetime);
)sql";

class Statement {
 public:
  Statement(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
      throw StoreError(std::string("prepare failed: ") + sqlite3_errmsg(db));
    }
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  void bind(int i, const std::string& v) { check(sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT)); }
  void bind(int i, const std::optional<std::string>& v) {
    if (v) {
      bind(i, *v);
    } else {
      check(sqlite3_bind_null(stmt_, i));
    }
  }
  void bind(int i, double v) { check(sqlite3_bind_double(stmt_, i, v)); }
  void bind(int i, std::int64_t v) { check(sqlite3_bind_int64(stmt_, i, v)); }

  /// True while a row is available.
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw StoreError(std::string("step failed: ") + sqlite3_errmsg(db_));
  }
  void reset() {
    sqlite3_reset(stmt_);
    sqlite3_clear_bindings(stmt_);
  }

  std::string text(int col) const {
    const auto* p = sqlite3_column_text(stmt_, col);
    return p ? std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)))
             : std::string();
  }
  bool is_null(int col) const { return sqlite3_column_type(stmt_, col) == SQLITE_NULL; }
  double real(int col) const { return sqlite3_column_double(stmt_, col); }
  std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }

 private:
  void check(int rc) {
    if (rc != SQLITE_OK) throw StoreError(std::string("bind failed: ") + sqlite3_errmsg(db_));
  }

  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

class Transaction {
 public:
  explicit Transaction(sqlite3* db) : db_(db) { run("BEGIN IMMEDIATE"); }
  ~Transaction() {
    if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
  }
  void commit() {
    run("COMMIT");
    done_ = true;
  }

 private:
  void run(const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown";
      sqlite3_free(err);
      throw StoreError(std::string(sql) + ": " + msg);
    }
  }

  sqlite3* db_;
  bool done_ = false;
};

}  // namespace

EventStore::EventStore(const std::string& path) {
  if (sqlite3_open(path.c_str(), &db_) != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    db_ = nullptr;
    throw StoreError("cannot open store " + path + ": " + msg);
  }
  sqlite3_busy_timeout(db_, 5000);
  try {
    exec("PRAGMA foreign_keys = ON");
    if (path != ":memory:") exec("PRAGMA journal_mode = WAL");
    exec(kSchema);
  } catch (...) {
    sqlite3_close(db_);
    db_ = nullptr;
    throw;
  }
}

EventStore::~EventStore() { sqlite3_close(db_); }

void EventStore::exec(const char* sql) const {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown";
    sqlite3_free(err);
    throw StoreError(msg);
  }
}

std::size_t EventStore::upsert_agencies(std::span<const AgencyInfo> rows) {
  std::map<std::string, const AgencyInfo*> unique;
  for (const auto& row : rows) {
    if (!is_valid_iata(row.iata_id)) throw std::invalid_argument("invalid iata_id '" + row.iata_id + "'");
    auto [it, inserted] = unique.emplace(row.iata_id, &row);
    if (!inserted && !(*it->second == row)) {
      throw DuplicateIata("iata_id " + row.iata_id + " appears twice with different attributes");
    }
  }

  std::lock_guard lock(mutex_);
  Transaction tx(db_);
  Statement stmt(db_,
                 "INSERT INTO agency (iata_id, agency, city, country, region, continent) "
                 "VALUES (?1, ?2, ?3, ?4, ?5, ?6) "
                 "ON CONFLICT (iata_id) DO UPDATE SET agency = excluded.agency, city = excluded.city, "
                 "country = excluded.country, region = excluded.region, continent = excluded.continent");
  for (const auto& [iata, row] : unique) {
    stmt.bind(1, row->iata_id);
    stmt.bind(2, row->agency);
    stmt.bind(3, row->city);
    stmt.bind(4, row->country);
    stmt.bind(5, row->region);
    stmt.bind(6, row->continent);
    stmt.step();
    stmt.reset();
  }
  tx.commit();
  return unique.size();
}

std::size_t EventStore::insert_events(std::span<const IdlingEvent> batch) {
  if (batch.empty()) return 0;

  std::lock_guard lock(mutex_);
  std::set<std::string> known;
  {
    Statement q(db_, "SELECT iata_id FROM agency");
    while (q.step()) known.insert(q.text(0));
  }
  for (const auto& ev : batch) {
    if (!known.contains(ev.iata_id)) throw UnknownIata("iata_id " + ev.iata_id + " not in agency table");
  }

  Transaction tx(db_);
  Statement stmt(db_,
                 "INSERT INTO events (iata_id, vehicle_id, route_id, trip_id, latitude, longitude, "
                 "datetime, duration) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)");
  for (const auto& ev : batch) {
    stmt.bind(1, ev.iata_id);
    stmt.bind(2, ev.vehicle_id);
    stmt.bind(3, ev.route_id);
    stmt.bind(4, ev.trip_id);
    stmt.bind(5, ev.latitude);
    stmt.bind(6, ev.longitude);
    stmt.bind(7, static_cast<std::int64_t>(ev.datetime));
    stmt.bind(8, static_cast<std::int64_t>(ev.duration));
    stmt.step();
    stmt.reset();
  }
  tx.commit();
  return batch.size();
}

std::size_t EventStore::export_csv(const ExportRange& range, std::ostream& out) const {
  range.validate();
  std::lock_guard lock(mutex_);
  Statement q(db_,
              "SELECT agency.iata_id, agency.agency, agency.city, agency.country, agency.region, "
              "agency.continent, events.vehicle_id, events.trip_id, events.route_id, "
              "events.latitude, events.longitude, events.datetime, events.duration "
              "FROM agency LEFT JOIN events ON agency.iata_id = events.iata_id "
              "WHERE events.datetime BETWEEN ?1 AND ?2 "
              "ORDER BY events.datetime, events.iata_id, events.vehicle_id, events.id");
  q.bind(1, static_cast<std::int64_t>(range.start));
  q.bind(2, static_cast<std::int64_t>(range.end));

  csv::write_row(out, export_header());
  std::size_t rows = 0;
  std::vector<std::string> fields(export_header().size());
  while (q.step()) {
    for (int c = 0; c < 9; ++c) fields[c] = q.is_null(c) ? std::string() : q.text(c);
    fields[9] = csv::format_double(q.real(9));
    fields[10] = csv::format_double(q.real(10));
    fields[11] = std::to_string(q.integer(11));
    fields[12] = std::to_string(q.integer(12));
    csv::write_row(out, fields);
    ++rows;
  }
  return rows;
}

std::size_t EventStore::export_csv(const ExportRange& range, const std::string& path) const {
  range.validate();
  const std::string tmp = path + ".partial";
  std::size_t rows = 0;
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write " + tmp);
    rows = export_csv(range, out);
    out.flush();
    if (!out) throw StoreError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw StoreError("cannot rename " + tmp + " to " + path);
  return rows;
}

std::vector<AgencyInfo> EventStore::agencies() const {
  std::lock_guard lock(mutex_);
  Statement q(db_, "SELECT iata_id, agency, city, country, region, continent FROM agency ORDER BY iata_id");
  std::vector<AgencyInfo> out;
  while (q.step()) out.push_back({q.text(0), q.text(1), q.text(2), q.text(3), q.text(4), q.text(5)});
  return out;
}

std::size_t EventStore::event_count() const {
  std::lock_guard lock(mutex_);
  Statement q(db_, "SELECT COUNT(*) FROM events");
  q.step();
  return static_cast<std::size_t>(q.integer(0));
}

}  // namespace idlewatch::store
