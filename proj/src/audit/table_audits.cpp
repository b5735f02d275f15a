#include "idlewatch/audit/table_audits.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "idlewatch/simd/geo_kernels.hpp"
#include "idlewatch/store/event_store.hpp"

namespace idlewatch::audit {

namespace {

std::size_t column(const csv::Table& table, const std::string& name) {
  auto it = std::find(table.header.begin(), table.header.end(), name);
  if (it == table.header.end()) throw SchemaMismatch("missing column " + name);
  return static_cast<std::size_t>(it - table.header.begin());
}

bool parses_integer(const std::string& s, std::int64_t* out = nullptr) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return false;
  if (out) *out = v;
  return true;
}

bool parses_float(const std::string& s, double* out = nullptr) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return false;
  if (out) *out = v;
  return true;
}

double percent(std::size_t count, std::size_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(total);
}

std::vector<double> float_column(const csv::Table& table, const std::string& name) {
  const auto c = column(table, name);
  std::vector<double> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    double v = std::numeric_limits<double>::quiet_NaN();
    if (!parses_float(row[c], &v)) v = std::numeric_limits<double>::quiet_NaN();
    out.push_back(v);
  }
  return out;
}

}  // namespace

void require_export_schema(const csv::Table& table) {
  if (table.header != store::export_header()) {
    std::string got;
    for (const auto& h : table.header) got += (got.empty() ? "" : ",") + h;
    throw SchemaMismatch("header does not match the export contract: " + got);
  }
}

std::vector<TypeVerdict> audit_types(const csv::Table& table) {
  static const std::vector<std::pair<std::string, std::string>> expected{
      {"iata_id", "string"},  {"agency", "string"},    {"city", "string"},     {"country", "string"},
      {"region", "string"},   {"continent", "string"}, {"vehicle_id", "string"}, {"route_id", "string"},
      {"trip_id", "string"},  {"latitude", "float"},   {"longitude", "float"}, {"datetime", "integer"},
      {"duration", "integer"}};

  std::vector<TypeVerdict> out;
  for (const auto& [field, want] : expected) {
    const auto c = column(table, field);
    bool all_int = true;
    bool all_float = true;
    for (const auto& row : table.rows) {
      const auto& cell = row[c];
      if (cell.empty()) continue;
      if (all_int && !parses_integer(cell)) all_int = false;
      if (all_float && !parses_float(cell)) all_float = false;
      if (!all_int && !all_float) break;
    }
    TypeVerdict v{field, want, {}, false};
    if (want == "string") {
      v.observed = "string";
      v.pass = true;
    } else {
      v.observed = all_int ? "integer" : all_float ? "float" : "string";
      v.pass = want == "float" ? all_float : all_int;
    }
    out.push_back(std::move(v));
  }
  return out;
}

DuplicationResult audit_duplication(const csv::Table& table) {
  DuplicationResult r;
  const std::set<std::string> names(table.header.begin(), table.header.end());
  r.fields_percent = percent(table.header.size() - names.size(), table.header.size());

  std::set<std::vector<std::string>> seen;
  std::size_t repeats = 0;
  for (const auto& row : table.rows) {
    if (!seen.insert(row).second) ++repeats;
  }
  r.observations_percent = percent(repeats, table.rows.size());
  return r;
}

std::vector<MissingResult> audit_missingness(const csv::Table& table) {
  static const std::vector<std::string> fields{"iata_id",  "agency",     "city",     "country",
                                               "region",   "continent",  "vehicle_id", "route_id",
                                               "trip_id",  "route_id | trip_id", "latitude", "longitude",
                                               "datetime", "duration"};
  const auto route = column(table, "route_id");
  const auto trip = column(table, "trip_id");
  std::vector<MissingResult> out;
  for (const auto& field : fields) {
    std::size_t missing = 0;
    if (field == "route_id | trip_id") {
      for (const auto& row : table.rows) missing += row[route].empty() && row[trip].empty();
    } else {
      const auto c = column(table, field);
      for (const auto& row : table.rows) missing += row[c].empty();
    }
    out.push_back({field, percent(missing, table.rows.size())});
  }
  return out;
}

GeoBoundsResult audit_geobounds(const csv::Table& table) {
  const auto lat = float_column(table, "latitude");
  const auto lon = float_column(table, "longitude");
  const auto lb = simd::count_bounds(lat, -90.0, 90.0);
  const auto ob = simd::count_bounds(lon, -180.0, 180.0);
  const std::size_t n = table.rows.size();
  return {percent(lb.zero, n), percent(lb.above, n), percent(lb.below, n),
          percent(ob.zero, n), percent(ob.above, n), percent(ob.below, n)};
}

TemporalResult audit_temporal(const csv::Table& table) {
  const auto c = column(table, "datetime");
  TemporalResult r;
  std::vector<std::int64_t> times;
  std::size_t zero = 0, negative = 0;
  for (const auto& row : table.rows) {
    std::int64_t v = 0;
    if (!parses_integer(row[c], &v)) continue;
    zero += v == 0;
    negative += v < 0;
    times.push_back(v);
  }
  r.zero_percent = percent(zero, table.rows.size());
  r.negative_percent = percent(negative, table.rows.size());

  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  if (times.size() < 2) {
    r.degenerate = true;
    return r;
  }
  std::int64_t downtime = 0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const std::int64_t gap = times[i] - times[i - 1];
    r.max_gap = std::max(r.max_gap, gap);
    if (gap > 60) downtime += gap;
  }
  r.elapsed = times.back() - times.front();
  r.downtime_percent = 100.0 * static_cast<double>(downtime) / static_cast<double>(r.elapsed);
  return r;
}

DurationResult audit_duration(const csv::Table& table, std::int64_t min_unadjusted,
                              std::int64_t adjusted_threshold) {
  const auto iata = column(table, "iata_id");
  const auto vehicle = column(table, "vehicle_id");
  const auto dt_col = column(table, "datetime");
  const auto dur_col = column(table, "duration");

  DurationResult r;
  std::size_t zero = 0, negative = 0;
  using Vehicle = std::pair<std::string, std::string>;
  std::map<std::tuple<std::string, std::string, std::int64_t>, std::int64_t> episodes;
  std::map<Vehicle, std::pair<std::int64_t, std::int64_t>> spans;  // first start, last end

  for (const auto& row : table.rows) {
    std::int64_t duration = 0;
    if (parses_integer(row[dur_col], &duration)) {
      zero += duration == 0;
      negative += duration < 0;
    } else {
      continue;
    }
    std::int64_t datetime = 0;
    if (!parses_integer(row[dt_col], &datetime) || duration <= 0) continue;

    auto [it, inserted] = episodes.try_emplace({row[iata], row[vehicle], datetime}, duration);
    if (!inserted) it->second = std::max(it->second, duration);

    const Vehicle key{row[iata], row[vehicle]};
    auto [sp, fresh] = spans.try_emplace(key, datetime, datetime + duration);
    if (!fresh) {
      sp->second.first = std::min(sp->second.first, datetime);
      sp->second.second = std::max(sp->second.second, datetime + duration);
    }
  }
  r.zero_percent = percent(zero, table.rows.size());
  r.negative_percent = percent(negative, table.rows.size());

  std::int64_t adjusted = 0, unadjusted = 0;
  for (const auto& [key, length] : episodes) {
    if (length > adjusted_threshold) adjusted += length;
    if (length >= min_unadjusted) unadjusted += length;
  }
  for (const auto& [key, span] : spans) r.operational_seconds += span.second - span.first;
  r.episodes = episodes.size();
  if (r.operational_seconds > 0) {
    const auto op = static_cast<double>(r.operational_seconds);
    r.idle_adjusted_percent = std::min(100.0, 100.0 * static_cast<double>(adjusted) / op);
    r.idle_unadjusted_percent = std::min(100.0, 100.0 * static_cast<double>(unadjusted) / op);
  }
  return r;
}

}  // namespace idlewatch::audit
