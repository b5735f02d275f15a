#include "idlewatch/audit/gtfs_static.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "idlewatch/csv.hpp"

namespace idlewatch::audit {

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GtfsError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t le32(const std::string& buf, std::size_t at) {
  if (at + 4 > buf.size()) throw GtfsError("truncated zip archive");
  return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + 3])) << 24;
}

std::uint16_t le16(const std::string& buf, std::size_t at) {
  if (at + 2 > buf.size()) throw GtfsError("truncated zip archive");
  return static_cast<std::uint16_t>(static_cast<unsigned char>(buf[at]) |
                                    static_cast<unsigned char>(buf[at + 1]) << 8);
}

std::string inflate_raw(const char* data, std::size_t size, std::size_t expected) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw GtfsError("inflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data));
  zs.avail_in = static_cast<uInt>(size);
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != expected) throw GtfsError("corrupt deflate stream in zip archive");
  return out;
}

/// Header row lookup that tolerates a UTF-8 byte-order mark and padding.
class Columns {
 public:
  Columns(const csv::Table& table, const std::string& name) : name_(name) {
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      std::string h = table.header[i];
      if (i == 0 && h.rfind("\xEF\xBB\xBF", 0) == 0) h.erase(0, 3);
      while (!h.empty() && (h.back() == ' ' || h.back() == '\r')) h.pop_back();
      while (!h.empty() && h.front() == ' ') h.erase(0, 1);
      index_[h] = i;
    }
  }
  std::size_t require(const std::string& col) const {
    auto it = index_.find(col);
    if (it == index_.end()) throw GtfsError(name_ + " lacks column " + col);
    return it->second;
  }
  std::optional<std::size_t> find(const std::string& col) const {
    auto it = index_.find(col);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::string name_;
  std::map<std::string, std::size_t> index_;
};

csv::Table parse_table(const std::string& text, const std::string& name) {
  try {
    return csv::parse(text);
  } catch (const csv::ParseError& e) {
    throw GtfsError(name + ": " + e.what());
  }
}

double parse_coordinate(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) throw GtfsError("shapes.txt: bad " + what + " '" + s + "'");
  return v;
}

long long parse_sequence(const std::string& s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw GtfsError("shapes.txt: bad shape_pt_sequence '" + s + "'");
  return v;
}

}  // namespace

std::map<std::string, std::string> read_zip(const std::string& path) {
  const std::string buf = slurp(path);
  if (buf.size() < 22) throw GtfsError(path + " is not a zip archive");

  // End-of-central-directory record: scan backwards past any comment.
  std::size_t eocd = std::string::npos;
  const std::size_t floor = buf.size() > 22 + 0xFFFF ? buf.size() - 22 - 0xFFFF : 0;
  for (std::size_t i = buf.size() - 22 + 1; i-- > floor;) {
    if (le32(buf, i) == 0x06054b50) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string::npos) throw GtfsError(path + " is not a zip archive");

  const std::uint16_t count = le16(buf, eocd + 10);
  std::size_t at = le32(buf, eocd + 16);
  std::map<std::string, std::string> members;
  for (std::uint16_t n = 0; n < count; ++n) {
    if (le32(buf, at) != 0x02014b50) throw GtfsError(path + ": bad central directory");
    const std::uint16_t method = le16(buf, at + 10);
    const std::uint32_t csize = le32(buf, at + 20);
    const std::uint32_t usize = le32(buf, at + 24);
    const std::uint16_t name_len = le16(buf, at + 28);
    const std::uint16_t extra_len = le16(buf, at + 30);
    const std::uint16_t comment_len = le16(buf, at + 32);
    const std::uint32_t local = le32(buf, at + 42);
    if (at + 46 + name_len > buf.size()) throw GtfsError(path + ": bad central directory");
    std::string name = buf.substr(at + 46, name_len);
    at += 46 + name_len + extra_len + comment_len;

    if (!name.empty() && name.back() == '/') continue;
    if (le32(buf, local) != 0x04034b50) throw GtfsError(path + ": bad local header for " + name);
    const std::size_t data = local + 30 + le16(buf, local + 26) + le16(buf, local + 28);
    if (data + csize > buf.size()) throw GtfsError(path + ": truncated member " + name);

    if (method == 0) {
      members[name] = buf.substr(data, csize);
    } else if (method == 8) {
      members[name] = inflate_raw(buf.data() + data, csize, usize);
    } else {
      throw GtfsError(path + ": unsupported compression method for " + name);
    }
  }
  return members;
}

GtfsStatic parse_gtfs_tables(const std::string& routes_txt, const std::string& trips_txt,
                             const std::optional<std::string>& shapes_txt) {
  GtfsStatic out;

  const auto routes = parse_table(routes_txt, "routes.txt");
  const Columns rc(routes, "routes.txt");
  const auto route_col = rc.require("route_id");
  for (const auto& row : routes.rows) out.route_ids.push_back(row[route_col]);

  const auto trips = parse_table(trips_txt, "trips.txt");
  const Columns tc(trips, "trips.txt");
  const auto trip_route = tc.require("route_id");
  const auto trip_id = tc.require("trip_id");
  const auto trip_shape = tc.find("shape_id");
  for (const auto& row : trips.rows) {
    TripRow t{row[trip_id], row[trip_route], std::nullopt};
    if (trip_shape && !row[*trip_shape].empty()) t.shape_id = row[*trip_shape];
    out.trips.push_back(std::move(t));
  }

  if (!shapes_txt) return out;
  const auto shapes = parse_table(*shapes_txt, "shapes.txt");
  const Columns sc(shapes, "shapes.txt");
  const auto sid = sc.require("shape_id");
  const auto slat = sc.require("shape_pt_lat");
  const auto slon = sc.require("shape_pt_lon");
  const auto sseq = sc.require("shape_pt_sequence");

  std::map<std::string, std::vector<std::pair<long long, ShapePoint>>> grouped;
  for (const auto& row : shapes.rows) {
    grouped[row[sid]].emplace_back(parse_sequence(row[sseq]),
                                   ShapePoint{parse_coordinate(row[slat], "shape_pt_lat"),
                                              parse_coordinate(row[slon], "shape_pt_lon")});
  }
  for (auto& [id, pts] : grouped) {
    std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    const bool in_bounds = std::all_of(pts.begin(), pts.end(), [](const auto& p) {
      return std::isfinite(p.second.latitude) && std::isfinite(p.second.longitude) &&
             std::abs(p.second.latitude) <= 90.0 && std::abs(p.second.longitude) <= 180.0;
    });
    if (pts.size() < 2 || !in_bounds) {
      ++out.rejected_shapes;
      continue;
    }
    RouteShape shape{id, {}};
    shape.points.reserve(pts.size());
    for (const auto& [seq, p] : pts) shape.points.push_back(p);
    out.shapes.push_back(std::move(shape));
  }
  return out;
}

GtfsStatic load_gtfs_static(const std::string& path) {
  std::map<std::string, std::string> tables;
  const fs::path p(path);
  if (fs::is_directory(p)) {
    for (const char* name : {"routes.txt", "trips.txt", "shapes.txt"}) {
      if (fs::exists(p / name)) tables[name] = slurp(p / name);
    }
  } else if (fs::is_regular_file(p)) {
    for (auto& [member, body] : read_zip(path)) {
      const std::string base = fs::path(member).filename().string();
      if (base == "routes.txt" || base == "trips.txt" || base == "shapes.txt") tables[base] = std::move(body);
    }
  } else {
    throw GtfsError("GTFS static bundle not found: " + path);
  }

  for (const char* required : {"routes.txt", "trips.txt"}) {
    if (!tables.contains(required)) throw GtfsError(path + " has no " + required);
  }
  std::optional<std::string> shapes;
  if (auto it = tables.find("shapes.txt"); it != tables.end()) shapes = std::move(it->second);
  return parse_gtfs_tables(tables["routes.txt"], tables["trips.txt"], shapes);
}

}  // namespace idlewatch::audit
