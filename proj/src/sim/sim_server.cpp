#include "idlewatch/sim/sim_server.hpp"

#include <httplib.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include "idlewatch/csv.hpp"

namespace idlewatch::sim {

SimServer::SimServer(FleetScript script, std::shared_ptr<const Clock> clock, const std::string& host,
                     std::uint16_t port)
    : script_(std::move(script)), clock_(std::move(clock)), server_(std::make_unique<httplib::Server>()), host_(host) {
  script_.validate();
  server_->Get("/feed", [this](const httplib::Request&, httplib::Response& res) {
    ++requests_;
    if (failing_) {
      res.status = 503;
      res.set_content("source unavailable", "text/plain");
      return;
    }
    res.set_content(feed_at(script_, clock_->now_seconds()), "application/x-protobuf");
  });

  if (port == 0) {
    const int bound = server_->bind_to_any_port(host_);
    if (bound <= 0) throw BindFailure("cannot bind simulator on " + host_);
    port_ = static_cast<std::uint16_t>(bound);
  } else {
    if (!server_->bind_to_port(host_, port)) {
      throw BindFailure("cannot bind simulator on " + host_ + ":" + std::to_string(port));
    }
    port_ = port;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

SimServer::~SimServer() { stop(); }

std::string SimServer::url() const { return "http://" + host_ + ":" + std::to_string(port_) + "/feed"; }

void SimServer::stop() {
  if (thread_.joinable()) {
    server_->stop();
    thread_.join();
  }
}

void write_gtfs_bundle(const FleetScript& script, const std::string& dir, double spacing_m) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
    return out;
  };

  std::set<std::string> routes;
  for (const auto& v : script.vehicles) {
    if (!v.route_id.empty()) routes.insert(v.route_id);
  }
  {
    auto out = open("routes.txt");
    csv::write_row(out, {"route_id", "route_short_name", "route_type"});
    for (const auto& r : routes) csv::write_row(out, {r, r, "3"});
  }
  {
    auto out = open("trips.txt");
    csv::write_row(out, {"route_id", "service_id", "trip_id", "shape_id"});
    for (const auto& v : script.vehicles) {
      const std::string trip = v.trip_id.empty() ? "trip-" + v.vehicle_id : v.trip_id;
      csv::write_row(out, {v.route_id, "daily", trip, "shape-" + v.vehicle_id});
    }
  }
  {
    auto out = open("shapes.txt");
    csv::write_row(out, {"shape_id", "shape_pt_lat", "shape_pt_lon", "shape_pt_sequence"});
    for (const auto& v : script.vehicles) {
      const std::string id = "shape-" + v.vehicle_id;
      std::vector<std::pair<double, double>> pts;
      const auto& wp = v.waypoints;
      for (std::size_t i = 0; i < wp.size(); ++i) {
        if (i == 0) {
          pts.emplace_back(wp[0].latitude, wp[0].longitude);
          continue;
        }
        const double cos_phi = std::cos(wp[i].latitude * std::numbers::pi / 180.0);
        const double dy = (wp[i].latitude - wp[i - 1].latitude) * 111320.0;
        const double dx = (wp[i].longitude - wp[i - 1].longitude) * 111320.0 * cos_phi;
        const auto steps = std::max<long>(1, std::lround(std::ceil(std::hypot(dx, dy) / spacing_m)));
        for (long k = 1; k <= steps; ++k) {
          const double f = static_cast<double>(k) / static_cast<double>(steps);
          pts.emplace_back(wp[i - 1].latitude + f * (wp[i].latitude - wp[i - 1].latitude),
                           wp[i - 1].longitude + f * (wp[i].longitude - wp[i - 1].longitude));
        }
      }
      if (pts.size() == 1) pts.push_back(pts.front());
      for (std::size_t k = 0; k < pts.size(); ++k) {
        csv::write_row(out, {id, csv::format_double(pts[k].first), csv::format_double(pts[k].second),
                             std::to_string(k + 1)});
      }
    }
  }
}

}  // namespace idlewatch::sim
