#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>

#include "idlewatch/clock.hpp"
#include "idlewatch/sim/fleet_script.hpp"

namespace httplib {
class Server;
}

namespace idlewatch::sim {

class BindFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Serves GET /feed with the script's FeedMessage at the clock's current
/// time. Requests are handled concurrently; the script is read-only.
class SimServer {
 public:
  SimServer(FleetScript script, std::shared_ptr<const Clock> clock, const std::string& host = "127.0.0.1",
            std::uint16_t port = 0);
  ~SimServer();

  SimServer(const SimServer&) = delete;
  SimServer& operator=(const SimServer&) = delete;

  std::uint16_t port() const { return port_; }
  std::string url() const;

  /// While set, /feed answers 503 instead of a payload.
  void set_failing(bool failing) { failing_ = failing; }
  std::uint64_t requests() const { return requests_; }

  void stop();

 private:
  FleetScript script_;
  std::shared_ptr<const Clock> clock_;
  std::unique_ptr<httplib::Server> server_;
  std::string host_;
  std::uint16_t port_ = 0;
  std::atomic<bool> failing_{false};
  std::atomic<std::uint64_t> requests_{0};
  std::thread thread_;
};

/// Writes routes.txt, trips.txt and shapes.txt describing every vehicle's
/// waypoint path (densified to about `spacing_m` metres between points) into
/// directory `dir`, creating it if needed.
void write_gtfs_bundle(const FleetScript& script, const std::string& dir, double spacing_m = 5.0);

}  // namespace idlewatch::sim
