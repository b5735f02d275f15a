#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "idlewatch/model.hpp"

namespace idlewatch::api {

class BindFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StreamServerOptions {
  std::string address = "127.0.0.1";
  /// 0 picks an ephemeral port; see StreamServer::port().
  std::uint16_t port = 0;
  /// Batches buffered per subscriber before it is disconnected.
  std::size_t queue_depth = 64;
};

/// Websocket fan-out of detector batches.
///
/// Each region is served at /events/<region_id>; any other path gets a
/// 404 and no upgrade. Every broadcast becomes one text frame holding the
/// batch as a JSON array, delivered in broadcast order. A subscriber whose
/// queue is full is closed (code 1008) without affecting the others.
class StreamServer {
 public:
  StreamServer(std::vector<std::string> regions, StreamServerOptions options = {});
  ~StreamServer();

  StreamServer(const StreamServer&) = delete;
  StreamServer& operator=(const StreamServer&) = delete;

  std::uint16_t port() const;

  /// Queues the batch for every live subscriber of the region. Returns the
  /// number of subscribers that accepted it; an unknown region or no
  /// subscribers yields 0.
  std::size_t broadcast(const std::string& region_id, std::span<const IdlingEvent> batch);

  std::size_t subscriber_count(const std::string& region_id) const;

  /// Polls until the region has at least `n` subscribers or the timeout
  /// elapses.
  bool wait_for_subscribers(const std::string& region_id, std::size_t n,
                            std::chrono::milliseconds timeout) const;

  /// Closes all subscriptions and stops the I/O thread. Idempotent.
  void shutdown();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace idlewatch::api
