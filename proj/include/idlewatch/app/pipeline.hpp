#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "idlewatch/api/stream_server.hpp"
#include "idlewatch/app/config.hpp"
#include "idlewatch/clock.hpp"
#include "idlewatch/feed/poller.hpp"
#include "idlewatch/store/event_store.hpp"

namespace idlewatch::app {

struct PipelineOptions {
  std::shared_ptr<const Clock> clock = system_clock();
  std::shared_ptr<feed::Fetcher> fetcher = feed::http_fetcher();
  /// Stop each region after this many polls (tests and batch runs).
  std::optional<std::size_t> max_ticks;
  /// Snapshots buffered between a region's poller and detector.
  std::size_t channel_capacity = 16;
};

struct RegionCounters {
  std::atomic<std::uint64_t> snapshots{0};
  std::atomic<std::uint64_t> source_errors{0};
  std::atomic<std::uint64_t> batches{0};
  std::atomic<std::uint64_t> events_broadcast{0};
  std::atomic<std::uint64_t> events_inserted{0};
  std::atomic<std::uint64_t> insert_failures{0};
  std::atomic<std::uint64_t> skipped_snapshots{0};
};

/// Extract -> buffer/subset -> broadcast + write, one thread pair per
/// region, sharing the store and the stream server.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, PipelineOptions options = {});
  ~Pipeline();

  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  /// Opens the store, registers agencies, binds the stream server and starts
  /// every region. Throws on store or bind failure.
  void start();
  /// Asks pollers to stop; detectors drain what was already polled.
  void request_stop();
  /// Blocks until every region has finished, then closes subscriptions.
  void wait();

  const PipelineConfig& config() const { return config_; }
  store::EventStore& store() { return *store_; }
  api::StreamServer& server() { return *server_; }
  const RegionCounters& counters(const std::string& region_id) const { return *counters_.at(region_id); }

 private:
  void run_detector(const RegionConfig& region, BoundedChannel<FeedSnapshot>& channel, RegionCounters& counters);

  PipelineConfig config_;
  PipelineOptions options_;
  std::unique_ptr<store::EventStore> store_;
  std::unique_ptr<api::StreamServer> server_;
  std::map<std::string, std::unique_ptr<RegionCounters>> counters_;
  std::vector<std::unique_ptr<BoundedChannel<FeedSnapshot>>> channels_;
  std::vector<std::jthread> pollers_;
  std::vector<std::jthread> detectors_;
  bool started_ = false;
  bool finished_ = false;
};

}  // namespace idlewatch::app
