#include "idlewatch/app/pipeline.hpp"

#include <spdlog/spdlog.h>

#include "idlewatch/detect/detector.hpp"

namespace idlewatch::app {

Pipeline::Pipeline(PipelineConfig config, PipelineOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
  config_.validate();
  for (const auto& r : config_.regions) counters_.emplace(r.region_id, std::make_unique<RegionCounters>());
}

Pipeline::~Pipeline() {
  if (started_ && !finished_) {
    request_stop();
    wait();
  }
}

void Pipeline::start() {
  if (started_) return;
  store_ = std::make_unique<store::EventStore>(config_.store_path);
  store_->upsert_agencies(config_.agencies);

  std::vector<std::string> regions;
  for (const auto& r : config_.regions) regions.push_back(r.region_id);
  server_ = std::make_unique<api::StreamServer>(
      regions, api::StreamServerOptions{config_.api_address, config_.api_port, config_.api_queue_depth});
  spdlog::info("streaming on ws://{}:{}/events/<region>", config_.api_address, server_->port());

  for (const auto& region : config_.regions) {
    auto& channel = *channels_.emplace_back(std::make_unique<BoundedChannel<FeedSnapshot>>(options_.channel_capacity));
    auto& counters = *counters_.at(region.region_id);
    auto poller = std::make_shared<feed::RegionPoller>(region.region_id, region.sources, region.params.poll_interval,
                                                       options_.clock, options_.fetcher);
    detectors_.emplace_back([this, &region, &channel, &counters] { run_detector(region, channel, counters); });
    pollers_.emplace_back([this, poller, &channel](std::stop_token stop) {
      try {
        poller->run(channel, stop, options_.max_ticks);
      } catch (const std::exception& e) {
        spdlog::error("[{}] poller stopped: {}", poller->region_id(), e.what());
      }
      channel.close();
    });
  }
  started_ = true;
}

void Pipeline::run_detector(const RegionConfig& region, BoundedChannel<FeedSnapshot>& channel,
                            RegionCounters& counters) {
  detect::Detector detector(region.params);
  while (auto snap = channel.receive()) {
    ++counters.snapshots;
    counters.source_errors += snap->source_errors.size();
    auto batch = detector.push(std::move(*snap));
    counters.skipped_snapshots = detector.skipped();
    if (!batch) continue;
    ++counters.batches;

    server_->broadcast(region.region_id, *batch);
    counters.events_broadcast += batch->size();
    try {
      counters.events_inserted += store_->insert_events(*batch);
    } catch (const std::exception& e) {
      ++counters.insert_failures;
      spdlog::error("[{}] insert of {} events failed: {}", region.region_id, batch->size(), e.what());
    }
  }
}

void Pipeline::request_stop() {
  for (auto& p : pollers_) p.request_stop();
}

void Pipeline::wait() {
  if (!started_ || finished_) return;
  for (auto& p : pollers_) {
    if (p.joinable()) p.join();
  }
  for (auto& d : detectors_) {
    if (d.joinable()) d.join();
  }
  server_->shutdown();
  finished_ = true;
}

}  // namespace idlewatch::app
