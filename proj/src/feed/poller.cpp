#include "idlewatch/feed/poller.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <future>

#include "idlewatch/feed/gtfs_rt.hpp"

namespace idlewatch::feed {

void SourceConfig::validate() const {
  if (region_id.empty()) throw std::invalid_argument("source has empty region_id");
  if (endpoint_url.empty()) throw std::invalid_argument("source in " + region_id + " has empty endpoint_url");
  if (!is_valid_iata(iata_id)) {
    throw std::invalid_argument("source " + endpoint_url + " has invalid iata_id '" + iata_id + "'");
  }
}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw FetchError("endpoint without scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string HttpFetcher::fetch(const SourceConfig& source, double timeout_s) {
  const auto [origin, path] = split_url(source.endpoint_url);
  httplib::Client client(origin);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(timeout_s > 0 ? timeout_s : 1.0));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (source.auth) headers.emplace(source.auth->name, source.auth->secret);
  auto response = client.Get(path, headers);
  if (!response) throw FetchError(source.endpoint_url + ": " + httplib::to_string(response.error()));
  if (response->status != 200) {
    throw FetchError(source.endpoint_url + ": HTTP " + std::to_string(response->status));
  }
  return std::move(response->body);
}

std::shared_ptr<Fetcher> http_fetcher() { return std::make_shared<HttpFetcher>(); }

FeedSnapshot poll_once(const std::string& region_id, const std::vector<SourceConfig>& sources,
                       Fetcher& fetcher, EpochSeconds poll_time, double timeout_s) {
  std::vector<std::future<DecodeResult>> pending;
  pending.reserve(sources.size());
  for (const auto& source : sources) {
    pending.push_back(std::async(std::launch::async, [&fetcher, &source, timeout_s, poll_time] {
      const std::string body = fetcher.fetch(source, timeout_s);
      return decode_feed(body, source.iata_id, poll_time);
    }));
  }

  FeedSnapshot snapshot;
  snapshot.region_id = region_id;
  snapshot.poll_time = poll_time;
  // Merged in configuration order: on a timestamp tie the later source wins.
  for (std::size_t i = 0; i < pending.size(); ++i) {
    try {
      auto decoded = pending[i].get();
      if (decoded.dropped) {
        spdlog::debug("{}: dropped {} invalid entities", sources[i].endpoint_url, decoded.dropped);
      }
      for (auto& rec : decoded.records) snapshot.merge(std::move(rec));
    } catch (const std::exception& e) {
      snapshot.source_errors.emplace_back(sources[i].endpoint_url, e.what());
    }
  }
  return snapshot;
}

RegionPoller::RegionPoller(std::string region_id, std::vector<SourceConfig> sources, int poll_interval,
                           std::shared_ptr<const Clock> clock, std::shared_ptr<Fetcher> fetcher)
    : region_id_(std::move(region_id)),
      sources_(std::move(sources)),
      poll_interval_(poll_interval),
      clock_(std::move(clock)),
      fetcher_(std::move(fetcher)) {
  if (poll_interval_ < 1) throw InvalidParams("poll interval r must be >= 1");
}

void RegionPoller::run(BoundedChannel<FeedSnapshot>& out, std::stop_token stop,
                       std::optional<std::size_t> max_ticks) {
  const double r = poll_interval_;
  const double timeout = clock_->to_wall_seconds(r / 2.0);
  double next_tick = clock_->now();
  std::size_t ticks = 0;

  while (!stop.stop_requested() && (!max_ticks || ticks < *max_ticks)) {
    const EpochSeconds poll_time = clock_->now_seconds();
    auto snapshot = poll_once(region_id_, sources_, *fetcher_, poll_time, timeout);
    for (const auto& [endpoint, error] : snapshot.source_errors) {
      spdlog::warn("[{}] source {} failed: {}", region_id_, endpoint, error);
    }
    if (!out.send(std::move(snapshot))) break;
    ++ticks;

    next_tick += r;
    // Overrun past the next tick: restart the schedule from now.
    if (next_tick < clock_->now()) next_tick = clock_->now();
    if (!clock_->wait_until(next_tick, stop)) break;
  }
}

}  // namespace idlewatch::feed
