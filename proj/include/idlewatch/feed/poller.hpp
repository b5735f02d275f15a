#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <vector>

#include "idlewatch/channel.hpp"
#include "idlewatch/clock.hpp"
#include "idlewatch/model.hpp"

namespace idlewatch::feed {

struct AuthHeader {
  std::string name;
  std::string secret;
};

struct SourceConfig {
  std::string region_id;
  std::string endpoint_url;
  std::optional<AuthHeader> auth;
  /// Stamped on every record from this source; feeds carry no fleet code.
  std::string iata_id;

  /// Throws std::invalid_argument on an empty region or endpoint, or a
  /// malformed IATA code.
  void validate() const;
};

class FetchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Transport used to retrieve one source's payload.
class Fetcher {
 public:
  virtual ~Fetcher() = default;
  /// Returns the response body or throws FetchError. `timeout_s` is wall
  /// time.
  virtual std::string fetch(const SourceConfig& source, double timeout_s) = 0;
};

/// HTTP(S) GET with the optional static auth header.
class HttpFetcher final : public Fetcher {
 public:
  std::string fetch(const SourceConfig& source, double timeout_s) override;
};

std::shared_ptr<Fetcher> http_fetcher();

/// Fetches every source concurrently and merges the decoded records into a
/// single snapshot. Failing sources contribute no records and are listed in
/// snapshot.source_errors.
FeedSnapshot poll_once(const std::string& region_id, const std::vector<SourceConfig>& sources,
                       Fetcher& fetcher, EpochSeconds poll_time, double timeout_s);

/// Per-region polling loop: one snapshot every r clock seconds measured
/// start-to-start, delivered in order over a bounded channel.
class RegionPoller {
 public:
  RegionPoller(std::string region_id, std::vector<SourceConfig> sources, int poll_interval,
               std::shared_ptr<const Clock> clock, std::shared_ptr<Fetcher> fetcher);

  /// Runs until stop is requested or the channel closes. `max_ticks` (if
  /// set) ends the loop after that many snapshots.
  void run(BoundedChannel<FeedSnapshot>& out, std::stop_token stop,
           std::optional<std::size_t> max_ticks = std::nullopt);

  const std::string& region_id() const { return region_id_; }

 private:
  std::string region_id_;
  std::vector<SourceConfig> sources_;
  int poll_interval_;
  std::shared_ptr<const Clock> clock_;
  std::shared_ptr<Fetcher> fetcher_;
};

}  // namespace idlewatch::feed
