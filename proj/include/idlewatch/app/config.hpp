#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "idlewatch/audit/battery.hpp"
#include "idlewatch/feed/poller.hpp"
#include "idlewatch/model.hpp"

namespace idlewatch::app {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RegionConfig {
  std::string region_id;
  DetectorParams params;
  std::vector<feed::SourceConfig> sources;
};

struct PipelineConfig {
  DetectorParams defaults;
  std::vector<RegionConfig> regions;
  std::vector<AgencyInfo> agencies;
  std::string store_path = "idlewatch.db";
  std::string api_address = "127.0.0.1";
  std::uint16_t api_port = 8765;
  std::size_t api_queue_depth = 64;
  /// Optional audit inputs.
  double audit_d_m = 25.0;
  std::vector<audit::CityBundle> audit_cities;

  /// Throws ConfigError on duplicate region ids, invalid parameters or
  /// sources, or sources whose iata_id has no agency row.
  void validate() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Process environment.
std::optional<std::string> getenv_lookup(const std::string& name);

/// Parses the JSON configuration:
///
///   {
///     "params": {"r": 30, "h": 1, "m": 10},
///     "store": "events.db",
///     "api": {"bind": "127.0.0.1", "port": 8765, "queue_depth": 64},
///     "agencies": [{"iata_id": "NYC", "agency": "MTA", "city": "New York",
///                   "country": "United States", "region": "United States East",
///                   "continent": "North America"}],
///     "regions": [{"region_id": "us-east", "params": {"r": 30},
///                  "sources": [{"iata_id": "NYC", "endpoint_url": "https://...",
///                               "auth": {"header": "x-api-key", "secret_env": "MTA_KEY"}}]}],
///     "audit": {"d_m": 25, "cities": [{"city": "New York", "region": "us-east",
///                                       "gtfs": "gtfs/nyc.zip"}]}
///   }
///
/// Region params override the global ones key by key. An auth block holds
/// either a literal "secret" or "secret_env", the name of an environment
/// variable resolved through `env`. Relative store and gtfs paths resolve
/// against `base_dir` when it is non-empty.
PipelineConfig parse_config(const std::string& text, const EnvLookup& env = getenv_lookup,
                            const std::string& base_dir = "");
PipelineConfig load_config(const std::string& path, const EnvLookup& env = getenv_lookup);

/// Replaces r, h and/or m in the defaults and every region, then validates.
void apply_overrides(PipelineConfig& config, std::optional<int> r, std::optional<int> h, std::optional<int> m);

}  // namespace idlewatch::app
