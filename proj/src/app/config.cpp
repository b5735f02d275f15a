#include "idlewatch/app/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

#include "json.hpp"

namespace idlewatch::app {

using nlohmann::json;

namespace {

void read_params(const json& j, DetectorParams& p) {
  if (j.contains("r")) p.poll_interval = j.at("r").get<int>();
  if (j.contains("h")) p.horizon = j.at("h").get<int>();
  if (j.contains("m")) p.eviction_bound = j.at("m").get<int>();
  if (j.contains("epsilon")) p.coordinate_epsilon = j.at("epsilon").get<double>();
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (base_dir.empty() || path == ":memory:" || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).string();
}

}  // namespace

std::optional<std::string> getenv_lookup(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

void PipelineConfig::validate() const {
  try {
    defaults.validate();
  } catch (const InvalidParams& e) {
    throw ConfigError(std::string("params: ") + e.what());
  }
  if (regions.empty()) throw ConfigError("no regions configured");

  std::set<std::string> iatas;
  for (const auto& a : agencies) {
    if (!is_valid_iata(a.iata_id)) throw ConfigError("agency iata_id '" + a.iata_id + "' is not three uppercase letters");
    if (!iatas.insert(a.iata_id).second) throw ConfigError("agency " + a.iata_id + " listed twice");
  }

  std::set<std::string> ids;
  for (const auto& r : regions) {
    if (r.region_id.empty()) throw ConfigError("region without region_id");
    if (!ids.insert(r.region_id).second) throw ConfigError("duplicate region_id " + r.region_id);
    try {
      r.params.validate();
    } catch (const InvalidParams& e) {
      throw ConfigError("region " + r.region_id + ": " + e.what());
    }
    if (r.sources.empty()) throw ConfigError("region " + r.region_id + " has no sources");
    for (const auto& s : r.sources) {
      try {
        s.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError("region " + r.region_id + ": " + e.what());
      }
      if (!iatas.contains(s.iata_id)) {
        throw ConfigError("source " + s.endpoint_url + " uses iata_id " + s.iata_id + " with no agency entry");
      }
    }
  }
  if (store_path.empty()) throw ConfigError("store path is empty");
  if (!(audit_d_m >= 0)) throw ConfigError("audit d_m must be >= 0");
}

PipelineConfig parse_config(const std::string& text, const EnvLookup& env, const std::string& base_dir) {
  PipelineConfig cfg;
  try {
    const json doc = json::parse(text);
    if (doc.contains("params")) read_params(doc.at("params"), cfg.defaults);
    if (doc.contains("store")) cfg.store_path = resolve(base_dir, doc.at("store").get<std::string>());
    if (doc.contains("api")) {
      const auto& api = doc.at("api");
      cfg.api_address = api.value("bind", cfg.api_address);
      cfg.api_port = api.value("port", cfg.api_port);
      cfg.api_queue_depth = api.value("queue_depth", cfg.api_queue_depth);
    }
    if (doc.contains("agencies")) {
      for (const auto& a : doc.at("agencies")) {
        cfg.agencies.push_back({a.at("iata_id").get<std::string>(), a.at("agency").get<std::string>(),
                                a.at("city").get<std::string>(), a.at("country").get<std::string>(),
                                a.at("region").get<std::string>(), a.at("continent").get<std::string>()});
      }
    }
    for (const auto& r : doc.at("regions")) {
      RegionConfig region;
      region.region_id = r.at("region_id").get<std::string>();
      region.params = cfg.defaults;
      if (r.contains("params")) read_params(r.at("params"), region.params);
      for (const auto& s : r.at("sources")) {
        feed::SourceConfig src;
        src.region_id = region.region_id;
        src.endpoint_url = s.at("endpoint_url").get<std::string>();
        src.iata_id = s.at("iata_id").get<std::string>();
        if (s.contains("auth")) {
          const auto& auth = s.at("auth");
          feed::AuthHeader header{auth.at("header").get<std::string>(), {}};
          if (auth.contains("secret")) {
            header.secret = auth.at("secret").get<std::string>();
          } else if (auth.contains("secret_env")) {
            const auto name = auth.at("secret_env").get<std::string>();
            auto value = env(name);
            if (!value) throw ConfigError("environment variable " + name + " (auth for " + src.endpoint_url + ") is not set");
            header.secret = *value;
          } else {
            throw ConfigError("auth block for " + src.endpoint_url + " needs secret or secret_env");
          }
          src.auth = std::move(header);
        }
        region.sources.push_back(std::move(src));
      }
      cfg.regions.push_back(std::move(region));
    }
    if (doc.contains("audit")) {
      const auto& a = doc.at("audit");
      cfg.audit_d_m = a.value("d_m", cfg.audit_d_m);
      if (a.contains("cities")) {
        for (const auto& c : a.at("cities")) {
          cfg.audit_cities.push_back({c.at("city").get<std::string>(), c.at("region").get<std::string>(),
                                      resolve(base_dir, c.at("gtfs").get<std::string>())});
        }
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::string& path, const EnvLookup& env) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration " + path);
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_config(text, env, std::filesystem::path(path).parent_path().string());
}

void apply_overrides(PipelineConfig& config, std::optional<int> r, std::optional<int> h, std::optional<int> m) {
  auto apply = [&](DetectorParams& p) {
    if (r) p.poll_interval = *r;
    if (h) p.horizon = *h;
    if (m) p.eviction_bound = *m;
  };
  apply(config.defaults);
  for (auto& region : config.regions) apply(region.params);
  config.validate();
}

}  // namespace idlewatch::app
