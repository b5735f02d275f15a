#include "idlewatch/sim/oracle.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace idlewatch::sim {

std::vector<std::vector<IdlingEvent>> oracle_events(const FleetScript& script, const DetectorParams& params,
                                                    const std::vector<EpochSeconds>& poll_times) {
  if (!std::is_sorted(poll_times.begin(), poll_times.end())) {
    throw std::invalid_argument("oracle_events needs sorted poll times");
  }
  params.validate();

  // history[v][k]: vehicle v's state at poll k.
  const std::size_t n = poll_times.size();
  std::vector<std::vector<feed::EncodedVehicle>> history(script.vehicles.size());
  for (std::size_t k = 0; k < n; ++k) {
    auto states = state_at(script, poll_times[k]);
    for (std::size_t v = 0; v < states.size(); ++v) history[v].push_back(std::move(states[v]));
  }

  auto same = [](const feed::EncodedVehicle& a, const feed::EncodedVehicle& b) {
    return std::tie(a.route_id, a.trip_id, a.latitude, a.longitude) ==
           std::tie(b.route_id, b.trip_id, b.latitude, b.longitude);
  };

  const std::size_t h = static_cast<std::size_t>(params.horizon);
  std::vector<std::vector<IdlingEvent>> batches(n);
  for (const auto& samples : history) {
    std::size_t start = 0;
    while (start < n) {
      std::size_t end = start + 1;
      while (end < n && same(samples[end], samples[start])) ++end;
      const std::size_t run = end - start;
      if (run >= h + 2) {
        const auto& s = samples[start];
        for (std::size_t k = start + h + 1; k < end; ++k) {
          IdlingEvent ev;
          ev.iata_id = script.iata_id;
          ev.vehicle_id = s.vehicle_id;
          if (!s.route_id.empty()) ev.route_id = s.route_id;
          if (!s.trip_id.empty()) ev.trip_id = s.trip_id;
          ev.latitude = static_cast<double>(s.latitude);
          ev.longitude = static_cast<double>(s.longitude);
          ev.datetime = poll_times[start];
          ev.duration = static_cast<std::int64_t>(k - start) * params.poll_interval;
          batches[k].push_back(std::move(ev));
        }
      }
      start = end;
    }
  }
  return batches;
}

}  // namespace idlewatch::sim
