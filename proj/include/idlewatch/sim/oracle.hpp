#pragma once

#include <vector>

#include "idlewatch/model.hpp"
#include "idlewatch/sim/fleet_script.hpp"

namespace idlewatch::sim {

/// Expected detector output for `script` polled at `poll_times`.
///
/// Batch k holds the events due at poll k. For every vehicle the oracle
/// walks its sampled (route, trip, latitude, longitude) history and, for
/// each run of L >= h+2 consecutive equal samples starting at poll s, emits
/// durations (h+1)r, (h+2)r, ..., (L-1)r at polls s+h+1 .. s+L-1, all with
/// datetime = poll_times[s]. Polls are assumed to be r apart.
std::vector<std::vector<IdlingEvent>> oracle_events(const FleetScript& script, const DetectorParams& params,
                                                    const std::vector<EpochSeconds>& poll_times);

}  // namespace idlewatch::sim
