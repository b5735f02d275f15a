#include "idlewatch/detect/detector.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace idlewatch::detect {

StationaryTuple tuple_of(const VehicleRecord& rec) {
  return {rec.iata_id, rec.vehicle_id, rec.route_id, rec.trip_id, rec.latitude, rec.longitude};
}

bool same_tuple(const StationaryTuple& a, const StationaryTuple& b, double epsilon) {
  if (a.iata_id != b.iata_id || a.vehicle_id != b.vehicle_id || a.route_id != b.route_id ||
      a.trip_id != b.trip_id) {
    return false;
  }
  if (epsilon == 0.0) return a.latitude == b.latitude && a.longitude == b.longitude;
  return std::fabs(a.latitude - b.latitude) <= epsilon && std::fabs(a.longitude - b.longitude) <= epsilon;
}

BufferState::BufferState(DetectorParams params) : params_(params) { params_.validate(); }

PushResult push_snapshot(BufferState state, FeedSnapshot snap) {
  if (!state.slots_.empty() && snap.poll_time < state.slots_.back().snapshot->poll_time) {
    throw OutOfOrderSnapshot("snapshot at " + std::to_string(snap.poll_time) + " older than " +
                             std::to_string(state.slots_.back().snapshot->poll_time));
  }
  state.slots_.push_back({std::make_shared<const FeedSnapshot>(std::move(snap)), state.next_sequence_++});
  while (state.slots_.size() > state.params_.buffer_length()) state.slots_.pop_front();
  const bool ready = state.ready();
  return {std::move(state), ready};
}

std::vector<StationaryTuple> intersect_stationary(const FeedSnapshot& a, const FeedSnapshot& b,
                                                  double epsilon) {
  std::vector<StationaryTuple> out;
  auto ia = a.records.begin();
  auto ib = b.records.begin();
  // Both maps are ordered by (iata_id, vehicle_id): a single merge pass.
  while (ia != a.records.end() && ib != b.records.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      auto ta = tuple_of(ia->second);
      if (same_tuple(ta, tuple_of(ib->second), epsilon)) out.push_back(std::move(ta));
      ++ia;
      ++ib;
    }
  }
  return out;
}

namespace {

/// Existing entry for the same vehicle whose tuple matches `t`.
CandidateSet::iterator find_matching(CandidateSet& set, const StationaryTuple& t, double epsilon) {
  if (epsilon == 0.0) return set.find(t);
  StationaryTuple probe{t.iata_id, t.vehicle_id, std::nullopt, std::nullopt, -HUGE_VAL, -HUGE_VAL};
  for (auto it = set.lower_bound(probe); it != set.end(); ++it) {
    if (it->first.iata_id != t.iata_id || it->first.vehicle_id != t.vehicle_id) break;
    if (same_tuple(it->first, t, epsilon)) return it;
  }
  return set.end();
}

}  // namespace

StepResult step(const BufferState& state, CandidateSet candidates) {
  if (!state.ready()) throw std::logic_error("step called before the buffer is warm");
  const auto& params = state.params();
  const auto h = static_cast<std::size_t>(params.horizon);
  const FeedSnapshot& a = state.slot(0);
  const FeedSnapshot& b = state.slot(h);
  const FeedSnapshot& c = state.slot(h + 1);
  const std::uint64_t c_sequence = state.sequence(h + 1);

  for (auto& t : intersect_stationary(a, b, params.coordinate_epsilon)) {
    if (find_matching(candidates, t, params.coordinate_epsilon) != candidates.end()) continue;
    CandidateEntry entry;
    entry.attrs = t;
    entry.first_stationary_at = a.records.at(VehicleKey{t.iata_id, t.vehicle_id}).timestamp;
    entry.first_sequence = state.sequence(0);
    candidates.emplace(std::move(t), std::move(entry));
  }

  StepResult result;
  for (auto it = candidates.begin(); it != candidates.end();) {
    CandidateEntry& entry = it->second;
    auto rec = c.records.find(VehicleKey{entry.attrs.iata_id, entry.attrs.vehicle_id});
    const bool in_c = rec != c.records.end() &&
                      same_tuple(entry.attrs, tuple_of(rec->second), params.coordinate_epsilon);
    if (in_c) {
      entry.miss_count = 0;
      IdlingEvent ev;
      ev.iata_id = entry.attrs.iata_id;
      ev.vehicle_id = entry.attrs.vehicle_id;
      ev.route_id = entry.attrs.route_id;
      ev.trip_id = entry.attrs.trip_id;
      ev.latitude = entry.attrs.latitude;
      ev.longitude = entry.attrs.longitude;
      ev.datetime = entry.first_stationary_at;
      // Steps elapsed since the first A snapshot. Equals (h+1)*r + hits*r
      // for an uninterrupted episode.
      ev.duration = static_cast<std::int64_t>(c_sequence - entry.first_sequence) * params.poll_interval;
      result.events.push_back(std::move(ev));
      ++entry.consecutive_hits;
      ++it;
    } else {
      ++entry.miss_count;
      entry.consecutive_hits = 0;
      if (entry.miss_count >= params.eviction_bound) {
        it = candidates.erase(it);
      } else {
        ++it;
      }
    }
  }
  result.candidates = std::move(candidates);
  return result;
}

Detector::Detector(DetectorParams params) : buffer_(params) {}

std::optional<std::vector<IdlingEvent>> Detector::push(FeedSnapshot snap) {
  try {
    auto pushed = push_snapshot(buffer_, std::move(snap));
    buffer_ = std::move(pushed.state);
    if (!pushed.ready) return std::nullopt;
  } catch (const OutOfOrderSnapshot& e) {
    ++skipped_;
    spdlog::warn("skipping tick: {}", e.what());
    return std::nullopt;
  }
  auto stepped = step(buffer_, std::move(candidates_));
  candidates_ = std::move(stepped.candidates);
  return std::move(stepped.events);
}

std::vector<std::vector<IdlingEvent>> run_detector(std::vector<FeedSnapshot> snapshots,
                                                   const DetectorParams& params) {
  Detector detector(params);
  std::vector<std::vector<IdlingEvent>> batches;
  for (auto& snap : snapshots) {
    if (auto batch = detector.push(std::move(snap))) batches.push_back(std::move(*batch));
  }
  return batches;
}

}  // namespace idlewatch::detect
