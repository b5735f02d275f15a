#pragma once

#include <compare>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "idlewatch/model.hpp"

namespace idlewatch::detect {

class OutOfOrderSnapshot : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The attribute tuple compared between snapshots: vehicle_id, route_id,
/// trip_id, latitude, longitude, scoped by the fleet's iata_id.
struct StationaryTuple {
  std::string iata_id;
  std::string vehicle_id;
  std::optional<std::string> route_id;
  std::optional<std::string> trip_id;
  double latitude = 0.0;
  double longitude = 0.0;

  auto operator<=>(const StationaryTuple&) const = default;
  bool operator==(const StationaryTuple&) const = default;
};

StationaryTuple tuple_of(const VehicleRecord& rec);

/// True when both records describe the same vehicle with identical ids and
/// coordinates within `epsilon` degrees (exact equality when epsilon is 0).
bool same_tuple(const StationaryTuple& a, const StationaryTuple& b, double epsilon = 0.0);

/// Rolling window d_0 .. d_{h+1} of the most recent snapshots.
class BufferState {
 public:
  explicit BufferState(DetectorParams params);

  const DetectorParams& params() const { return params_; }
  std::size_t size() const { return slots_.size(); }
  bool ready() const { return slots_.size() == params_.buffer_length(); }

  /// d_i, oldest first.
  const FeedSnapshot& slot(std::size_t i) const { return *slots_.at(i).snapshot; }
  /// Position of d_i in the overall snapshot stream (0-based).
  std::uint64_t sequence(std::size_t i) const { return slots_.at(i).sequence; }

 private:
  struct Slot {
    std::shared_ptr<const FeedSnapshot> snapshot;
    std::uint64_t sequence;
  };

  friend struct PushResult push_snapshot(BufferState state, FeedSnapshot snap);

  DetectorParams params_;
  std::deque<Slot> slots_;
  std::uint64_t next_sequence_ = 0;
};

struct PushResult {
  BufferState state;
  bool ready;
};

/// Appends `snap` as the newest slot, evicting the oldest once the window
/// holds h+2 snapshots. Throws OutOfOrderSnapshot if snap.poll_time is older
/// than the newest slot.
PushResult push_snapshot(BufferState state, FeedSnapshot snap);

/// Records of A whose full tuple also appears in B, in key order.
std::vector<StationaryTuple> intersect_stationary(const FeedSnapshot& a, const FeedSnapshot& b,
                                                  double epsilon = 0.0);

/// A member of the persistent candidate set H.
struct CandidateEntry {
  StationaryTuple attrs;
  /// Record timestamp of the vehicle in the d_0 snapshot where the pair
  /// first matched.
  EpochSeconds first_stationary_at = 0;
  /// Stream position of that d_0 snapshot; durations are counted in steps
  /// from here.
  std::uint64_t first_sequence = 0;
  int miss_count = 0;
  int consecutive_hits = 0;
};

using CandidateSet = std::map<StationaryTuple, CandidateEntry>;

struct StepResult {
  std::vector<IdlingEvent> events;
  CandidateSet candidates;
};

/// One subsetting step over a ready buffer: A = d_0, B = d_h, C = d_{h+1}.
/// Adds A∩B to H, updates miss counters against C, evicts entries whose
/// counter reaches m, and returns Y = H∩C as events.
StepResult step(const BufferState& state, CandidateSet candidates);

/// Stateful driver composing push_snapshot and step over a snapshot stream.
class Detector {
 public:
  explicit Detector(DetectorParams params);

  /// Returns the tick's event batch (possibly empty) once the buffer is
  /// warm, nullopt during warm-up or when `snap` is out of order (logged and
  /// skipped).
  std::optional<std::vector<IdlingEvent>> push(FeedSnapshot snap);

  const BufferState& buffer() const { return buffer_; }
  const CandidateSet& candidates() const { return candidates_; }
  std::uint64_t skipped() const { return skipped_; }

 private:
  BufferState buffer_;
  CandidateSet candidates_;
  std::uint64_t skipped_ = 0;
};

/// Offline helper: one batch per post-warm-up tick.
std::vector<std::vector<IdlingEvent>> run_detector(std::vector<FeedSnapshot> snapshots,
                                                   const DetectorParams& params);

}  // namespace idlewatch::detect
