#pragma once

#include <chrono>
#include <memory>
#include <stop_token>

#include "idlewatch/model.hpp"

namespace idlewatch {

/// Time source shared by pollers and the fleet simulator. Tests substitute a
/// scaled clock so an hour of feed time runs in seconds of wall time.
class Clock {
 public:
  virtual ~Clock() = default;
  /// Current time in epoch seconds (fractional).
  virtual double now() const = 0;
  /// Wall-clock instant at which now() reaches t.
  virtual std::chrono::steady_clock::time_point deadline(double t) const = 0;
  /// Clock seconds per wall second.
  virtual double rate() const { return 1.0; }

  EpochSeconds now_seconds() const;
  void sleep_until(double t) const;
  /// Returns false if stop was requested before t was reached.
  bool wait_until(double t, std::stop_token stop) const;
  /// Converts a clock-time span to the wall-time span it takes.
  double to_wall_seconds(double clock_seconds) const { return clock_seconds / rate(); }
};

class SystemClock final : public Clock {
 public:
  double now() const override;
  std::chrono::steady_clock::time_point deadline(double t) const override;
};

/// Runs `scale` times faster than wall time, starting at `start` epoch
/// seconds when constructed.
class ScaledClock final : public Clock {
 public:
  ScaledClock(double start, double scale);
  double now() const override;
  std::chrono::steady_clock::time_point deadline(double t) const override;
  double rate() const override { return scale_; }

 private:
  double start_;
  double scale_;
  std::chrono::steady_clock::time_point origin_;
};

std::shared_ptr<const Clock> system_clock();

}  // namespace idlewatch
