#include "idlewatch/clock.hpp"

#include <cmath>
#include <condition_variable>
#include <mutex>
#include <thread>

namespace idlewatch {

namespace {
using steady = std::chrono::steady_clock;

steady::duration seconds_to_steady(double s) {
  return std::chrono::duration_cast<steady::duration>(std::chrono::duration<double>(s));
}
}  // namespace

EpochSeconds Clock::now_seconds() const { return static_cast<EpochSeconds>(std::floor(now())); }

void Clock::sleep_until(double t) const { std::this_thread::sleep_until(deadline(t)); }

bool Clock::wait_until(double t, std::stop_token stop) const {
  std::mutex m;
  std::condition_variable_any cv;
  std::unique_lock lock(m);
  cv.wait_until(lock, stop, deadline(t), [] { return false; });
  return !stop.stop_requested();
}

double SystemClock::now() const {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

steady::time_point SystemClock::deadline(double t) const {
  return steady::now() + seconds_to_steady(t - now());
}

ScaledClock::ScaledClock(double start, double scale)
    : start_(start), scale_(scale), origin_(steady::now()) {}

double ScaledClock::now() const {
  const std::chrono::duration<double> real = steady::now() - origin_;
  return start_ + real.count() * scale_;
}

steady::time_point ScaledClock::deadline(double t) const {
  return origin_ + seconds_to_steady((t - start_) / scale_);
}

std::shared_ptr<const Clock> system_clock() {
  static const auto instance = std::make_shared<const SystemClock>();
  return instance;
}

}  // namespace idlewatch
