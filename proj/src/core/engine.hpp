// Deterministic discrete-event scheduler and seeded random-number streams.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace lorawan {

using EventAction = std::function<void()>;

struct EventHandle {
  std::uint64_t id = 0;
  bool valid() const { return id != 0; }
};

// Priority queue of timed callbacks.  Events at the same fire time run in the
// order they were scheduled, so a run is fully reproducible: the executed
// (time, sequence) trace is a pure function of the scheduled workload.
class Scheduler {
 public:
  // Relative scheduling; delay must be >= 0.
  EventHandle schedule(double delay_s, EventAction action);
  // Absolute scheduling; fire_time must not be in the past.
  EventHandle schedule_at(double fire_time_s, EventAction action);

  // True if the event was still pending.  Cancelling a fired or already
  // cancelled event returns false and is otherwise a no-op.
  bool cancel(EventHandle handle);

  // Executes all events with fire_time <= t_end in order, then advances the
  // clock to t_end.  Events scheduled while running are honoured if they fall
  // inside the horizon.  Returns the number of events executed.
  std::uint64_t run_until(double t_end_s);

  double now() const { return clock_; }
  std::size_t pending() const { return actions_.size(); }

  // Executed (fire_time, sequence) pairs; used by determinism checks.
  const std::vector<std::pair<double, std::uint64_t>>& fired_log() const {
    return fired_log_;
  }
  void enable_fired_log(bool on) { keep_fired_log_ = on; }

 private:
  struct Entry {
    double fire_time;
    std::uint64_t sequence;
    std::uint64_t id;
    bool operator>(const Entry& o) const {
      if (fire_time != o.fire_time) return fire_time > o.fire_time;
      return sequence > o.sequence;
    }
  };

  double clock_ = 0.0;
  std::uint64_t next_sequence_ = 0;
  std::uint64_t next_id_ = 1;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue_;
  std::unordered_map<std::uint64_t, EventAction> actions_;
  bool keep_fired_log_ = false;
  std::vector<std::pair<double, std::uint64_t>> fired_log_;
};

// One named random stream.  All draws are hand-rolled on top of the raw
// 64-bit generator output so results are identical across standard libraries.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  std::uint64_t uniform_int(std::uint64_t n);  // [0, n), n > 0
  double exponential(double mean);
  double normal();                        // standard normal, Box-Muller

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Named streams derived from (master_seed, run_index, stream name).  A
// stream's sequence depends only on those three values, never on the order
// in which other streams are created or used.
class RngProvider {
 public:
  RngProvider(std::uint64_t master_seed, std::uint64_t run_index)
      : master_seed_(master_seed), run_index_(run_index) {}

  RngStream& stream(const std::string& name);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t run_index() const { return run_index_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t run_index_;
  std::map<std::string, RngStream> streams_;
};

}  // namespace lorawan
