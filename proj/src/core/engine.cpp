#include "core/engine.hpp"

#include <cmath>

namespace lorawan {

EventHandle Scheduler::schedule(double delay_s, EventAction action) {
  if (delay_s < 0.0) throw std::invalid_argument("negative event delay");
  return schedule_at(clock_ + delay_s, std::move(action));
}

EventHandle Scheduler::schedule_at(double fire_time_s, EventAction action) {
  if (fire_time_s < clock_)
    throw std::invalid_argument("event scheduled in the past");
  if (!action) throw std::invalid_argument("empty event action");
  Entry e{fire_time_s, next_sequence_++, next_id_++};
  queue_.push(e);
  actions_.emplace(e.id, std::move(action));
  return EventHandle{e.id};
}

bool Scheduler::cancel(EventHandle handle) {
  if (!handle.valid()) return false;
  return actions_.erase(handle.id) > 0;
}

std::uint64_t Scheduler::run_until(double t_end_s) {
  if (t_end_s < clock_) throw std::invalid_argument("run_until into the past");
  std::uint64_t executed = 0;
  while (!queue_.empty() && queue_.top().fire_time <= t_end_s) {
    Entry e = queue_.top();
    queue_.pop();
    auto it = actions_.find(e.id);
    if (it == actions_.end()) continue;  // cancelled
    EventAction action = std::move(it->second);
    actions_.erase(it);
    clock_ = e.fire_time;
    if (keep_fired_log_) fired_log_.emplace_back(e.fire_time, e.sequence);
    action();
    ++executed;
  }
  clock_ = t_end_s;
  return executed;
}

double RngStream::uniform() {
  // 53 random bits into [0, 1), the usual double-precision construction.
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int over empty range");
  // Rejection sampling keeps the draw unbiased for any n.
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = gen_();
  } while (v >= limit);
  return v % n;
}

double RngStream::exponential(double mean) {
  if (mean <= 0.0) throw std::invalid_argument("non-positive exponential mean");
  double u;
  do {
    u = uniform();
  } while (u == 0.0);
  return -mean * std::log(u);
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1, u2;
  do {
    u1 = uniform();
  } while (u1 == 0.0);
  u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RngStream& RngProvider::stream(const std::string& name) {
  auto it = streams_.find(name);
  if (it != streams_.end()) return it->second;
  std::uint64_t seed =
      splitmix64(splitmix64(master_seed_) ^ splitmix64(run_index_ * 0x9e3779b97f4a7c15ULL + 1) ^
                 fnv1a(name));
  return streams_.emplace(name, RngStream(seed)).first->second;
}

}  // namespace lorawan
