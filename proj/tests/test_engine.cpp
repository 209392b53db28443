#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "core/engine.hpp"

using namespace lorawan;

TEST_CASE("events run in time order regardless of scheduling order") {
  Scheduler sched;
  std::vector<int> order;
  sched.schedule(3.0, [&] { order.push_back(3); });
  sched.schedule(1.0, [&] { order.push_back(1); });
  sched.schedule(2.0, [&] { order.push_back(2); });
  CHECK(sched.run_until(10.0) == 3);
  CHECK(order == std::vector<int>{1, 2, 3});
  CHECK(sched.now() == 10.0);
}

TEST_CASE("same fire time preserves scheduling order") {
  Scheduler sched;
  std::vector<int> order;
  for (int i = 0; i < 20; ++i) sched.schedule(5.0, [&order, i] { order.push_back(i); });
  sched.run_until(5.0);
  for (int i = 0; i < 20; ++i) CHECK(order[i] == i);
}

TEST_CASE("events scheduled while running are honoured inside the horizon") {
  Scheduler sched;
  std::vector<double> fired;
  sched.schedule(1.0, [&] {
    fired.push_back(sched.now());
    sched.schedule(1.0, [&] { fired.push_back(sched.now()); });
    sched.schedule(100.0, [&] { fired.push_back(sched.now()); });
  });
  CHECK(sched.run_until(10.0) == 2);
  CHECK(fired == std::vector<double>{1.0, 2.0});
  CHECK(sched.pending() == 1);  // the far one survives for a later horizon
  CHECK(sched.run_until(101.0) == 1);
}

TEST_CASE("cancel removes a pending event exactly once") {
  Scheduler sched;
  int runs = 0;
  auto h = sched.schedule(1.0, [&] { ++runs; });
  CHECK(sched.cancel(h));
  CHECK_FALSE(sched.cancel(h));
  sched.run_until(2.0);
  CHECK(runs == 0);

  auto h2 = sched.schedule(3.0, [&] { ++runs; });  // relative: fires at t = 5
  sched.run_until(6.0);
  CHECK(runs == 1);
  CHECK_FALSE(sched.cancel(h2));  // already fired
}

TEST_CASE("scheduling contract violations throw") {
  Scheduler sched;
  CHECK_THROWS_AS(sched.schedule(-1.0, [] {}), std::invalid_argument);
  CHECK_THROWS_AS(sched.schedule(1.0, EventAction{}), std::invalid_argument);
  sched.run_until(5.0);
  CHECK_THROWS_AS(sched.schedule_at(4.0, [] {}), std::invalid_argument);
  CHECK_THROWS_AS(sched.run_until(1.0), std::invalid_argument);
}

TEST_CASE("fired log records the executed (time, sequence) trace") {
  Scheduler sched;
  sched.enable_fired_log(true);
  sched.schedule(2.0, [] {});
  sched.schedule(1.0, [] {});
  sched.schedule(2.0, [] {});
  sched.run_until(3.0);
  const auto& log = sched.fired_log();
  REQUIRE(log.size() == 3);
  CHECK(log[0].first == 1.0);
  CHECK(log[1].first == 2.0);
  CHECK(log[2].first == 2.0);
  CHECK(log[1].second < log[2].second);
}

TEST_CASE("identical seeds give identical streams") {
  RngStream a(123), b(123);
  for (int i = 0; i < 1000; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("uniform stays in [0, 1) and uniform(lo, hi) in range") {
  RngStream rng(7);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 1000; ++i) {
    double v = rng.uniform(-3.0, 2.0);
    CHECK(v >= -3.0);
    CHECK(v < 2.0);
  }
}

TEST_CASE("uniform_int covers [0, n) without bias artefacts at the edges") {
  RngStream rng(99);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_int(7)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  CHECK_THROWS_AS(rng.uniform_int(0), std::invalid_argument);
}

TEST_CASE("exponential and normal draws have the right first moments") {
  RngStream rng(2024);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += rng.exponential(5.0);
  CHECK(std::abs(sum / n - 5.0) < 0.1);

  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    s1 += x;
    s2 += x * x;
  }
  CHECK(std::abs(s1 / n) < 0.02);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
  CHECK_THROWS_AS(rng.exponential(0.0), std::invalid_argument);
}

TEST_CASE("provider streams depend only on (seed, run, name)") {
  RngProvider a(42, 0), b(42, 0);
  // Touch streams in different orders; sequences must still agree per name.
  double a_x = a.stream("x").uniform();
  double a_y = a.stream("y").uniform();
  double b_y = b.stream("y").uniform();
  double b_x = b.stream("x").uniform();
  CHECK(a_x == b_x);
  CHECK(a_y == b_y);
  CHECK(a_x != a_y);

  RngProvider c(42, 1);
  CHECK(c.stream("x").uniform() != a_x);  // run index matters
  RngProvider d(43, 0);
  CHECK(d.stream("x").uniform() != a_x);  // master seed matters
}

TEST_CASE("a provider stream persists state across lookups") {
  RngProvider p(1, 0);
  double first = p.stream("s").uniform();
  double second = p.stream("s").uniform();
  CHECK(first != second);

  RngProvider q(1, 0);
  RngStream& s = q.stream("s");
  CHECK(s.uniform() == first);
  CHECK(s.uniform() == second);
}
