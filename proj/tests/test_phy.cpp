#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <utility>
#include <vector>

#include "core/phy.hpp"

using namespace lorawan;
using doctest::Approx;

namespace {

constexpr double kNoise = -123.030899869919438;

// Three-node bench: node 0 transmits, node 1 listens, node 2 interferes.
// Received power is a plain (tx, rx) lookup so every test controls its own
// geometry-free link budget.
struct Bench {
  Scheduler sched;
  ErrorModelTable table = ErrorModelTable::builtin();
  std::map<std::pair<int, int>, double> power_dbm;
  Medium medium{sched, table,
                [this](int tx, int rx) {
                  auto it = power_dbm.find({tx, rx});
                  return it == power_dbm.end() ? -200.0 : it->second;
                },
                kNoise};
  RngStream rng_tx{101}, rng_rx{102}, rng_int{103};
  Phy tx{0, "tx", rng_tx};
  Phy rx{1, "rx", rng_rx};
  Phy interferer{2, "int", rng_int};

  std::vector<ArrivalDecision> arrivals;
  std::vector<std::pair<double, bool>> completions;  // (time, success)
  std::vector<std::uint64_t> aborted;

  Bench() {
    medium.attach(&tx);
    medium.attach(&rx);
    medium.attach(&interferer);
    rx.hooks().on_arrival = [this](const SignalRecord&, ArrivalDecision d) {
      arrivals.push_back(d);
    };
    rx.hooks().on_rx_complete = [this](const SignalRecord&, bool success) {
      completions.emplace_back(sched.now(), success);
    };
    rx.hooks().on_rx_aborted = [this](const SignalRecord& s) { aborted.push_back(s.signal_id); };
  }

  LoRaTxParams sf7_params() const {
    LoRaTxParams p;
    p.sf = 7;
    p.cr = 1;
    return p;
  }
};

}  // namespace

TEST_CASE("transmit drives the transmitter state machine") {
  Bench b;
  Frame f;
  CHECK_THROWS_AS(b.medium.transmit(b.tx, b.sf7_params(), 21, f), std::logic_error);

  b.tx.set_state(PhyState::kTxOn);
  bool tx_done = false;
  b.tx.hooks().on_tx_complete = [&](const SignalRecord& s) {
    tx_done = true;
    CHECK(b.sched.now() == Approx(s.end_time));
  };
  auto sig = b.medium.transmit(b.tx, b.sf7_params(), 21, f);
  CHECK(b.tx.state() == PhyState::kBusyTx);
  CHECK(b.medium.active_count() == 1);
  CHECK(sig->end_time == Approx(0.056576).epsilon(1e-12));  // 21-byte SF7 air time
  CHECK_THROWS_AS(b.medium.transmit(b.tx, b.sf7_params(), 21, f), std::logic_error);

  b.sched.run_until(1.0);
  CHECK(tx_done);
  CHECK(b.tx.state() == PhyState::kTxOn);
  CHECK(b.medium.active_count() == 0);
}

TEST_CASE("a listening phy locks onto a clean signal and receives it") {
  Bench b;
  b.power_dbm[{0, 1}] = kNoise + 13.0;
  b.tx.set_state(PhyState::kTxOn);
  b.rx.tune(kUplinkChannelHz, 7);
  b.rx.set_state(PhyState::kRxOn);

  b.medium.transmit(b.tx, b.sf7_params(), 21, Frame{});
  REQUIRE(b.arrivals.size() == 1);
  CHECK(b.arrivals[0] == ArrivalDecision::kLock);
  CHECK(b.rx.state() == PhyState::kBusyRx);
  REQUIRE(b.rx.locked_signal() != nullptr);

  b.sched.run_until(1.0);
  REQUIRE(b.completions.size() == 1);
  CHECK(b.completions[0].first == Approx(0.056576).epsilon(1e-12));
  CHECK(b.completions[0].second);  // 13 dB SNR: error probability is negligible
  CHECK(b.rx.state() == PhyState::kRxOn);
}

TEST_CASE("chunks partition the payload bits exactly") {
  Bench b;
  b.power_dbm[{0, 1}] = kNoise + 13.0;
  b.tx.set_state(PhyState::kTxOn);
  b.rx.tune(kUplinkChannelHz, 7);
  b.rx.set_state(PhyState::kRxOn);

  double total_bits = 0.0;
  b.rx.hooks().on_rx_complete = [&](const SignalRecord&, bool) {
    for (const auto& c : b.rx.chunks()) total_bits += c.n_bits;
    CHECK(b.rx.chunks().size() == 1);
    CHECK(b.rx.chunks()[0].sinr_db == Approx(13.0).epsilon(1e-12));
  };
  b.medium.transmit(b.tx, b.sf7_params(), 21, Frame{});
  b.sched.run_until(1.0);
  CHECK(total_bits == Approx(8.0 * 21).epsilon(1e-12));
}

TEST_CASE("arrival decisions cover the ignore taxonomy") {
  SUBCASE("receiver not listening") {
    Bench b;
    b.power_dbm[{0, 1}] = kNoise + 13.0;
    b.tx.set_state(PhyState::kTxOn);
    b.rx.tune(kUplinkChannelHz, 7);  // stays TRX_OFF
    b.medium.transmit(b.tx, b.sf7_params(), 21, Frame{});
    REQUIRE(b.arrivals.size() == 1);
    CHECK(b.arrivals[0] == ArrivalDecision::kIgnoreUnavailable);
  }
  SUBCASE("spreading-factor mismatch") {
    Bench b;
    b.power_dbm[{0, 1}] = kNoise + 13.0;
    b.tx.set_state(PhyState::kTxOn);
    b.rx.tune(kUplinkChannelHz, 8);
    b.rx.set_state(PhyState::kRxOn);
    b.medium.transmit(b.tx, b.sf7_params(), 21, Frame{});
    REQUIRE(b.arrivals.size() == 1);
    CHECK(b.arrivals[0] == ArrivalDecision::kIgnoreOtherParams);
    CHECK(b.rx.state() == PhyState::kRxOn);
  }
  SUBCASE("channel mismatch is filtered before the phy sees it") {
    Bench b;
    b.power_dbm[{0, 1}] = kNoise + 13.0;
    b.tx.set_state(PhyState::kTxOn);
    b.rx.tune(kDownlinkRw2ChannelHz, 7);
    b.rx.set_state(PhyState::kRxOn);
    b.medium.transmit(b.tx, b.sf7_params(), 21, Frame{});
    CHECK(b.arrivals.empty());
  }
  SUBCASE("below the demodulation cut-off") {
    Bench b;
    b.power_dbm[{0, 1}] = kNoise - 13.0;  // SF7/CR1 cut-off sits at -12.2833 dB
    b.tx.set_state(PhyState::kTxOn);
    b.rx.tune(kUplinkChannelHz, 7);
    b.rx.set_state(PhyState::kRxOn);
    b.medium.transmit(b.tx, b.sf7_params(), 21, Frame{});
    REQUIRE(b.arrivals.size() == 1);
    CHECK(b.arrivals[0] == ArrivalDecision::kIgnoreBelowCutoff);
    CHECK(b.rx.state() == PhyState::kRxOn);
  }
  SUBCASE("already locked on another signal") {
    Bench b;
    b.power_dbm[{0, 1}] = kNoise + 13.0;
    b.power_dbm[{2, 1}] = kNoise + 13.0;
    b.tx.set_state(PhyState::kTxOn);
    b.interferer.set_state(PhyState::kTxOn);
    b.rx.tune(kUplinkChannelHz, 7);
    b.rx.set_state(PhyState::kRxOn);
    b.medium.transmit(b.tx, b.sf7_params(), 21, Frame{});
    b.sched.schedule(0.01, [&] { b.medium.transmit(b.interferer, b.sf7_params(), 21, Frame{}); });
    b.sched.run_until(1.0);
    REQUIRE(b.arrivals.size() == 2);
    CHECK(b.arrivals[0] == ArrivalDecision::kLock);
    CHECK(b.arrivals[1] == ArrivalDecision::kIgnoreBusy);
  }
}

TEST_CASE("SINR folds concurrent co-channel power into the denominator") {
  Bench b;
  b.power_dbm[{0, 1}] = kNoise + 20.0;
  b.power_dbm[{2, 1}] = kNoise + 20.0;
  b.tx.set_state(PhyState::kTxOn);
  b.interferer.set_state(PhyState::kTxOn);
  b.rx.tune(kUplinkChannelHz, 7);
  b.rx.set_state(PhyState::kRxOn);

  auto target = b.medium.transmit(b.tx, b.sf7_params(), 21, Frame{});
  CHECK(b.medium.compute_sinr(b.rx, *target, 0.0) == Approx(20.0).epsilon(1e-12));

  b.sched.schedule(0.02, [&] {
    LoRaTxParams long_params;  // SF12 emission outlasting the SF7 target
    long_params.sf = 12;
    long_params.cr = 1;
    b.medium.transmit(b.interferer, long_params, 21, Frame{});
    // Equal-power interferer 20 dB over noise: 10*log10(100 / 101).
    CHECK(b.medium.compute_sinr(b.rx, *target, b.sched.now()) ==
          Approx(-0.043213737826425784).epsilon(1e-12));
  });

  b.sched.run_until(2.0);
  REQUIRE(b.completions.size() == 1);
  // Capture: the SINR stays miles above the cut-off, so the overlap does
  // not destroy the locked reception.
  CHECK(b.completions[0].second);
  REQUIRE(b.rx.chunks().size() == 2);
  CHECK(b.rx.chunks()[0].sinr_db == Approx(20.0).epsilon(1e-12));
  CHECK(b.rx.chunks()[1].sinr_db == Approx(-0.043213737826425784).epsilon(1e-12));
  double total = 0.0;
  for (const auto& c : b.rx.chunks()) total += c.n_bits;
  CHECK(total == Approx(8.0 * 21).epsilon(1e-12));
}

TEST_CASE("reception just above the cut-off is destroyed by the chunk draw") {
  Bench b;
  // BER ~= 0.097 per bit over 168 bits: survival odds are ~4e-8.
  b.power_dbm[{0, 1}] = kNoise + b.table.snr_cutoff_db(7, 1) + 0.1;
  b.tx.set_state(PhyState::kTxOn);
  b.rx.tune(kUplinkChannelHz, 7);
  b.rx.set_state(PhyState::kRxOn);
  b.medium.transmit(b.tx, b.sf7_params(), 21, Frame{});
  b.sched.run_until(1.0);
  REQUIRE(b.arrivals.size() == 1);
  CHECK(b.arrivals[0] == ArrivalDecision::kLock);
  REQUIRE(b.completions.size() == 1);
  CHECK_FALSE(b.completions[0].second);
}

TEST_CASE("cancel_rx abandons a locked reception") {
  Bench b;
  b.power_dbm[{0, 1}] = kNoise + 13.0;
  b.tx.set_state(PhyState::kTxOn);
  b.rx.tune(kUplinkChannelHz, 7);
  b.rx.set_state(PhyState::kRxOn);
  auto sig = b.medium.transmit(b.tx, b.sf7_params(), 21, Frame{});
  b.sched.schedule(0.02, [&] { b.rx.cancel_rx(); });
  b.sched.run_until(1.0);
  REQUIRE(b.aborted.size() == 1);
  CHECK(b.aborted[0] == sig->signal_id);
  CHECK(b.completions.empty());
  CHECK(b.rx.state() == PhyState::kTrxOff);
  CHECK(b.rx.locked_signal() == nullptr);
}

TEST_CASE("cancel_tx truncates the in-flight signal") {
  Bench b;
  b.power_dbm[{0, 1}] = kNoise + 13.0;
  b.tx.set_state(PhyState::kTxOn);
  b.rx.tune(kUplinkChannelHz, 7);
  b.rx.set_state(PhyState::kRxOn);
  bool tx_done = false;
  b.tx.hooks().on_tx_complete = [&](const SignalRecord&) { tx_done = true; };
  b.medium.transmit(b.tx, b.sf7_params(), 21, Frame{});
  b.sched.schedule(0.03, [&] { b.tx.cancel_tx(); });
  b.sched.run_until(1.0);
  CHECK_FALSE(tx_done);
  CHECK(b.tx.state() == PhyState::kTrxOff);
  CHECK(b.medium.active_count() == 0);
  // The listener's reception closes at the truncation instant.
  REQUIRE(b.completions.size() == 1);
  CHECK(b.completions[0].first == Approx(0.03).epsilon(1e-12));
}

TEST_CASE("state machine rejects illegal requests") {
  Bench b;
  CHECK_THROWS_AS(b.rx.set_state(PhyState::kBusyRx), std::logic_error);
  CHECK_THROWS_AS(b.rx.set_state(PhyState::kBusyTx), std::logic_error);
  b.rx.set_state(PhyState::kIdle);
  CHECK_THROWS_AS(b.rx.set_state(PhyState::kRxOn), std::logic_error);  // must pass TRX_OFF
  b.rx.set_state(PhyState::kIdle);  // same-state request is a no-op
  b.rx.set_state(PhyState::kTrxOff);
  b.rx.set_state(PhyState::kRxOn);

  CHECK_THROWS_AS(b.rx.cancel_rx(), std::logic_error);
  CHECK_THROWS_AS(b.tx.cancel_tx(), std::logic_error);
  CHECK_THROWS_AS(b.medium.transmit(b.rx, b.sf7_params(), 21, Frame{}), std::logic_error);

  // tune is only legal while not busy.
  b.power_dbm[{0, 1}] = kNoise + 13.0;
  b.rx.tune(kUplinkChannelHz, 7);
  b.tx.set_state(PhyState::kTxOn);
  b.medium.transmit(b.tx, b.sf7_params(), 21, Frame{});
  CHECK(b.rx.state() == PhyState::kBusyRx);
  CHECK_THROWS_AS(b.rx.tune(kUplinkChannelHz, 8), std::logic_error);
  CHECK_THROWS_AS(b.tx.tune(kUplinkChannelHz, 8), std::logic_error);
}

TEST_CASE("phys co-located with the source are never notified") {
  Bench b;
  RngStream rng_second{104};
  Phy second{0, "tx-rx", rng_second};  // same node id as the transmitter
  b.medium.attach(&second);
  int second_arrivals = 0;
  second.hooks().on_arrival = [&](const SignalRecord&, ArrivalDecision) { ++second_arrivals; };
  second.tune(kUplinkChannelHz, 7);
  second.set_state(PhyState::kRxOn);

  b.power_dbm[{0, 1}] = kNoise + 13.0;
  b.tx.set_state(PhyState::kTxOn);
  b.rx.tune(kUplinkChannelHz, 7);
  b.rx.set_state(PhyState::kRxOn);
  b.medium.transmit(b.tx, b.sf7_params(), 21, Frame{});
  b.sched.run_until(1.0);
  CHECK(second_arrivals == 0);
  REQUIRE(b.arrivals.size() == 1);
  CHECK(b.arrivals[0] == ArrivalDecision::kLock);
}
