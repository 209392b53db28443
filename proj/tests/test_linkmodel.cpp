#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "core/linkmodel.hpp"

using namespace lorawan;
using doctest::Approx;

TEST_CASE("symbol timing and modulation bit rate") {
  CHECK(symbol_rate_hz(7) == Approx(976.5625));
  CHECK(symbol_duration_s(12) == Approx(0.032768));
  // Endpoints of the advertised 125 kHz data-rate range.
  CHECK(raw_bit_rate_bps(7) == Approx(6835.9375));
  CHECK(raw_bit_rate_bps(12) == Approx(366.2109375));
  CHECK_THROWS_AS(symbol_rate_hz(6), std::invalid_argument);
  CHECK_THROWS_AS(symbol_rate_hz(13), std::invalid_argument);
}

TEST_CASE("time on air matches hand-computed symbol counts") {
  auto params = [](int sf, int cr) {
    LoRaTxParams p;
    p.sf = sf;
    p.cr = cr;
    return p;
  };
  CHECK(time_on_air_s(params(7, 1), 21) == Approx(0.056576).epsilon(1e-12));
  CHECK(time_on_air_s(params(12, 1), 21) == Approx(1.482752).epsilon(1e-12));
  CHECK(time_on_air_s(params(12, 1), 13) == Approx(1.155072).epsilon(1e-12));
  CHECK(time_on_air_s(params(7, 1), 13) == Approx(0.046336).epsilon(1e-12));
  CHECK(time_on_air_s(params(7, 3), 21) == Approx(0.070912).epsilon(1e-12));
  CHECK(time_on_air_s(params(12, 3), 13) == Approx(1.351680).epsilon(1e-12));
  CHECK(time_on_air_s(params(9, 1), 21) == Approx(0.185344).epsilon(1e-12));
  CHECK(time_on_air_s(params(10, 2), 30) == Approx(0.509952).epsilon(1e-12));
  CHECK_THROWS_AS(time_on_air_s(params(7, 1), 12), std::invalid_argument);
}

TEST_CASE("air time grows with payload and with spreading factor") {
  LoRaTxParams p;
  p.cr = 1;
  for (int sf = 7; sf <= 12; ++sf) {
    p.sf = sf;
    CHECK(time_on_air_s(p, 30) > time_on_air_s(p, 13));
  }
  for (int sf = 7; sf < 12; ++sf) {
    p.sf = sf;
    double faster = time_on_air_s(p, 21);
    p.sf = sf + 1;
    CHECK(time_on_air_s(p, 21) > faster);
  }
}

TEST_CASE("noise floor and log-distance budget") {
  CHECK(default_noise_floor_dbm() == Approx(-123.03089986991944).epsilon(1e-14));
  LinkBudget lb;
  CHECK(lb.path_loss_db(1.0) == Approx(46.6777));
  CHECK(lb.path_loss_db(0.1) == Approx(46.6777));  // clamped below the reference
  CHECK(lb.path_loss_db(6100.0) == Approx(160.23759505032302).epsilon(1e-12));
  CHECK(lb.received_power_dbm(14.0, 6100.0) == Approx(-146.23759505032302).epsilon(1e-12));
  CHECK(lb.snr_db(14.0, 6100.0) == Approx(-23.206695180403585).epsilon(1e-12));
  // Doubling the distance costs 3 * 10 log10(2) = 9.03 dB.
  CHECK(lb.path_loss_db(2000.0) - lb.path_loss_db(1000.0) == Approx(9.030899869919436));
}

TEST_CASE("built-in table covers SF7-12 at both coding rates") {
  const auto& t = ErrorModelTable::builtin();
  CHECK(t.entries().size() == 12);
  for (int sf = 7; sf <= 12; ++sf) {
    CHECK(t.has(sf, 1));
    CHECK(t.has(sf, 3));
    CHECK_FALSE(t.has(sf, 2));
  }
  CHECK_THROWS_AS(t.entry(7, 2), std::out_of_range);
  CHECK(t.entry(7, 1).alpha == Approx(-30.2580));
  CHECK(t.entry(12, 3).beta == Approx(0.4485));
  CHECK(t.snr_cutoff_db(7, 1) == Approx(-12.2833));
  CHECK(t.snr_cutoff_db(12, 1) == Approx(-25.6243));
}

TEST_CASE("bit-error curve matches its closed form and clamps") {
  const auto& t = ErrorModelTable::builtin();
  // Spot values computed independently.
  CHECK(t.ber(7, 1, -5.0) == Approx(5.59913535643462e-08).epsilon(1e-9));
  CHECK(t.ber(7, 1, -12.0) == Approx(0.10434382396403917).epsilon(1e-9));
  CHECK(t.ber(12, 1, -20.0) == Approx(1.3983507464140946e-06).epsilon(1e-9));
  CHECK(t.ber(10, 3, -20.0) == Approx(0.0724528799160023).epsilon(1e-9));
  // Deep in the waterfall the curve clamps at coin flipping.
  CHECK(t.ber(7, 1, -20.0) == 0.5);
  CHECK(t.ber(7, 1, -40.0) == 0.5);
  // High SNR drives the error rate to zero.
  CHECK(t.ber(12, 1, -5.0) == 0.0);
  for (const auto& e : t.entries()) {
    double expected =
        std::pow(10.0, e.alpha * std::exp(e.beta * (e.snr_cutoff_db + 3.0)));
    CHECK(t.ber(e.sf, e.cr, e.snr_cutoff_db + 3.0) ==
          Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("error rate decreases monotonically with SNR") {
  const auto& t = ErrorModelTable::builtin();
  for (const auto& e : t.entries()) {
    double prev = 1.0;
    for (double s = -45.0; s <= 5.0; s += 0.25) {
      double b = t.ber(e.sf, e.cr, s);
      CHECK(b <= prev + 1e-15);
      prev = b;
    }
  }
}

TEST_CASE("stored cut-offs sit at the one-in-a-million point for 13 bytes") {
  const auto& t = ErrorModelTable::builtin();
  for (const auto& e : t.entries()) {
    double pdr = std::pow(1.0 - t.ber(e.sf, e.cr, e.snr_cutoff_db), 108.0);
    CHECK(pdr >= 1e-7);
    CHECK(pdr <= 1e-5);
  }
}

TEST_CASE("chunk survival multiplies over bit counts") {
  const auto& t = ErrorModelTable::builtin();
  double p_all = t.chunk_success_probability(9, 1, -16.0, 168.0);
  double p_a = t.chunk_success_probability(9, 1, -16.0, 100.0);
  double p_b = t.chunk_success_probability(9, 1, -16.0, 68.0);
  CHECK(p_all == Approx(p_a * p_b).epsilon(1e-12));
  CHECK(t.chunk_success_probability(9, 1, -16.0, 0.0) == Approx(1.0));
  // Fractional bit counts interpolate smoothly.
  double p_half = t.chunk_success_probability(9, 1, -16.0, 84.0);
  CHECK(p_half == Approx(std::sqrt(p_all)).epsilon(1e-12));
  CHECK_THROWS_AS(t.chunk_success_probability(9, 1, -16.0, -1.0), std::invalid_argument);
}

TEST_CASE("table validation rejects malformed entries") {
  CHECK_THROWS_AS(ErrorModelTable::from_entries({{7, 1, 1.0, 0.3, -12.0}}),
                  std::invalid_argument);  // alpha must be negative
  CHECK_THROWS_AS(ErrorModelTable::from_entries({{7, 1, -30.0, -0.3, -12.0}}),
                  std::invalid_argument);  // beta must be positive
  CHECK_THROWS_AS(ErrorModelTable::from_entries({{7, 1, -30.0, 0.3, -12.0},
                                                 {7, 1, -31.0, 0.3, -12.0}}),
                  std::invalid_argument);  // duplicate row
  CHECK_THROWS_AS(ErrorModelTable::from_entries({}), std::invalid_argument);
}

TEST_CASE("CSV round trip preserves the table") {
  const std::string path = "linkmodel_roundtrip.csv";
  ErrorModelTable::builtin().write_csv(path);
  auto loaded = ErrorModelTable::from_csv(path);
  REQUIRE(loaded.entries().size() == 12);
  for (const auto& e : ErrorModelTable::builtin().entries()) {
    CHECK(loaded.entry(e.sf, e.cr).alpha == Approx(e.alpha).epsilon(1e-12));
    CHECK(loaded.entry(e.sf, e.cr).beta == Approx(e.beta).epsilon(1e-12));
    CHECK(loaded.entry(e.sf, e.cr).snr_cutoff_db ==
          Approx(e.snr_cutoff_db).epsilon(1e-12));
  }
  std::remove(path.c_str());
}

TEST_CASE("CSV loader matches columns by header name") {
  const std::string path = "linkmodel_headers.csv";
  {
    std::ofstream out(path);
    out << "note,beta,sf,alpha,snr_cutoff_db,cr\n";
    out << "x,0.29,7,-30.0,-12.3,1\n";
  }
  auto t = ErrorModelTable::from_csv(path);
  CHECK(t.entry(7, 1).beta == Approx(0.29));
  std::remove(path.c_str());

  {
    std::ofstream out(path);
    out << "sf,cr,alpha\n7,1,-30.0\n";
  }
  CHECK_THROWS_AS(ErrorModelTable::from_csv(path), std::runtime_error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(ErrorModelTable::from_csv("does_not_exist.csv"), std::runtime_error);
}
