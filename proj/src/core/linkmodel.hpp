// Link-level abstractions: transmission parameters, the fitted BER model,
// log-distance propagation and LoRa time-on-air.
#pragma once

#include <string>
#include <vector>

namespace lorawan {

inline constexpr double kDefaultBandwidthHz = 125e3;
inline constexpr double kUplinkChannelHz = 868.1e6;
inline constexpr double kDownlinkRw2ChannelHz = 869.525e6;
inline constexpr int kRw2SpreadingFactor = 12;
inline constexpr int kMinPhyPayloadBytes = 13;
inline constexpr int kPreambleSymbols = 8;
inline constexpr double kDefaultTxPowerDbm = 14.0;

struct LoRaTxParams {
  int sf = 12;
  int cr = 1;  // coding-rate index: payload bits carried per 4+cr coded bits
  double bandwidth_hz = kDefaultBandwidthHz;
  double channel_hz = kUplinkChannelHz;
  double tx_power_dbm = kDefaultTxPowerDbm;
};

double symbol_rate_hz(int sf, double bandwidth_hz = kDefaultBandwidthHz);
double symbol_duration_s(int sf, double bandwidth_hz = kDefaultBandwidthHz);

// Pre-FEC modulation bit rate, sf bits per symbol.
double raw_bit_rate_bps(int sf, double bandwidth_hz = kDefaultBandwidthHz);

// Full-packet air time: 8-symbol preamble plus 4.25 sync symbols plus the
// coded payload, explicit header and payload CRC enabled.  Low-data-rate
// optimisation kicks in automatically when a symbol lasts longer than 16 ms.
double time_on_air_s(const LoRaTxParams& params, int phy_payload_bytes);

// Thermal noise floor for the given bandwidth at a 0 dB receiver noise figure.
double default_noise_floor_dbm(double bandwidth_hz = kDefaultBandwidthHz);

// Log-distance propagation.  Defaults reproduce a 46.6777 dB reference loss
// at 1 m with exponent 3.0; distances below 1 m clamp to the reference loss.
struct LinkBudget {
  double ref_loss_db = 46.6777;
  double path_exponent = 3.0;
  double noise_floor_dbm = -123.030899869919438;  // default_noise_floor_dbm(125 kHz)

  double path_loss_db(double distance_m) const;
  double received_power_dbm(double tx_power_dbm, double distance_m) const;
  double snr_db(double tx_power_dbm, double distance_m) const;
};

struct ErrorModelEntry {
  int sf = 0;
  int cr = 0;
  double alpha = 0.0;  // negative
  double beta = 0.0;   // positive
  double snr_cutoff_db = 0.0;
};

// BER curves per (sf, cr) pair.  The built-in table covers SF7-12 at coding
// rates 4/5 and 4/8; alternative tables can be loaded from CSV, e.g. ones
// refitted from a fresh modem campaign.
class ErrorModelTable {
 public:
  static const ErrorModelTable& builtin();
  static ErrorModelTable from_csv(const std::string& path);
  static ErrorModelTable from_entries(std::vector<ErrorModelEntry> entries);

  bool has(int sf, int cr) const;
  const ErrorModelEntry& entry(int sf, int cr) const;  // throws if unknown
  const std::vector<ErrorModelEntry>& entries() const { return entries_; }

  // log10(BER) = alpha * exp(beta * snr_db), clamped into [0, 0.5].
  double ber(int sf, int cr, double snr_db) const;
  double snr_cutoff_db(int sf, int cr) const;
  // Probability that n_bits consecutive payload bits all survive at the
  // given SNR; n_bits may be fractional for partial-packet accounting.
  double chunk_success_probability(int sf, int cr, double snr_db,
                                   double n_bits) const;

  // Writes the table in the same CSV schema from_csv() accepts.
  void write_csv(const std::string& path) const;

 private:
  std::vector<ErrorModelEntry> entries_;
};

}  // namespace lorawan
