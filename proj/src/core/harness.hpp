// Experiment runner: configuration, full-network assembly, message-level
// accounting and CSV output.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/linkmodel.hpp"
#include "core/phy.hpp"
#include "core/scenario.hpp"

namespace lorawan {

struct ExperimentConfig {
  int n_devices = 100;
  int n_gateways = 1;
  double radius_m = 6100.0;
  double us_period_s = 600.0;
  int us_payload_bytes = 8;
  bool us_confirmed = false;
  double ds_mean_iat_s = 0.0;  // <= 0: no downstream data traffic
  int ds_payload_bytes = 8;
  bool ds_confirmed = false;
  std::string sf_strategy = "per_threshold";
  int fixed_sf = 12;
  double per_threshold = 0.01;
  int sf_eval_cr = 3;
  int cr = 1;
  double tx_power_dbm = kDefaultTxPowerDbm;
  double noise_floor_dbm = -123.030899869919438;
  double ref_loss_db = 46.6777;
  double path_exponent = 3.0;
  double sim_time_multiplier = 100.0;
  int max_transmissions = 4;
  double ack_timeout_min_s = 1.0;
  double ack_timeout_max_s = 3.0;
  std::uint64_t master_seed = 1;
  std::uint64_t run_index = 0;
  std::string output_prefix;     // empty: no files written
  std::string error_model_csv;   // empty: built-in table

  // String-keyed access used by the CLI and the config-file loader; throws
  // on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  double sim_end_s() const { return us_period_s * sim_time_multiplier; }
  // Stable textual form (excludes output paths); basis of the config hash.
  std::string canonical() const;
  std::uint64_t config_hash() const;
  static const std::vector<std::string>& known_keys();
};

struct MetricsLedger {
  std::uint64_t us_generated = 0, us_delivered = 0, us_queued = 0;
  std::uint64_t us_drop_collision = 0, us_drop_interference = 0, us_drop_below_cutoff = 0,
                us_drop_aborted = 0, us_drop_expired = 0;
  std::uint64_t us_transmissions = 0;
  std::uint64_t conf_concluded = 0, conf_tx_sum = 0;

  std::uint64_t ds_generated = 0, ds_delivered = 0, ds_queued = 0;
  std::uint64_t ds_drop_collision = 0, ds_drop_interference = 0, ds_drop_below_cutoff = 0,
                ds_drop_aborted = 0, ds_drop_expired = 0;
  std::uint64_t ds_transmissions = 0;

  std::uint64_t ack_rw1 = 0, ack_rw2 = 0, missed_rws = 0, duplicates = 0;

  // Gateway-side reception events, informational.
  std::uint64_t gw_rx_ok = 0, gw_rx_destroyed = 0, gw_arrival_busy = 0,
                gw_arrival_below_cutoff = 0, gw_arrival_unavailable = 0, gw_rx_aborted = 0;

  std::uint64_t us_drops() const {
    return us_drop_collision + us_drop_interference + us_drop_below_cutoff +
           us_drop_aborted + us_drop_expired;
  }
  std::uint64_t ds_drops() const {
    return ds_drop_collision + ds_drop_interference + ds_drop_below_cutoff +
           ds_drop_aborted + ds_drop_expired;
  }
  bool conserved() const {
    return us_generated == us_delivered + us_drops() + us_queued &&
           ds_generated == ds_delivered + ds_drops() + ds_queued;
  }
  std::optional<double> us_pdr() const {
    if (us_generated == 0) return std::nullopt;
    return static_cast<double>(us_delivered) / static_cast<double>(us_generated);
  }
  std::optional<double> ds_pdr() const {
    if (ds_generated == 0) return std::nullopt;
    return static_cast<double>(ds_delivered) / static_cast<double>(ds_generated);
  }
  std::optional<double> conf_tx_avg() const {
    if (conf_concluded == 0) return std::nullopt;
    return static_cast<double>(conf_tx_sum) / static_cast<double>(conf_concluded);
  }
};

// Per-node airtime bookkeeping for duty-cycle verification.
struct NodeAirtime {
  int node = -1;
  bool is_gateway = false;
  double airtime_868_1 = 0.0;
  double airtime_869_525 = 0.0;
};

struct RunResult {
  ExperimentConfig config;
  MetricsLedger ledger;
  std::vector<int> device_sfs;
  std::vector<NodeAirtime> airtimes;
};

// Builds the network, runs the event loop to config.sim_end_s() and writes
// trace/summary/topology CSVs when output_prefix is set.  Throws on invalid
// configuration; the metrics ledger is conservation-checked before return.
RunResult run_experiment(const ExperimentConfig& config);

// Topology construction and SF assignment only — no traffic, no event loop.
// Same placement and assignment draws as run_experiment with this config.
RunResult run_assignment(const ExperimentConfig& config);

std::string summary_csv_header();
std::string summary_csv_row(const RunResult& result);
void write_summary_csv(const std::string& path, const std::vector<RunResult>& results);

}  // namespace lorawan
