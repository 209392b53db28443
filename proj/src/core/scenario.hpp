// Topology construction, spreading-factor assignment strategies and traffic
// timelines.  Everything here is computed up front; the harness turns the
// timelines into scheduled events.
#pragma once

#include <string>
#include <vector>

#include "core/engine.hpp"
#include "core/linkmodel.hpp"

namespace lorawan {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

double distance(const Vec2& a, const Vec2& b);

struct Topology {
  double radius_m = 6100.0;
  std::vector<Vec2> devices;
  std::vector<Vec2> gateways;

  double nearest_gateway_distance(std::size_t device) const;
};

// Area-uniform placement on the disc.
std::vector<Vec2> place_devices(int n, double radius_m, RngStream& rng);

// 1 gateway: origin.  2: half a radius out on both sides of a diameter.
// 4: corners of a square whose diagonal equals the radius.
std::vector<Vec2> gateway_positions(int n_gw, double radius_m);

enum class SfStrategy { kRandom, kFixed, kPerThreshold };
const char* to_string(SfStrategy s);
SfStrategy parse_sf_strategy(const std::string& name);

struct SfAssignmentConfig {
  SfStrategy strategy = SfStrategy::kPerThreshold;
  int fixed_sf = 12;
  double per_threshold = 0.01;
  // Parameters of the link the threshold is evaluated against.
  int eval_cr = 3;
  int eval_payload_bytes = 21;
  double tx_power_dbm = kDefaultTxPowerDbm;
};

// Packet error ratio of a payload_bytes frame at the given range; 1.0 when
// the SNR sits below the lock cut-off.
double per_estimate(const ErrorModelTable& table, const LinkBudget& budget, int sf, int cr,
                    double tx_power_dbm, double distance_m, int phy_payload_bytes);

// Per-device spreading factors.  per_threshold picks the smallest SF whose
// PER to the nearest gateway beats the threshold, falling back to SF12.
std::vector<int> assign_sf(const SfAssignmentConfig& config, const Topology& topology,
                           const ErrorModelTable& table, const LinkBudget& budget,
                           RngStream& rng);

struct TrafficProfile {
  double us_period_s = 600.0;
  int us_payload_bytes = 8;
  bool us_confirmed = false;
  double ds_mean_iat_s = 0.0;  // <= 0 disables downstream data
  int ds_payload_bytes = 8;
  bool ds_confirmed = false;
};

// First uplink uniform in [0, period), then strictly periodic.
std::vector<double> uplink_times(const TrafficProfile& profile, double sim_end_s,
                                 RngStream& rng);
// Poisson arrivals of downstream data for one device.
std::vector<double> downstream_times(const TrafficProfile& profile, double sim_end_s,
                                     RngStream& rng);

void write_topology_csv(const std::string& path, const Topology& topology,
                        const std::vector<int>& device_sfs);

}  // namespace lorawan
