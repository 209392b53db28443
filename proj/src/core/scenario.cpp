#include "core/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace lorawan {

double distance(const Vec2& a, const Vec2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

double Topology::nearest_gateway_distance(std::size_t device) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& gw : gateways) best = std::min(best, distance(devices.at(device), gw));
  return best;
}

std::vector<Vec2> place_devices(int n, double radius_m, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("need at least one device");
  if (radius_m <= 0.0) throw std::invalid_argument("non-positive disc radius");
  std::vector<Vec2> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    double r = radius_m * std::sqrt(rng.uniform());
    double theta = rng.uniform(0.0, 2.0 * M_PI);
    out.push_back({r * std::cos(theta), r * std::sin(theta)});
  }
  return out;
}

std::vector<Vec2> gateway_positions(int n_gw, double radius_m) {
  if (radius_m <= 0.0) throw std::invalid_argument("non-positive disc radius");
  switch (n_gw) {
    case 1:
      return {{0.0, 0.0}};
    case 2:
      return {{-radius_m / 2.0, 0.0}, {radius_m / 2.0, 0.0}};
    case 4: {
      double a = radius_m / (2.0 * std::sqrt(2.0));
      return {{a, a}, {-a, a}, {-a, -a}, {a, -a}};
    }
    default:
      throw std::invalid_argument("gateway count must be 1, 2 or 4");
  }
}

const char* to_string(SfStrategy s) {
  switch (s) {
    case SfStrategy::kRandom: return "random";
    case SfStrategy::kFixed: return "fixed";
    case SfStrategy::kPerThreshold: return "per_threshold";
  }
  return "?";
}

SfStrategy parse_sf_strategy(const std::string& name) {
  if (name == "random") return SfStrategy::kRandom;
  if (name == "fixed") return SfStrategy::kFixed;
  if (name == "per_threshold") return SfStrategy::kPerThreshold;
  throw std::invalid_argument("unknown sf strategy: " + name);
}

double per_estimate(const ErrorModelTable& table, const LinkBudget& budget, int sf, int cr,
                    double tx_power_dbm, double distance_m, int phy_payload_bytes) {
  if (distance_m <= 0.0) throw std::invalid_argument("non-positive distance");
  double snr = budget.snr_db(tx_power_dbm, distance_m);
  if (snr < table.snr_cutoff_db(sf, cr)) return 1.0;  // receiver never locks
  return 1.0 - table.chunk_success_probability(sf, cr, snr, 8.0 * phy_payload_bytes);
}

std::vector<int> assign_sf(const SfAssignmentConfig& config, const Topology& topology,
                           const ErrorModelTable& table, const LinkBudget& budget,
                           RngStream& rng) {
  std::vector<int> sfs(topology.devices.size(), config.fixed_sf);
  switch (config.strategy) {
    case SfStrategy::kRandom:
      for (auto& sf : sfs) sf = 7 + static_cast<int>(rng.uniform_int(6));
      break;
    case SfStrategy::kFixed:
      if (config.fixed_sf < 7 || config.fixed_sf > 12)
        throw std::invalid_argument("fixed sf out of range [7, 12]");
      break;
    case SfStrategy::kPerThreshold:
      for (std::size_t i = 0; i < sfs.size(); ++i) {
        double d = topology.nearest_gateway_distance(i);
        sfs[i] = 12;
        for (int sf = 7; sf <= 12; ++sf) {
          double per = per_estimate(table, budget, sf, config.eval_cr, config.tx_power_dbm,
                                    d, config.eval_payload_bytes);
          if (per < config.per_threshold) {
            sfs[i] = sf;
            break;
          }
        }
      }
      break;
  }
  return sfs;
}

std::vector<double> uplink_times(const TrafficProfile& profile, double sim_end_s,
                                 RngStream& rng) {
  if (profile.us_period_s <= 0.0) throw std::invalid_argument("non-positive uplink period");
  std::vector<double> times;
  double t = rng.uniform(0.0, profile.us_period_s);
  for (; t < sim_end_s; t += profile.us_period_s) times.push_back(t);
  return times;
}

std::vector<double> downstream_times(const TrafficProfile& profile, double sim_end_s,
                                     RngStream& rng) {
  std::vector<double> times;
  if (profile.ds_mean_iat_s <= 0.0) return times;
  double t = rng.exponential(profile.ds_mean_iat_s);
  while (t < sim_end_s) {
    times.push_back(t);
    t += rng.exponential(profile.ds_mean_iat_s);
  }
  return times;
}

void write_topology_csv(const std::string& path, const Topology& topology,
                        const std::vector<int>& device_sfs) {
  if (device_sfs.size() != topology.devices.size())
    throw std::invalid_argument("sf list does not match device count");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write topology CSV: " + path);
  out << "node,x,y,sf\n";
  out.precision(10);
  for (std::size_t i = 0; i < topology.devices.size(); ++i)
    out << i << ',' << topology.devices[i].x << ',' << topology.devices[i].y << ','
        << device_sfs[i] << '\n';
  for (std::size_t g = 0; g < topology.gateways.size(); ++g)
    out << topology.devices.size() + g << ',' << topology.gateways[g].x << ','
        << topology.gateways[g].y << ",0\n";
}

}  // namespace lorawan
