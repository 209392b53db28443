// Network server: upstream deduplication, receive-window timers, gateway
// selection, acknowledgments and confirmed-downstream retransmission.
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <vector>

#include "core/engine.hpp"
#include "core/linkmodel.hpp"
#include "core/mac.hpp"
#include "core/phy.hpp"

namespace lorawan {

struct DownlinkJob {
  std::uint64_t job_id = 0;
  int app_payload_bytes = 0;
  bool confirmed = false;
  bool is_ack = false;
  int remaining_attempts = 1;
  int attempts_used = 0;
  bool sent = false;
  double created_time = 0.0;
};

struct DeviceContext {
  int address = -1;
  bool seen = false;
  std::uint32_t last_fcnt = 0;
  double last_uplink_end = -1.0;
  int last_sf = 12;
  double last_channel_hz = kUplinkChannelHz;
  double last_seen_time = -1.0;
  std::vector<int> gateways;  // node ids, most recently heard first
  std::deque<DownlinkJob> queue;
  EventHandle rw1_timer, rw2_timer;
  bool pair_served = false;  // a downlink went out in the current RW pair
};

class NetworkServer {
 public:
  struct Config {
    int cr = 1;
    double tx_power_dbm = kDefaultTxPowerDbm;
    double rw2_channel_hz = kDownlinkRw2ChannelHz;
    int rw2_sf = kRw2SpreadingFactor;
    int ds_max_attempts = kDefaultMaxTransmissions;
  };

  struct UplinkMeta {
    int gateway_node = -1;
    double end_time = 0.0;
    int sf = 12;
    double channel_hz = kUplinkChannelHz;
  };

  struct Hooks {
    std::function<void(const Frame&, int gateway_node, bool duplicate)> on_upstream_processed;
    // A downlink job emission (ack or data) through a gateway in window 1/2.
    std::function<void(const DownlinkJob&, const Frame&, const LoRaTxParams&,
                       int gateway_node, int window)>
        on_downlink_tx;
    // Confirmed data job left the queue: acknowledged or attempts exhausted.
    std::function<void(const DownlinkJob&, bool delivered)> on_job_concluded;
    std::function<void(int address, int window)> on_missed_rw;
  };

  NetworkServer(Scheduler& scheduler, std::vector<GatewayNode*> gateways, Config config,
                IdAllocator& ids);

  void on_upstream(const Frame& frame, const UplinkMeta& meta);
  std::uint64_t enqueue_downstream(int address, int app_payload_bytes, bool confirmed);

  std::uint64_t ack_rw1() const { return ack_rw1_; }
  std::uint64_t ack_rw2() const { return ack_rw2_; }
  std::uint64_t missed_rws() const { return missed_rws_; }
  const std::map<int, DeviceContext>& contexts() const { return contexts_; }
  Hooks& hooks() { return hooks_; }

 private:
  DeviceContext& context(int address);
  void handle_ack(DeviceContext& ctx);
  void prune_expired(DeviceContext& ctx);
  void on_rw_timer(DeviceContext& ctx, int window);

  Scheduler& scheduler_;
  std::map<int, GatewayNode*> gateways_;
  Config config_;
  IdAllocator& ids_;
  Hooks hooks_;
  std::map<int, DeviceContext> contexts_;
  std::uint64_t ack_rw1_ = 0;
  std::uint64_t ack_rw2_ = 0;
  std::uint64_t missed_rws_ = 0;
};

}  // namespace lorawan
