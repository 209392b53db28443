// Class-A end-device MAC, gateway MAC and per-node radio-duty-cycle
// accounting.  Uplinks carry a 13-byte frame overhead (MAC header, frame
// header, port, MIC); receive windows open 1 s and 2 s after an uplink ends.
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core/engine.hpp"
#include "core/linkmodel.hpp"
#include "core/phy.hpp"

namespace lorawan {

inline constexpr int kFrameOverheadBytes = 13;
inline constexpr double kRw1DelayS = 1.0;
inline constexpr double kRw2DelayS = 2.0;
inline constexpr double kPreambleCheckSymbols = 12.25;
inline constexpr int kDefaultMaxTransmissions = 4;

// EU 868 sub-bands with their duty-cycle limits; transmissions in a band
// earn quiet time end_of_tx + toa * (1/limit - 1).
class RdcLedger {
 public:
  struct Report {
    bool allowed = false;
    double blocked_until = 0.0;
  };

  Report check(double channel_hz, double now) const;
  void register_tx(double channel_hz, double tx_end, double toa);
  double airtime_used(double channel_hz) const;
  double duty_cycle_limit(double channel_hz) const;

 private:
  struct Band {
    double lo_hz, hi_hz, limit;
    double earliest_next_tx = 0.0;
    double airtime = 0.0;
  };
  const Band& band(double channel_hz) const;
  Band& band(double channel_hz);
  std::vector<Band> bands_ = {
      {863.0e6, 868.0e6, 0.01},
      {868.0e6, 868.6e6, 0.01},
      {868.7e6, 869.2e6, 0.001},
      {869.4e6, 869.65e6, 0.10},
      {869.7e6, 870.0e6, 0.01},
  };
};

enum class DeviceMacState { kIdle, kTx, kWaitRw1, kRw1, kWaitRw2, kRw2, kAckTimeout };
const char* to_string(DeviceMacState s);

struct TxQueueEntry {
  std::uint64_t message_id = 0;
  int app_payload_bytes = 0;
  bool confirmed = false;
  int remaining_transmissions = 1;
  int attempts_used = 0;
  std::uint32_t fcnt = 0;
};

// Shared id pools so frame/message identifiers stay unique per simulation
// without global state.
struct IdAllocator {
  std::uint64_t next_frame_id = 1;
  std::uint64_t next_message_id = 1;
};

class DeviceMac {
 public:
  struct Config {
    int address = 0;
    LoRaTxParams uplink;
    int max_transmissions = kDefaultMaxTransmissions;
    double ack_timeout_min_s = 1.0;
    double ack_timeout_max_s = 3.0;
  };

  struct Hooks {
    std::function<void(const SignalRecord&, const TxQueueEntry&)> on_tx_start;
    // Confirmed uplink left the queue: acknowledged (delivered) or expired.
    std::function<void(std::uint64_t message_id, bool delivered, int attempts, DropCause)>
        on_confirmed_concluded;
    std::function<void(const Frame&)> on_downlink_data;  // data frame accepted
    std::function<void(const SignalRecord&, ArrivalDecision)> on_downlink_arrival;
    std::function<void(const SignalRecord&, bool success)> on_downlink_rx_complete;
  };

  DeviceMac(Config config, Phy& phy, Medium& medium, Scheduler& scheduler,
            RngStream& ack_rng, IdAllocator& ids);

  // Queues one application message; returns its message id.
  std::uint64_t enqueue(int app_payload_bytes, bool confirmed);

  DeviceMacState state() const { return state_; }
  int address() const { return config_.address; }
  const Config& config() const { return config_; }
  const std::deque<TxQueueEntry>& queue() const { return queue_; }
  RdcLedger& rdc() { return rdc_; }
  Hooks& hooks() { return hooks_; }

 private:
  void try_send();
  void begin_transmission();
  void on_tx_complete(const SignalRecord& sig);
  void open_window(int window);
  void preamble_check(int window);
  void on_rx_complete(const SignalRecord& sig, bool success);
  void process_downlink(const Frame& frame);
  void after_rw2_closed();
  void return_to_idle();
  void ack_timeout_expired();

  Config config_;
  Phy& phy_;
  Medium& medium_;
  Scheduler& scheduler_;
  RngStream& ack_rng_;
  IdAllocator& ids_;
  Hooks hooks_;

  DeviceMacState state_ = DeviceMacState::kIdle;
  std::deque<TxQueueEntry> queue_;
  RdcLedger rdc_;
  std::uint32_t next_fcnt_ = 0;
  bool ack_pending_ = false;  // set by a confirmed downlink, rides the next uplink
  double last_tx_end_ = 0.0;
  EventHandle rw1_event_, rw2_event_, preamble_event_, retry_event_, ack_to_event_;
};

enum class GatewayMacState { kIdle, kTx, kUnavail };
const char* to_string(GatewayMacState s);

// A gateway listens on every spreading factor of the uplink channel in
// parallel and transmits through a separate phy.  While transmitting, every
// listening phy is silenced and its ongoing reception aborted.
class GatewayNode {
 public:
  enum class SendResult { kSent, kBusy, kRdcBlocked };

  struct Hooks {
    std::function<void(const SignalRecord&, ArrivalDecision)> on_uplink_arrival;
    std::function<void(const SignalRecord&, bool success)> on_uplink_rx_complete;
    std::function<void(const SignalRecord&)> on_uplink_rx_aborted;
    std::function<void(const SignalRecord&)> on_downlink_sent;
  };

  GatewayNode(int node_id, double uplink_channel_hz, Medium& medium,
              Scheduler& scheduler, RngProvider& rng);

  SendResult send_downlink(const Frame& frame, const LoRaTxParams& params,
                           int phy_payload_bytes);
  RdcLedger::Report rdc_status(double channel_hz) const;
  bool transmitting() const { return transmitting_; }

  int node_id() const { return node_id_; }
  GatewayMacState mac_state(int sf) const;
  RdcLedger& rdc() { return rdc_; }
  Hooks& hooks() { return hooks_; }

 private:
  void on_downlink_complete(const SignalRecord& sig);

  int node_id_;
  Scheduler& scheduler_;
  Medium& medium_;
  Hooks hooks_;
  std::vector<std::unique_ptr<Phy>> rx_phys_;  // index 0 -> SF7 ... 5 -> SF12
  std::unique_ptr<Phy> tx_phy_;
  RdcLedger rdc_;
  bool transmitting_ = false;
  int tx_sf_ = 0;  // sf of the in-flight downlink, for mac_state()
};

}  // namespace lorawan
