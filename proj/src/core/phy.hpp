// Transceiver state machine, shared-medium signal registry and chunk-based
// SINR reception.  End devices and gateways use the same Phy class; a
// gateway simply owns one listening Phy per (channel, sf) pair plus one for
// transmit.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core/engine.hpp"
#include "core/linkmodel.hpp"

namespace lorawan {

enum class PhyState { kTrxOff, kIdle, kRxOn, kTxOn, kBusyRx, kBusyTx };
const char* to_string(PhyState s);

enum class ArrivalDecision {
  kLock,
  kIgnoreBelowCutoff,
  kIgnoreBusy,         // receiver already locked on the same sf/channel
  kIgnoreOtherParams,  // sf mismatch for a listening receiver
  kIgnoreUnavailable,  // receiver not in RX_ON at arrival
};
const char* to_string(ArrivalDecision d);

enum class DropCause {
  kNone,
  kCollision,     // arrival ignored because all candidate receivers were busy
  kInterference,  // locked reception destroyed by the chunk draw
  kBelowCutoff,
  kAborted,       // reception cancelled (e.g. gateway turned transmitter)
  kExpired,       // retransmission budget exhausted without an ack
  kQueuedAtEnd,   // still waiting in a queue when the run ended
};
const char* to_string(DropCause c);

// MAC-level metadata rides along with the signal, mirroring a packet tag.
struct Frame {
  std::uint64_t frame_id = 0;    // unique per emission
  std::uint64_t message_id = 0;  // logical message this emission belongs to
  int src_addr = -1;             // device address; -1 when sent by the NS
  int dst_addr = -1;             // device address; -1 for uplinks
  bool uplink = true;
  bool confirmed = false;
  bool ack = false;
  std::uint32_t fcnt = 0;
  int app_payload_bytes = 0;     // excludes the 13-byte frame overhead
};

struct SignalRecord {
  std::uint64_t signal_id = 0;
  int source_node = -1;
  LoRaTxParams params;
  double start_time = 0.0;
  double end_time = 0.0;
  int phy_payload_bytes = 0;
  Frame frame;

  double time_on_air() const { return end_time - start_time; }
  double payload_bits() const { return 8.0 * phy_payload_bytes; }
};

struct ReceptionChunk {
  double t_begin = 0.0;
  double t_end = 0.0;
  double sinr_db = 0.0;
  double n_bits = 0.0;  // fractional; duration x payload-bit rate
};

class Medium;

class Phy {
 public:
  struct Hooks {
    std::function<void(const SignalRecord&, ArrivalDecision)> on_arrival;
    // Reception ran to the signal's end; success=false means destroyed by
    // interference (the chunk-product draw failed).
    std::function<void(const SignalRecord&, bool success)> on_rx_complete;
    std::function<void(const SignalRecord&)> on_rx_aborted;
    std::function<void(const SignalRecord&)> on_tx_complete;
  };

  Phy(int node_id, std::string name, RngStream& rng);

  int node_id() const { return node_id_; }
  const std::string& name() const { return name_; }
  PhyState state() const { return state_; }
  double channel_hz() const { return channel_hz_; }
  int sf() const { return sf_; }
  Hooks& hooks() { return hooks_; }

  // Retunes the listening parameters; only legal while not busy.
  void tune(double channel_hz, int sf);
  // Transitions among the four non-busy states along TRX_OFF<->{IDLE, RX_ON,
  // TX_ON}; anything else is a contract violation.
  void set_state(PhyState next);

  void cancel_rx();  // BUSY_RX -> TRX_OFF, reception abandoned
  void cancel_tx();  // BUSY_TX -> TRX_OFF, signal truncated to now

  const SignalRecord* locked_signal() const { return locked_.get(); }
  const std::vector<ReceptionChunk>& chunks() const { return chunks_; }

 private:
  friend class Medium;

  void handle_signal_start(const std::shared_ptr<const SignalRecord>& sig);
  void handle_signal_end(const std::shared_ptr<const SignalRecord>& sig);
  void close_chunk(double t);
  void open_chunk(double t);
  void finalize_reception();

  int node_id_;
  std::string name_;
  RngStream& rng_;
  Medium* medium_ = nullptr;
  PhyState state_ = PhyState::kTrxOff;
  double channel_hz_ = kUplinkChannelHz;
  int sf_ = 12;
  Hooks hooks_;

  std::shared_ptr<const SignalRecord> locked_;
  std::shared_ptr<const SignalRecord> transmitting_;
  EventHandle tx_complete_event_;
  std::vector<ReceptionChunk> chunks_;
  double chunk_open_t_ = 0.0;
  double chunk_sinr_db_ = 0.0;
};

// Registry of in-flight signals.  Received power between any two nodes comes
// from a caller-supplied function, so topology stays out of this layer.
class Medium {
 public:
  using PowerFn = std::function<double(int tx_node, int rx_node)>;  // dBm

  Medium(Scheduler& scheduler, const ErrorModelTable& error_model, PowerFn power_fn,
         double noise_floor_dbm);

  void attach(Phy* phy);

  // Starts a transmission from a phy in TX_ON.  Schedules the transmitter's
  // completion before the medium-wide end notification so that, at equal
  // fire times downstream, transmitter-side events order ahead of
  // network-side reactions to the reception.
  std::shared_ptr<const SignalRecord> transmit(Phy& tx_phy, const LoRaTxParams& params,
                                               int phy_payload_bytes, const Frame& frame);

  double compute_sinr(const Phy& rx, const SignalRecord& target, double t) const;

  const ErrorModelTable& error_model() const { return error_model_; }
  double noise_floor_dbm() const { return noise_floor_dbm_; }
  Scheduler& scheduler() { return scheduler_; }
  std::size_t active_count() const { return active_.size(); }

 private:
  friend class Phy;

  void truncate(const SignalRecord& sig);  // cancel_tx support
  void end_signal(std::uint64_t signal_id);

  Scheduler& scheduler_;
  const ErrorModelTable& error_model_;
  PowerFn power_fn_;
  double noise_floor_dbm_;
  std::uint64_t next_signal_id_ = 1;
  std::vector<std::shared_ptr<SignalRecord>> active_;
  std::vector<EventHandle> end_events_;  // parallel to active_
  std::vector<Phy*> phys_;
};

}  // namespace lorawan
