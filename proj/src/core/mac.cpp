#include "core/mac.hpp"

#include <cassert>
#include <stdexcept>

namespace lorawan {

const char* to_string(DeviceMacState s) {
  switch (s) {
    case DeviceMacState::kIdle: return "IDLE";
    case DeviceMacState::kTx: return "TX";
    case DeviceMacState::kWaitRw1: return "WRW1";
    case DeviceMacState::kRw1: return "RW1";
    case DeviceMacState::kWaitRw2: return "WRW2";
    case DeviceMacState::kRw2: return "RW2";
    case DeviceMacState::kAckTimeout: return "ACK_TO";
  }
  return "?";
}

const char* to_string(GatewayMacState s) {
  switch (s) {
    case GatewayMacState::kIdle: return "IDLE";
    case GatewayMacState::kTx: return "TX";
    case GatewayMacState::kUnavail: return "UNAVAIL";
  }
  return "?";
}

const RdcLedger::Band& RdcLedger::band(double channel_hz) const {
  for (const auto& b : bands_)
    if (channel_hz >= b.lo_hz && channel_hz < b.hi_hz) return b;
  throw std::invalid_argument("channel outside known sub-bands");
}

RdcLedger::Band& RdcLedger::band(double channel_hz) {
  return const_cast<Band&>(static_cast<const RdcLedger*>(this)->band(channel_hz));
}

RdcLedger::Report RdcLedger::check(double channel_hz, double now) const {
  const Band& b = band(channel_hz);
  return {now >= b.earliest_next_tx, b.earliest_next_tx};
}

void RdcLedger::register_tx(double channel_hz, double tx_end, double toa) {
  Band& b = band(channel_hz);
  b.earliest_next_tx = tx_end + toa * (1.0 / b.limit - 1.0);
  b.airtime += toa;
}

double RdcLedger::airtime_used(double channel_hz) const { return band(channel_hz).airtime; }

double RdcLedger::duty_cycle_limit(double channel_hz) const { return band(channel_hz).limit; }

DeviceMac::DeviceMac(Config config, Phy& phy, Medium& medium, Scheduler& scheduler,
                     RngStream& ack_rng, IdAllocator& ids)
    : config_(std::move(config)),
      phy_(phy),
      medium_(medium),
      scheduler_(scheduler),
      ack_rng_(ack_rng),
      ids_(ids) {
  phy_.hooks().on_tx_complete = [this](const SignalRecord& sig) { on_tx_complete(sig); };
  phy_.hooks().on_rx_complete = [this](const SignalRecord& sig, bool ok) {
    on_rx_complete(sig, ok);
  };
  phy_.hooks().on_arrival = [this](const SignalRecord& sig, ArrivalDecision d) {
    if (hooks_.on_downlink_arrival) hooks_.on_downlink_arrival(sig, d);
  };
}

std::uint64_t DeviceMac::enqueue(int app_payload_bytes, bool confirmed) {
  if (app_payload_bytes < 0) throw std::invalid_argument("negative payload");
  TxQueueEntry entry;
  entry.message_id = ids_.next_message_id++;
  entry.app_payload_bytes = app_payload_bytes;
  entry.confirmed = confirmed;
  entry.remaining_transmissions = confirmed ? config_.max_transmissions : 1;
  entry.fcnt = next_fcnt_++;
  queue_.push_back(entry);
  if (state_ == DeviceMacState::kIdle) try_send();
  return entry.message_id;
}

void DeviceMac::try_send() {
  if (state_ != DeviceMacState::kIdle || queue_.empty()) return;
  auto report = rdc_.check(config_.uplink.channel_hz, scheduler_.now());
  if (!report.allowed) {
    scheduler_.cancel(retry_event_);
    retry_event_ = scheduler_.schedule_at(report.blocked_until, [this] {
      if (state_ == DeviceMacState::kIdle) try_send();
    });
    return;
  }
  begin_transmission();
}

void DeviceMac::begin_transmission() {
  TxQueueEntry& head = queue_.front();
  Frame frame;
  frame.frame_id = ids_.next_frame_id++;
  frame.message_id = head.message_id;
  frame.src_addr = config_.address;
  frame.dst_addr = -1;
  frame.uplink = true;
  frame.confirmed = head.confirmed;
  frame.ack = ack_pending_;
  frame.fcnt = head.fcnt;
  frame.app_payload_bytes = head.app_payload_bytes;
  ack_pending_ = false;

  phy_.set_state(PhyState::kTxOn);
  state_ = DeviceMacState::kTx;
  auto sig = medium_.transmit(phy_, config_.uplink,
                              kFrameOverheadBytes + head.app_payload_bytes, frame);
  ++head.attempts_used;
  --head.remaining_transmissions;
  rdc_.register_tx(config_.uplink.channel_hz, sig->end_time, sig->time_on_air());
  if (hooks_.on_tx_start) hooks_.on_tx_start(*sig, head);
}

void DeviceMac::on_tx_complete(const SignalRecord&) {
  assert(state_ == DeviceMacState::kTx);
  phy_.set_state(PhyState::kTrxOff);
  state_ = DeviceMacState::kWaitRw1;
  last_tx_end_ = scheduler_.now();
  rw1_event_ = scheduler_.schedule(kRw1DelayS, [this] { open_window(1); });
  rw2_event_ = scheduler_.schedule(kRw2DelayS, [this] { open_window(2); });
}

void DeviceMac::open_window(int window) {
  if (window == 1) {
    assert(state_ == DeviceMacState::kWaitRw1);
    state_ = DeviceMacState::kRw1;
    phy_.tune(config_.uplink.channel_hz, config_.uplink.sf);
  } else {
    // A reception that began in RW1 can run past this instant; the
    // post-reception path then notices the missed window.
    if (state_ != DeviceMacState::kWaitRw2) return;
    state_ = DeviceMacState::kRw2;
    phy_.tune(kDownlinkRw2ChannelHz, kRw2SpreadingFactor);
  }
  phy_.set_state(PhyState::kRxOn);
  double check_delay = kPreambleCheckSymbols * symbol_duration_s(phy_.sf());
  preamble_event_ = scheduler_.schedule(check_delay, [this, window] { preamble_check(window); });
}

void DeviceMac::preamble_check(int window) {
  if (state_ != DeviceMacState::kRw1 && state_ != DeviceMacState::kRw2) return;
  if (phy_.state() == PhyState::kBusyRx) return;  // preamble detected, keep receiving
  phy_.set_state(PhyState::kTrxOff);
  if (window == 1)
    state_ = DeviceMacState::kWaitRw2;
  else
    after_rw2_closed();
}

void DeviceMac::on_rx_complete(const SignalRecord& sig, bool success) {
  assert(state_ == DeviceMacState::kRw1 || state_ == DeviceMacState::kRw2);
  int window = state_ == DeviceMacState::kRw1 ? 1 : 2;
  if (hooks_.on_downlink_rx_complete) hooks_.on_downlink_rx_complete(sig, success);
  phy_.set_state(PhyState::kTrxOff);
  bool mine = success && !sig.frame.uplink && sig.frame.dst_addr == config_.address;
  if (mine) {
    process_downlink(sig.frame);
    return_to_idle();
    return;
  }
  if (window == 1 && scheduler_.now() < last_tx_end_ + kRw2DelayS) {
    state_ = DeviceMacState::kWaitRw2;  // the RW2 open event is still pending
    return;
  }
  after_rw2_closed();
}

void DeviceMac::process_downlink(const Frame& frame) {
  scheduler_.cancel(rw2_event_);
  if (frame.ack && !queue_.empty() && queue_.front().confirmed &&
      queue_.front().attempts_used > 0) {
    const TxQueueEntry& head = queue_.front();
    if (hooks_.on_confirmed_concluded)
      hooks_.on_confirmed_concluded(head.message_id, true, head.attempts_used,
                                    DropCause::kNone);
    queue_.pop_front();
  }
  if (frame.app_payload_bytes > 0) {
    if (hooks_.on_downlink_data) hooks_.on_downlink_data(frame);
    if (frame.confirmed) ack_pending_ = true;
  }
}

void DeviceMac::after_rw2_closed() {
  if (!queue_.empty() && queue_.front().confirmed && queue_.front().attempts_used > 0) {
    state_ = DeviceMacState::kAckTimeout;
    double wait = ack_rng_.uniform(config_.ack_timeout_min_s, config_.ack_timeout_max_s);
    ack_to_event_ = scheduler_.schedule(wait, [this] { ack_timeout_expired(); });
    return;
  }
  return_to_idle();
}

void DeviceMac::return_to_idle() {
  if (!queue_.empty() && !queue_.front().confirmed && queue_.front().attempts_used > 0)
    queue_.pop_front();  // unconfirmed uplinks conclude after their single attempt
  state_ = DeviceMacState::kIdle;
  try_send();
}

void DeviceMac::ack_timeout_expired() {
  assert(state_ == DeviceMacState::kAckTimeout);
  assert(!queue_.empty() && queue_.front().confirmed);
  TxQueueEntry& head = queue_.front();
  if (head.remaining_transmissions > 0) {
    state_ = DeviceMacState::kIdle;
    try_send();
    return;
  }
  if (hooks_.on_confirmed_concluded)
    hooks_.on_confirmed_concluded(head.message_id, false, head.attempts_used,
                                  DropCause::kExpired);
  queue_.pop_front();
  return_to_idle();
}

GatewayNode::GatewayNode(int node_id, double uplink_channel_hz, Medium& medium,
                         Scheduler& scheduler, RngProvider& rng)
    : node_id_(node_id), scheduler_(scheduler), medium_(medium) {
  for (int sf = 7; sf <= 12; ++sf) {
    std::string name = "gw" + std::to_string(node_id) + "/sf" + std::to_string(sf);
    auto phy = std::make_unique<Phy>(node_id, name, rng.stream("phy/" + name));
    medium.attach(phy.get());
    phy->tune(uplink_channel_hz, sf);
    phy->set_state(PhyState::kRxOn);
    phy->hooks().on_arrival = [this](const SignalRecord& sig, ArrivalDecision d) {
      if (hooks_.on_uplink_arrival) hooks_.on_uplink_arrival(sig, d);
    };
    phy->hooks().on_rx_complete = [this](const SignalRecord& sig, bool ok) {
      if (hooks_.on_uplink_rx_complete) hooks_.on_uplink_rx_complete(sig, ok);
    };
    phy->hooks().on_rx_aborted = [this](const SignalRecord& sig) {
      if (hooks_.on_uplink_rx_aborted) hooks_.on_uplink_rx_aborted(sig);
    };
    rx_phys_.push_back(std::move(phy));
  }
  std::string tx_name = "gw" + std::to_string(node_id) + "/tx";
  tx_phy_ = std::make_unique<Phy>(node_id, tx_name, rng.stream("phy/" + tx_name));
  medium.attach(tx_phy_.get());
  tx_phy_->tune(0.0, 12);  // never a listener
  tx_phy_->hooks().on_tx_complete = [this](const SignalRecord& sig) {
    on_downlink_complete(sig);
  };
}

GatewayNode::SendResult GatewayNode::send_downlink(const Frame& frame,
                                                   const LoRaTxParams& params,
                                                   int phy_payload_bytes) {
  if (transmitting_) return SendResult::kBusy;
  auto report = rdc_.check(params.channel_hz, scheduler_.now());
  if (!report.allowed) return SendResult::kRdcBlocked;
  for (auto& phy : rx_phys_) {
    if (phy->state() == PhyState::kBusyRx)
      phy->cancel_rx();
    else if (phy->state() == PhyState::kRxOn)
      phy->set_state(PhyState::kTrxOff);
  }
  tx_phy_->set_state(PhyState::kTxOn);
  auto sig = medium_.transmit(*tx_phy_, params, phy_payload_bytes, frame);
  rdc_.register_tx(params.channel_hz, sig->end_time, sig->time_on_air());
  transmitting_ = true;
  tx_sf_ = params.sf;
  return SendResult::kSent;
}

void GatewayNode::on_downlink_complete(const SignalRecord& sig) {
  tx_phy_->set_state(PhyState::kTrxOff);
  transmitting_ = false;
  for (auto& phy : rx_phys_)
    if (phy->state() == PhyState::kTrxOff) phy->set_state(PhyState::kRxOn);
  if (hooks_.on_downlink_sent) hooks_.on_downlink_sent(sig);
}

RdcLedger::Report GatewayNode::rdc_status(double channel_hz) const {
  return rdc_.check(channel_hz, scheduler_.now());
}

GatewayMacState GatewayNode::mac_state(int sf) const {
  if (!transmitting_) return GatewayMacState::kIdle;
  return sf == tx_sf_ ? GatewayMacState::kTx : GatewayMacState::kUnavail;
}

}  // namespace lorawan
