#include "core/phy.hpp"

#include <algorithm>
#include <cmath>

namespace lorawan {

const char* to_string(PhyState s) {
  switch (s) {
    case PhyState::kTrxOff: return "TRX_OFF";
    case PhyState::kIdle: return "IDLE";
    case PhyState::kRxOn: return "RX_ON";
    case PhyState::kTxOn: return "TX_ON";
    case PhyState::kBusyRx: return "BUSY_RX";
    case PhyState::kBusyTx: return "BUSY_TX";
  }
  return "?";
}

const char* to_string(ArrivalDecision d) {
  switch (d) {
    case ArrivalDecision::kLock: return "lock";
    case ArrivalDecision::kIgnoreBelowCutoff: return "ignore_below_cutoff";
    case ArrivalDecision::kIgnoreBusy: return "ignore_busy";
    case ArrivalDecision::kIgnoreOtherParams: return "ignore_other_params";
    case ArrivalDecision::kIgnoreUnavailable: return "ignore_unavailable";
  }
  return "?";
}

const char* to_string(DropCause c) {
  switch (c) {
    case DropCause::kNone: return "";
    case DropCause::kCollision: return "collision";
    case DropCause::kInterference: return "interference";
    case DropCause::kBelowCutoff: return "below_cutoff";
    case DropCause::kAborted: return "aborted";
    case DropCause::kExpired: return "expired";
    case DropCause::kQueuedAtEnd: return "queued";
  }
  return "?";
}

namespace {

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

}  // namespace

Phy::Phy(int node_id, std::string name, RngStream& rng)
    : node_id_(node_id), name_(std::move(name)), rng_(rng) {}

void Phy::tune(double channel_hz, int sf) {
  if (state_ == PhyState::kBusyRx || state_ == PhyState::kBusyTx)
    throw std::logic_error("tune while busy: " + name_);
  channel_hz_ = channel_hz;
  sf_ = sf;
}

void Phy::set_state(PhyState next) {
  if (next == state_) return;
  bool ok = false;
  // Requested transitions travel the TRX_OFF<->{IDLE, RX_ON, TX_ON} edges;
  // busy states are entered and left only by the medium or cancel calls.
  if (state_ == PhyState::kTrxOff)
    ok = next == PhyState::kIdle || next == PhyState::kRxOn || next == PhyState::kTxOn;
  else if (state_ == PhyState::kIdle || state_ == PhyState::kRxOn || state_ == PhyState::kTxOn)
    ok = next == PhyState::kTrxOff;
  if (!ok)
    throw std::logic_error(std::string("invalid PHY transition ") + to_string(state_) +
                           " -> " + to_string(next) + " on " + name_);
  state_ = next;
}

void Phy::cancel_rx() {
  if (state_ != PhyState::kBusyRx)
    throw std::logic_error("cancel_rx outside BUSY_RX: " + name_);
  auto sig = locked_;
  locked_.reset();
  chunks_.clear();
  state_ = PhyState::kTrxOff;
  if (hooks_.on_rx_aborted) hooks_.on_rx_aborted(*sig);
}

void Phy::cancel_tx() {
  if (state_ != PhyState::kBusyTx)
    throw std::logic_error("cancel_tx outside BUSY_TX: " + name_);
  auto sig = transmitting_;
  transmitting_.reset();
  medium_->scheduler().cancel(tx_complete_event_);
  state_ = PhyState::kTrxOff;
  medium_->truncate(*sig);
}

void Phy::close_chunk(double t) {
  if (t <= chunk_open_t_) return;  // zero-length boundary, nothing received yet
  double rate = locked_->payload_bits() / locked_->time_on_air();
  chunks_.push_back({chunk_open_t_, t, chunk_sinr_db_, (t - chunk_open_t_) * rate});
}

void Phy::open_chunk(double t) {
  chunk_open_t_ = t;
  chunk_sinr_db_ = medium_->compute_sinr(*this, *locked_, t);
}

void Phy::handle_signal_start(const std::shared_ptr<const SignalRecord>& sig) {
  double now = medium_->scheduler().now();
  ArrivalDecision decision;
  switch (state_) {
    case PhyState::kBusyRx: {
      // The newcomer is already interference; re-chunk the ongoing reception.
      close_chunk(now);
      open_chunk(now);
      decision = sig->params.sf == sf_ ? ArrivalDecision::kIgnoreBusy
                                       : ArrivalDecision::kIgnoreOtherParams;
      break;
    }
    case PhyState::kRxOn: {
      if (sig->params.sf != sf_) {
        decision = ArrivalDecision::kIgnoreOtherParams;
        break;
      }
      double sinr = medium_->compute_sinr(*this, *sig, now);
      if (sinr >= medium_->error_model().snr_cutoff_db(sig->params.sf, sig->params.cr)) {
        locked_ = sig;
        chunks_.clear();
        state_ = PhyState::kBusyRx;
        open_chunk(now);
        decision = ArrivalDecision::kLock;
      } else {
        decision = ArrivalDecision::kIgnoreBelowCutoff;
      }
      break;
    }
    default:
      decision = ArrivalDecision::kIgnoreUnavailable;
      break;
  }
  if (hooks_.on_arrival) hooks_.on_arrival(*sig, decision);
}

void Phy::handle_signal_end(const std::shared_ptr<const SignalRecord>& sig) {
  if (state_ != PhyState::kBusyRx) return;
  double now = medium_->scheduler().now();
  if (locked_ && sig->signal_id == locked_->signal_id) {
    close_chunk(now);
    finalize_reception();
  } else {
    close_chunk(now);
    open_chunk(now);
  }
}

void Phy::finalize_reception() {
  auto sig = locked_;
  double p = 1.0;
  for (const auto& c : chunks_)
    p *= medium_->error_model().chunk_success_probability(sig->params.sf, sig->params.cr,
                                                          c.sinr_db, c.n_bits);
  bool success = rng_.uniform() < p;
  locked_.reset();
  state_ = PhyState::kRxOn;
  if (hooks_.on_rx_complete) hooks_.on_rx_complete(*sig, success);
}

Medium::Medium(Scheduler& scheduler, const ErrorModelTable& error_model, PowerFn power_fn,
               double noise_floor_dbm)
    : scheduler_(scheduler),
      error_model_(error_model),
      power_fn_(std::move(power_fn)),
      noise_floor_dbm_(noise_floor_dbm) {}

void Medium::attach(Phy* phy) {
  phy->medium_ = this;
  phys_.push_back(phy);
}

std::shared_ptr<const SignalRecord> Medium::transmit(Phy& tx_phy, const LoRaTxParams& params,
                                                     int phy_payload_bytes,
                                                     const Frame& frame) {
  if (tx_phy.state_ != PhyState::kTxOn)
    throw std::logic_error("start_tx requires TX_ON: " + tx_phy.name_);
  double now = scheduler_.now();
  auto rec = std::make_shared<SignalRecord>();
  rec->signal_id = next_signal_id_++;
  rec->source_node = tx_phy.node_id_;
  rec->params = params;
  rec->start_time = now;
  rec->end_time = now + time_on_air_s(params, phy_payload_bytes);
  rec->phy_payload_bytes = phy_payload_bytes;
  rec->frame = frame;

  tx_phy.state_ = PhyState::kBusyTx;
  tx_phy.transmitting_ = rec;

  // Transmitter completion first, medium end-notification second: reactions
  // scheduled by the transmitter (receive windows) then sort ahead of
  // reactions scheduled by receivers (server timers) at equal future times.
  Phy* txp = &tx_phy;
  tx_phy.tx_complete_event_ = scheduler_.schedule_at(rec->end_time, [this, txp, rec] {
    txp->state_ = PhyState::kTxOn;
    txp->transmitting_.reset();
    if (txp->hooks_.on_tx_complete) txp->hooks_.on_tx_complete(*rec);
  });
  std::uint64_t id = rec->signal_id;
  EventHandle end_ev = scheduler_.schedule_at(rec->end_time, [this, id] { end_signal(id); });

  active_.push_back(rec);
  end_events_.push_back(end_ev);

  for (Phy* p : phys_) {
    if (p->node_id_ == rec->source_node) continue;
    if (p->channel_hz_ != params.channel_hz) continue;
    p->handle_signal_start(rec);
  }
  return rec;
}

void Medium::end_signal(std::uint64_t signal_id) {
  auto it = std::find_if(active_.begin(), active_.end(),
                         [&](const auto& s) { return s->signal_id == signal_id; });
  if (it == active_.end()) return;
  std::shared_ptr<SignalRecord> rec = *it;
  std::size_t idx = static_cast<std::size_t>(it - active_.begin());
  active_.erase(it);
  end_events_.erase(end_events_.begin() + static_cast<std::ptrdiff_t>(idx));
  for (Phy* p : phys_) {
    if (p->node_id_ == rec->source_node) continue;
    if (p->channel_hz_ != rec->params.channel_hz) continue;
    p->handle_signal_end(rec);
  }
}

void Medium::truncate(const SignalRecord& sig) {
  auto it = std::find_if(active_.begin(), active_.end(),
                         [&](const auto& s) { return s->signal_id == sig.signal_id; });
  if (it == active_.end()) return;
  std::size_t idx = static_cast<std::size_t>(it - active_.begin());
  scheduler_.cancel(end_events_[idx]);
  (*it)->end_time = scheduler_.now();
  end_signal(sig.signal_id);
}

double Medium::compute_sinr(const Phy& rx, const SignalRecord& target, double t) const {
  (void)t;  // the active list already reflects the current instant
  double p_target = dbm_to_mw(power_fn_(target.source_node, rx.node_id()));
  double denom = dbm_to_mw(noise_floor_dbm_);
  for (const auto& s : active_) {
    if (s->signal_id == target.signal_id) continue;
    if (s->params.channel_hz != target.params.channel_hz) continue;
    if (s->source_node == rx.node_id()) continue;
    denom += dbm_to_mw(power_fn_(s->source_node, rx.node_id()));
  }
  return 10.0 * std::log10(p_target / denom);
}

}  // namespace lorawan
