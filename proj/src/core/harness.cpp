#include "core/harness.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "core/engine.hpp"
#include "core/mac.hpp"
#include "core/netserver.hpp"
#include "core/phy.hpp"

namespace lorawan {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw std::invalid_argument("not a boolean: " + v);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  try {
    if (key == "n_devices") n_devices = std::stoi(value);
    else if (key == "n_gateways") n_gateways = std::stoi(value);
    else if (key == "radius_m") radius_m = std::stod(value);
    else if (key == "us_period_s") us_period_s = std::stod(value);
    else if (key == "us_payload_bytes") us_payload_bytes = std::stoi(value);
    else if (key == "us_confirmed") us_confirmed = parse_bool(value);
    else if (key == "ds_mean_iat_s") ds_mean_iat_s = std::stod(value);
    else if (key == "ds_payload_bytes") ds_payload_bytes = std::stoi(value);
    else if (key == "ds_confirmed") ds_confirmed = parse_bool(value);
    else if (key == "sf_strategy") sf_strategy = value;
    else if (key == "fixed_sf") fixed_sf = std::stoi(value);
    else if (key == "per_threshold") per_threshold = std::stod(value);
    else if (key == "sf_eval_cr") sf_eval_cr = std::stoi(value);
    else if (key == "cr") cr = std::stoi(value);
    else if (key == "tx_power_dbm") tx_power_dbm = std::stod(value);
    else if (key == "noise_floor_dbm") noise_floor_dbm = std::stod(value);
    else if (key == "ref_loss_db") ref_loss_db = std::stod(value);
    else if (key == "path_exponent") path_exponent = std::stod(value);
    else if (key == "sim_time_multiplier") sim_time_multiplier = std::stod(value);
    else if (key == "max_transmissions") max_transmissions = std::stoi(value);
    else if (key == "ack_timeout_min_s") ack_timeout_min_s = std::stod(value);
    else if (key == "ack_timeout_max_s") ack_timeout_max_s = std::stod(value);
    else if (key == "master_seed") master_seed = std::stoull(value);
    else if (key == "run_index") run_index = std::stoull(value);
    else if (key == "output_prefix") output_prefix = value;
    else if (key == "error_model_csv") error_model_csv = value;
    else throw std::invalid_argument("unknown config key: " + key);
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad value for " + key + ": " + value);
  }
}

const std::vector<std::string>& ExperimentConfig::known_keys() {
  static const std::vector<std::string> keys = {
      "n_devices", "n_gateways", "radius_m", "us_period_s", "us_payload_bytes",
      "us_confirmed", "ds_mean_iat_s", "ds_payload_bytes", "ds_confirmed", "sf_strategy",
      "fixed_sf", "per_threshold", "sf_eval_cr", "cr", "tx_power_dbm", "noise_floor_dbm",
      "ref_loss_db", "path_exponent", "sim_time_multiplier", "max_transmissions",
      "ack_timeout_min_s", "ack_timeout_max_s", "master_seed", "run_index",
      "output_prefix", "error_model_csv"};
  return keys;
}

void ExperimentConfig::validate() const {
  if (n_devices < 1) throw std::invalid_argument("n_devices must be >= 1");
  if (n_gateways != 1 && n_gateways != 2 && n_gateways != 4)
    throw std::invalid_argument("n_gateways must be 1, 2 or 4");
  if (radius_m <= 0.0) throw std::invalid_argument("radius_m must be positive");
  if (us_period_s <= 0.0) throw std::invalid_argument("us_period_s must be positive");
  if (us_payload_bytes < 0 || ds_payload_bytes < 0)
    throw std::invalid_argument("payload sizes must be non-negative");
  if (sim_time_multiplier <= 0.0)
    throw std::invalid_argument("sim_time_multiplier must be positive");
  if (cr < 1 || cr > 3) throw std::invalid_argument("cr must be 1, 2 or 3");
  if (sf_eval_cr < 1 || sf_eval_cr > 3)
    throw std::invalid_argument("sf_eval_cr must be 1, 2 or 3");
  if (max_transmissions < 1 || max_transmissions > 8)
    throw std::invalid_argument("max_transmissions out of range [1, 8]");
  if (ack_timeout_min_s < 0.0 || ack_timeout_max_s < ack_timeout_min_s)
    throw std::invalid_argument("ack timeout range invalid");
  if (per_threshold <= 0.0 || per_threshold > 1.0)
    throw std::invalid_argument("per_threshold must be in (0, 1]");
  parse_sf_strategy(sf_strategy);  // throws on unknown names
  if (parse_sf_strategy(sf_strategy) == SfStrategy::kFixed && (fixed_sf < 7 || fixed_sf > 12))
    throw std::invalid_argument("fixed_sf out of range [7, 12]");
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream out;
  out << "n_devices=" << n_devices << '\n'
      << "n_gateways=" << n_gateways << '\n'
      << "radius_m=" << fmt_double(radius_m) << '\n'
      << "us_period_s=" << fmt_double(us_period_s) << '\n'
      << "us_payload_bytes=" << us_payload_bytes << '\n'
      << "us_confirmed=" << (us_confirmed ? 1 : 0) << '\n'
      << "ds_mean_iat_s=" << fmt_double(ds_mean_iat_s) << '\n'
      << "ds_payload_bytes=" << ds_payload_bytes << '\n'
      << "ds_confirmed=" << (ds_confirmed ? 1 : 0) << '\n'
      << "sf_strategy=" << sf_strategy << '\n'
      << "fixed_sf=" << fixed_sf << '\n'
      << "per_threshold=" << fmt_double(per_threshold) << '\n'
      << "sf_eval_cr=" << sf_eval_cr << '\n'
      << "cr=" << cr << '\n'
      << "tx_power_dbm=" << fmt_double(tx_power_dbm) << '\n'
      << "noise_floor_dbm=" << fmt_double(noise_floor_dbm) << '\n'
      << "ref_loss_db=" << fmt_double(ref_loss_db) << '\n'
      << "path_exponent=" << fmt_double(path_exponent) << '\n'
      << "sim_time_multiplier=" << fmt_double(sim_time_multiplier) << '\n'
      << "max_transmissions=" << max_transmissions << '\n'
      << "ack_timeout_min_s=" << fmt_double(ack_timeout_min_s) << '\n'
      << "ack_timeout_max_s=" << fmt_double(ack_timeout_max_s) << '\n'
      << "master_seed=" << master_seed << '\n'
      << "error_model_csv=" << error_model_csv << '\n';
  return out.str();
}

std::uint64_t ExperimentConfig::config_hash() const { return fnv1a(canonical()); }

namespace {

struct MessageRecord {
  int device = -1;
  bool confirmed = false;
  int status = 0;  // 0 pending, 1 delivered, 2 dropped
};

struct TxAccumulator {
  std::uint64_t message_id = 0;
  int device = -1;
  int sf = 12;
  int bytes = 0;
  bool any_success = false;
  bool destroyed = false;
  bool busy = false;
  bool below = false;
  bool unavail = false;
  bool aborted = false;
  int success_gw = -1;
};

struct DlSendRecord {
  std::uint64_t job_id = 0;
  bool is_ack = false;
  bool data_confirmed = false;
  int device = -1;
  int gateway = -1;
  int sf = 12;
  int bytes = 0;
  bool delivered = false;
  bool destroyed = false;
  bool saw_busy = false;
  bool saw_below = false;
  bool saw_unavail = false;
};

struct DsJobRecord {
  int device = -1;
  bool confirmed = false;
  int attempts = 0;
  int status = 0;  // 0 pending, 1 delivered, 2 dropped
};

struct TraceRow {
  double time = 0.0;
  int node = -1;
  char direction = 'U';
  int sf = 12;
  int bytes = 0;
  const char* outcome = "";
  DropCause cause = DropCause::kNone;
  int gateway = -1;
};

class Simulation {
 public:
  explicit Simulation(const ExperimentConfig& config)
      : config_(config), rng_(config.master_seed, config.run_index) {}

  RunResult run();

 private:
  void build_network();
  void wire_device(int i);
  void wire_gateway(GatewayNode& gw);
  void schedule_traffic();
  // Find-or-create: the medium notifies receivers synchronously inside
  // transmit(), so arrival hooks can run before the sender-side hook does.
  TxAccumulator& uplink_acc(const SignalRecord& sig);
  DlSendRecord& downlink_rec(const SignalRecord& sig);
  void resolve_uplink(std::uint64_t signal_id);
  void resolve_downlink(std::uint64_t frame_id);
  void finalize();
  void emit_files();

  ExperimentConfig config_;
  Scheduler sched_;
  RngProvider rng_;
  IdAllocator ids_;
  ErrorModelTable table_;
  LinkBudget budget_;
  Topology topo_;
  std::vector<int> sfs_;
  std::vector<Vec2> positions_;  // devices 0..N-1 then gateways
  std::unique_ptr<Medium> medium_;
  std::vector<std::unique_ptr<Phy>> dev_phys_;
  std::vector<std::unique_ptr<DeviceMac>> devices_;
  std::vector<std::unique_ptr<GatewayNode>> gateways_;
  std::unique_ptr<NetworkServer> ns_;

  MetricsLedger ledger_;
  std::unordered_map<std::uint64_t, MessageRecord> messages_;
  std::unordered_map<std::uint64_t, TxAccumulator> tx_acc_;
  std::unordered_map<std::uint64_t, DlSendRecord> dl_sends_;
  std::unordered_map<std::uint64_t, DsJobRecord> ds_jobs_;
  std::vector<TraceRow> trace_;
  bool keep_trace_ = false;
};

void Simulation::build_network() {
  table_ = config_.error_model_csv.empty() ? ErrorModelTable::builtin()
                                           : ErrorModelTable::from_csv(config_.error_model_csv);
  for (int sf = 7; sf <= 12; ++sf) {
    if (!table_.has(sf, config_.cr))
      throw std::invalid_argument("error model lacks row for sf " + std::to_string(sf) +
                                  ", cr " + std::to_string(config_.cr));
    if (parse_sf_strategy(config_.sf_strategy) == SfStrategy::kPerThreshold &&
        !table_.has(sf, config_.sf_eval_cr))
      throw std::invalid_argument("error model lacks row for sf " + std::to_string(sf) +
                                  ", cr " + std::to_string(config_.sf_eval_cr));
  }
  budget_ = {config_.ref_loss_db, config_.path_exponent, config_.noise_floor_dbm};

  topo_.radius_m = config_.radius_m;
  topo_.devices = place_devices(config_.n_devices, config_.radius_m,
                                rng_.stream("scenario/placement"));
  topo_.gateways = gateway_positions(config_.n_gateways, config_.radius_m);

  SfAssignmentConfig sf_cfg;
  sf_cfg.strategy = parse_sf_strategy(config_.sf_strategy);
  sf_cfg.fixed_sf = config_.fixed_sf;
  sf_cfg.per_threshold = config_.per_threshold;
  sf_cfg.eval_cr = config_.sf_eval_cr;
  sf_cfg.eval_payload_bytes = kFrameOverheadBytes + config_.us_payload_bytes;
  sf_cfg.tx_power_dbm = config_.tx_power_dbm;
  sfs_ = assign_sf(sf_cfg, topo_, table_, budget_, rng_.stream("scenario/sf"));

  positions_ = topo_.devices;
  positions_.insert(positions_.end(), topo_.gateways.begin(), topo_.gateways.end());

  auto power_fn = [this](int tx_node, int rx_node) {
    return budget_.received_power_dbm(config_.tx_power_dbm,
                                      distance(positions_[tx_node], positions_[rx_node]));
  };
  medium_ = std::make_unique<Medium>(sched_, table_, power_fn, config_.noise_floor_dbm);

  for (int i = 0; i < config_.n_devices; ++i) {
    std::string name = "dev" + std::to_string(i);
    auto phy = std::make_unique<Phy>(i, name, rng_.stream("phy/" + name));
    medium_->attach(phy.get());
    phy->tune(kUplinkChannelHz, sfs_[i]);

    DeviceMac::Config mc;
    mc.address = i;
    mc.uplink.sf = sfs_[i];
    mc.uplink.cr = config_.cr;
    mc.uplink.channel_hz = kUplinkChannelHz;
    mc.uplink.tx_power_dbm = config_.tx_power_dbm;
    mc.max_transmissions = config_.max_transmissions;
    mc.ack_timeout_min_s = config_.ack_timeout_min_s;
    mc.ack_timeout_max_s = config_.ack_timeout_max_s;
    auto mac = std::make_unique<DeviceMac>(mc, *phy, *medium_, sched_,
                                           rng_.stream("mac/" + name + "/ack"), ids_);
    dev_phys_.push_back(std::move(phy));
    devices_.push_back(std::move(mac));
    wire_device(i);
  }

  std::vector<GatewayNode*> gw_ptrs;
  for (int g = 0; g < config_.n_gateways; ++g) {
    auto gw = std::make_unique<GatewayNode>(config_.n_devices + g, kUplinkChannelHz,
                                            *medium_, sched_, rng_);
    wire_gateway(*gw);
    gw_ptrs.push_back(gw.get());
    gateways_.push_back(std::move(gw));
  }

  NetworkServer::Config nc;
  nc.cr = config_.cr;
  nc.tx_power_dbm = config_.tx_power_dbm;
  nc.ds_max_attempts = config_.max_transmissions;
  ns_ = std::make_unique<NetworkServer>(sched_, gw_ptrs, nc, ids_);

  ns_->hooks().on_upstream_processed = [this](const Frame&, int, bool duplicate) {
    if (duplicate) ++ledger_.duplicates;
  };
  ns_->hooks().on_downlink_tx = [this](const DownlinkJob& job, const Frame& frame,
                                       const LoRaTxParams& params, int gw_node, int) {
    auto [it, inserted] = dl_sends_.try_emplace(frame.frame_id);
    if (inserted) {
      // Nobody was tuned to the downlink channel, so no arrival created it.
      it->second.job_id = job.job_id;
      it->second.is_ack = job.is_ack;
      it->second.data_confirmed = job.confirmed && !job.is_ack;
      it->second.device = frame.dst_addr;
      it->second.gateway = gw_node;
      it->second.sf = params.sf;
      it->second.bytes = kFrameOverheadBytes + job.app_payload_bytes;
    }
    if (!job.is_ack) {
      ++ledger_.ds_transmissions;
      ds_jobs_[job.job_id].attempts = job.attempts_used;
    }
  };
  ns_->hooks().on_job_concluded = [this](const DownlinkJob& job, bool delivered) {
    auto& jr = ds_jobs_[job.job_id];
    jr.status = delivered ? 1 : 2;
    delivered ? ++ledger_.ds_delivered : ++ledger_.ds_drop_expired;
  };
}

TxAccumulator& Simulation::uplink_acc(const SignalRecord& sig) {
  auto [it, inserted] = tx_acc_.try_emplace(sig.signal_id);
  if (inserted) {
    it->second.message_id = sig.frame.message_id;
    it->second.device = sig.frame.src_addr;
    it->second.sf = sig.params.sf;
    it->second.bytes = sig.phy_payload_bytes;
  }
  return it->second;
}

DlSendRecord& Simulation::downlink_rec(const SignalRecord& sig) {
  auto [it, inserted] = dl_sends_.try_emplace(sig.frame.frame_id);
  if (inserted) {
    it->second.job_id = sig.frame.message_id;
    it->second.is_ack = sig.frame.ack;
    it->second.data_confirmed = sig.frame.confirmed;
    it->second.device = sig.frame.dst_addr;
    it->second.gateway = sig.source_node;
    it->second.sf = sig.params.sf;
    it->second.bytes = sig.phy_payload_bytes;
  }
  return it->second;
}

void Simulation::wire_device(int i) {
  DeviceMac& mac = *devices_[i];
  mac.hooks().on_tx_start = [this](const SignalRecord& sig, const TxQueueEntry&) {
    ++ledger_.us_transmissions;
    uplink_acc(sig);
    std::uint64_t sid = sig.signal_id;
    sched_.schedule_at(sig.end_time, [this, sid] { resolve_uplink(sid); });
  };
  mac.hooks().on_confirmed_concluded = [this](std::uint64_t message_id, bool delivered,
                                              int attempts, DropCause) {
    auto& m = messages_[message_id];
    m.status = delivered ? 1 : 2;
    ++ledger_.conf_concluded;
    ledger_.conf_tx_sum += static_cast<std::uint64_t>(attempts);
    delivered ? ++ledger_.us_delivered : ++ledger_.us_drop_expired;
  };
  mac.hooks().on_downlink_arrival = [this, i](const SignalRecord& sig, ArrivalDecision d) {
    if (sig.frame.uplink || sig.frame.dst_addr != i) return;
    DlSendRecord& rec = downlink_rec(sig);
    switch (d) {
      case ArrivalDecision::kIgnoreBusy: rec.saw_busy = true; break;
      case ArrivalDecision::kIgnoreBelowCutoff: rec.saw_below = true; break;
      case ArrivalDecision::kIgnoreUnavailable: rec.saw_unavail = true; break;
      default: break;
    }
  };
  mac.hooks().on_downlink_rx_complete = [this, i](const SignalRecord& sig, bool success) {
    if (sig.frame.uplink || sig.frame.dst_addr != i) return;
    DlSendRecord& rec = downlink_rec(sig);
    success ? rec.delivered = true : rec.destroyed = true;
  };
}

void Simulation::wire_gateway(GatewayNode& gw) {
  int gw_node = gw.node_id();
  gw.hooks().on_uplink_arrival = [this](const SignalRecord& sig, ArrivalDecision d) {
    if (!sig.frame.uplink) return;
    switch (d) {
      case ArrivalDecision::kIgnoreBusy:
        uplink_acc(sig).busy = true;
        ++ledger_.gw_arrival_busy;
        break;
      case ArrivalDecision::kIgnoreBelowCutoff:
        uplink_acc(sig).below = true;
        ++ledger_.gw_arrival_below_cutoff;
        break;
      case ArrivalDecision::kIgnoreUnavailable:
        uplink_acc(sig).unavail = true;
        ++ledger_.gw_arrival_unavailable;
        break;
      default:
        break;
    }
  };
  gw.hooks().on_uplink_rx_complete = [this, gw_node](const SignalRecord& sig, bool success) {
    if (!sig.frame.uplink) return;  // a neighbour gateway's downlink, not ours to process
    TxAccumulator& acc = uplink_acc(sig);
    if (success) {
      ++ledger_.gw_rx_ok;
      acc.any_success = true;
      if (acc.success_gw < 0) acc.success_gw = gw_node;
      NetworkServer::UplinkMeta meta{gw_node, sig.end_time, sig.params.sf,
                                     sig.params.channel_hz};
      ns_->on_upstream(sig.frame, meta);
    } else {
      ++ledger_.gw_rx_destroyed;
      acc.destroyed = true;
    }
  };
  gw.hooks().on_uplink_rx_aborted = [this](const SignalRecord& sig) {
    if (!sig.frame.uplink) return;
    ++ledger_.gw_rx_aborted;
    uplink_acc(sig).aborted = true;
  };
  gw.hooks().on_downlink_sent = [this](const SignalRecord& sig) {
    std::uint64_t fid = sig.frame.frame_id;
    sched_.schedule_at(sig.end_time, [this, fid] { resolve_downlink(fid); });
  };
}

void Simulation::schedule_traffic() {
  TrafficProfile profile;
  profile.us_period_s = config_.us_period_s;
  profile.us_payload_bytes = config_.us_payload_bytes;
  profile.us_confirmed = config_.us_confirmed;
  profile.ds_mean_iat_s = config_.ds_mean_iat_s;
  profile.ds_payload_bytes = config_.ds_payload_bytes;
  profile.ds_confirmed = config_.ds_confirmed;
  double sim_end = config_.sim_end_s();

  for (int i = 0; i < config_.n_devices; ++i) {
    std::string base = "traffic/dev" + std::to_string(i);
    for (double t : uplink_times(profile, sim_end, rng_.stream(base + "/us"))) {
      sched_.schedule_at(t, [this, i] {
        std::uint64_t mid = devices_[i]->enqueue(config_.us_payload_bytes, config_.us_confirmed);
        messages_[mid] = {i, config_.us_confirmed, 0};
        ++ledger_.us_generated;
      });
    }
    if (profile.ds_mean_iat_s > 0.0) {
      for (double t : downstream_times(profile, sim_end, rng_.stream(base + "/ds"))) {
        sched_.schedule_at(t, [this, i] {
          std::uint64_t jid =
              ns_->enqueue_downstream(i, config_.ds_payload_bytes, config_.ds_confirmed);
          ds_jobs_[jid] = {i, config_.ds_confirmed, 0, 0};
          ++ledger_.ds_generated;
        });
      }
    }
  }
}

void Simulation::resolve_uplink(std::uint64_t signal_id) {
  auto it = tx_acc_.find(signal_id);
  if (it == tx_acc_.end()) return;
  TxAccumulator acc = it->second;
  tx_acc_.erase(it);

  DropCause cause = DropCause::kNone;
  if (!acc.any_success) {
    if (acc.destroyed) cause = DropCause::kInterference;
    else if (acc.busy) cause = DropCause::kCollision;
    else if (acc.aborted || acc.unavail) cause = DropCause::kAborted;
    else cause = DropCause::kBelowCutoff;
  }
  if (keep_trace_)
    trace_.push_back({sched_.now(), acc.device, 'U', acc.sf, acc.bytes,
                      acc.any_success ? "received" : "dropped", cause, acc.success_gw});

  MessageRecord& m = messages_[acc.message_id];
  if (m.confirmed || m.status != 0) return;  // confirmed fate rests on the ack path
  if (acc.any_success) {
    m.status = 1;
    ++ledger_.us_delivered;
    return;
  }
  m.status = 2;
  switch (cause) {
    case DropCause::kInterference: ++ledger_.us_drop_interference; break;
    case DropCause::kCollision: ++ledger_.us_drop_collision; break;
    case DropCause::kAborted: ++ledger_.us_drop_aborted; break;
    default: ++ledger_.us_drop_below_cutoff; break;
  }
}

void Simulation::resolve_downlink(std::uint64_t frame_id) {
  auto it = dl_sends_.find(frame_id);
  if (it == dl_sends_.end()) return;
  DlSendRecord rec = it->second;
  dl_sends_.erase(it);

  DropCause cause = DropCause::kNone;
  if (!rec.delivered) {
    if (rec.destroyed) cause = DropCause::kInterference;
    else if (rec.saw_busy) cause = DropCause::kCollision;
    else if (rec.saw_unavail) cause = DropCause::kAborted;
    else if (rec.saw_below) cause = DropCause::kBelowCutoff;
    else cause = DropCause::kAborted;  // reached no listener at all
  }
  if (keep_trace_)
    trace_.push_back({sched_.now(), rec.device, 'D', rec.sf, rec.bytes,
                      rec.delivered ? "received" : "dropped", cause, rec.gateway});

  if (rec.is_ack || rec.data_confirmed) return;  // acks are not DS messages; confirmed jobs conclude via the server
  auto& jr = ds_jobs_[rec.job_id];
  if (jr.status != 0) return;
  if (rec.delivered) {
    jr.status = 1;
    ++ledger_.ds_delivered;
    return;
  }
  jr.status = 2;
  switch (cause) {
    case DropCause::kInterference: ++ledger_.ds_drop_interference; break;
    case DropCause::kCollision: ++ledger_.ds_drop_collision; break;
    case DropCause::kAborted: ++ledger_.ds_drop_aborted; break;
    default: ++ledger_.ds_drop_below_cutoff; break;
  }
}

void Simulation::finalize() {
  for (const auto& [id, m] : messages_)
    if (m.status == 0) ++ledger_.us_queued;
  for (const auto& [id, j] : ds_jobs_) {
    if (j.status != 0) continue;
    if (j.confirmed && j.attempts >= config_.max_transmissions)
      ++ledger_.ds_drop_expired;  // exhausted but the device never resurfaced
    else
      ++ledger_.ds_queued;
  }
  ledger_.ack_rw1 = ns_->ack_rw1();
  ledger_.ack_rw2 = ns_->ack_rw2();
  ledger_.missed_rws = ns_->missed_rws();
  if (!ledger_.conserved())
    throw std::logic_error("metrics ledger conservation violated");
}

void Simulation::emit_files() {
  const std::string& prefix = config_.output_prefix;
  write_topology_csv(prefix + "_topology.csv", topo_, sfs_);

  std::ofstream trace(prefix + "_trace.csv");
  if (!trace) throw std::runtime_error("cannot write trace CSV");
  trace << "time,node,direction,sf,bytes,outcome,drop_cause,gateway\n";
  char buf[64];
  for (const auto& row : trace_) {
    std::snprintf(buf, sizeof(buf), "%.6f", row.time);
    trace << buf << ',' << row.node << ',' << row.direction << ',' << row.sf << ','
          << row.bytes << ',' << row.outcome << ',' << to_string(row.cause) << ','
          << row.gateway << '\n';
  }
}

RunResult Simulation::run() {
  config_.validate();
  keep_trace_ = !config_.output_prefix.empty();
  if (keep_trace_) {
    // Fail on unwritable output locations before spending simulation time.
    std::ofstream probe(config_.output_prefix + "_summary.csv");
    if (!probe) throw std::runtime_error("unwritable output prefix: " + config_.output_prefix);
  }
  build_network();
  schedule_traffic();
  sched_.run_until(config_.sim_end_s());
  finalize();

  RunResult result;
  result.config = config_;
  result.ledger = ledger_;
  result.device_sfs = sfs_;
  for (int i = 0; i < config_.n_devices; ++i)
    result.airtimes.push_back({i, false, devices_[i]->rdc().airtime_used(kUplinkChannelHz),
                               devices_[i]->rdc().airtime_used(kDownlinkRw2ChannelHz)});
  for (auto& gw : gateways_)
    result.airtimes.push_back({gw->node_id(), true, gw->rdc().airtime_used(kUplinkChannelHz),
                               gw->rdc().airtime_used(kDownlinkRw2ChannelHz)});
  if (keep_trace_) {
    emit_files();
    write_summary_csv(config_.output_prefix + "_summary.csv", {result});
  }
  return result;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
  Simulation sim(config);
  return sim.run();
}

RunResult run_assignment(const ExperimentConfig& config) {
  config.validate();
  ErrorModelTable table = config.error_model_csv.empty()
                              ? ErrorModelTable::builtin()
                              : ErrorModelTable::from_csv(config.error_model_csv);
  LinkBudget budget{config.ref_loss_db, config.path_exponent, config.noise_floor_dbm};
  RngProvider rng(config.master_seed, config.run_index);

  Topology topo;
  topo.radius_m = config.radius_m;
  topo.devices = place_devices(config.n_devices, config.radius_m,
                               rng.stream("scenario/placement"));
  topo.gateways = gateway_positions(config.n_gateways, config.radius_m);

  SfAssignmentConfig sf_cfg;
  sf_cfg.strategy = parse_sf_strategy(config.sf_strategy);
  sf_cfg.fixed_sf = config.fixed_sf;
  sf_cfg.per_threshold = config.per_threshold;
  sf_cfg.eval_cr = config.sf_eval_cr;
  sf_cfg.eval_payload_bytes = kFrameOverheadBytes + config.us_payload_bytes;
  sf_cfg.tx_power_dbm = config.tx_power_dbm;

  RunResult result;
  result.config = config;
  result.device_sfs = assign_sf(sf_cfg, topo, table, budget, rng.stream("scenario/sf"));
  if (!config.output_prefix.empty())
    write_topology_csv(config.output_prefix + "_topology.csv", topo, result.device_sfs);
  return result;
}

std::string summary_csv_header() {
  return "config_hash,run_index,master_seed,n_devices,n_gateways,radius_m,us_period_s,"
         "us_payload_bytes,us_confirmed,ds_mean_iat_s,ds_payload_bytes,ds_confirmed,"
         "sf_strategy,fixed_sf,per_threshold,sf_eval_cr,cr,tx_power_dbm,noise_floor_dbm,"
         "ref_loss_db,path_exponent,sim_time_multiplier,max_transmissions,"
         "ack_timeout_min_s,ack_timeout_max_s,"
         "us_generated,us_delivered,us_queued,us_drop_collision,us_drop_interference,"
         "us_drop_below_cutoff,us_drop_aborted,us_drop_expired,us_transmissions,us_pdr,"
         "conf_concluded,conf_tx_avg,"
         "ds_generated,ds_delivered,ds_queued,ds_drop_collision,ds_drop_interference,"
         "ds_drop_below_cutoff,ds_drop_aborted,ds_drop_expired,ds_transmissions,ds_pdr,"
         "ack_rw1,ack_rw2,missed_rws,duplicates,"
         "gw_rx_ok,gw_rx_destroyed,gw_arrival_busy,gw_arrival_below_cutoff,"
         "gw_arrival_unavailable,gw_rx_aborted";
}

std::string summary_csv_row(const RunResult& result) {
  const ExperimentConfig& c = result.config;
  const MetricsLedger& l = result.ledger;
  std::ostringstream out;
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(c.config_hash()));
  auto opt = [](const std::optional<double>& v) {
    return v ? fmt_double(*v) : std::string();
  };
  out << hash << ',' << c.run_index << ',' << c.master_seed << ',' << c.n_devices << ','
      << c.n_gateways << ',' << fmt_double(c.radius_m) << ',' << fmt_double(c.us_period_s)
      << ',' << c.us_payload_bytes << ',' << (c.us_confirmed ? 1 : 0) << ','
      << fmt_double(c.ds_mean_iat_s) << ',' << c.ds_payload_bytes << ','
      << (c.ds_confirmed ? 1 : 0) << ',' << c.sf_strategy << ',' << c.fixed_sf << ','
      << fmt_double(c.per_threshold) << ',' << c.sf_eval_cr << ',' << c.cr << ','
      << fmt_double(c.tx_power_dbm) << ',' << fmt_double(c.noise_floor_dbm) << ','
      << fmt_double(c.ref_loss_db) << ',' << fmt_double(c.path_exponent) << ','
      << fmt_double(c.sim_time_multiplier) << ',' << c.max_transmissions << ','
      << fmt_double(c.ack_timeout_min_s) << ',' << fmt_double(c.ack_timeout_max_s) << ','
      << l.us_generated << ',' << l.us_delivered << ',' << l.us_queued << ','
      << l.us_drop_collision << ',' << l.us_drop_interference << ','
      << l.us_drop_below_cutoff << ',' << l.us_drop_aborted << ',' << l.us_drop_expired
      << ',' << l.us_transmissions << ',' << opt(l.us_pdr()) << ',' << l.conf_concluded
      << ',' << opt(l.conf_tx_avg()) << ',' << l.ds_generated << ',' << l.ds_delivered
      << ',' << l.ds_queued << ',' << l.ds_drop_collision << ',' << l.ds_drop_interference
      << ',' << l.ds_drop_below_cutoff << ',' << l.ds_drop_aborted << ','
      << l.ds_drop_expired << ',' << l.ds_transmissions << ',' << opt(l.ds_pdr()) << ','
      << l.ack_rw1 << ',' << l.ack_rw2 << ',' << l.missed_rws << ',' << l.duplicates << ','
      << l.gw_rx_ok << ',' << l.gw_rx_destroyed << ',' << l.gw_arrival_busy << ','
      << l.gw_arrival_below_cutoff << ',' << l.gw_arrival_unavailable << ','
      << l.gw_rx_aborted;
  return out.str();
}

void write_summary_csv(const std::string& path, const std::vector<RunResult>& results) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write summary CSV: " + path);
  out << summary_csv_header() << '\n';
  for (const auto& r : results) out << summary_csv_row(r) << '\n';
}

}  // namespace lorawan
