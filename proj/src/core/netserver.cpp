#include "core/netserver.hpp"

#include <algorithm>

namespace lorawan {

NetworkServer::NetworkServer(Scheduler& scheduler, std::vector<GatewayNode*> gateways,
                             Config config, IdAllocator& ids)
    : scheduler_(scheduler), config_(config), ids_(ids) {
  for (GatewayNode* gw : gateways) gateways_.emplace(gw->node_id(), gw);
}

DeviceContext& NetworkServer::context(int address) {
  auto [it, inserted] = contexts_.try_emplace(address);
  if (inserted) it->second.address = address;
  return it->second;
}

void NetworkServer::on_upstream(const Frame& frame, const UplinkMeta& meta) {
  DeviceContext& ctx = context(frame.src_addr);

  auto gw_it = std::find(ctx.gateways.begin(), ctx.gateways.end(), meta.gateway_node);
  if (gw_it != ctx.gateways.end()) ctx.gateways.erase(gw_it);
  ctx.gateways.insert(ctx.gateways.begin(), meta.gateway_node);

  bool duplicate =
      ctx.seen && frame.fcnt == ctx.last_fcnt && meta.end_time == ctx.last_uplink_end;
  if (hooks_.on_upstream_processed) hooks_.on_upstream_processed(frame, meta.gateway_node, duplicate);
  if (duplicate) return;  // same transmission heard through another gateway

  ctx.seen = true;
  ctx.last_fcnt = frame.fcnt;
  ctx.last_uplink_end = meta.end_time;
  ctx.last_sf = meta.sf;
  ctx.last_channel_hz = meta.channel_hz;
  ctx.last_seen_time = scheduler_.now();

  if (frame.ack) handle_ack(ctx);
  prune_expired(ctx);

  if (frame.confirmed) {
    bool have_ack_job = std::any_of(ctx.queue.begin(), ctx.queue.end(),
                                    [](const DownlinkJob& j) { return j.is_ack; });
    if (!have_ack_job) {
      DownlinkJob ack;
      ack.job_id = ids_.next_message_id++;
      ack.is_ack = true;
      ack.created_time = scheduler_.now();
      ctx.queue.push_front(ack);
    }
  }

  scheduler_.cancel(ctx.rw1_timer);
  scheduler_.cancel(ctx.rw2_timer);
  ctx.pair_served = false;
  DeviceContext* cp = &ctx;
  ctx.rw1_timer =
      scheduler_.schedule_at(meta.end_time + kRw1DelayS, [this, cp] { on_rw_timer(*cp, 1); });
  ctx.rw2_timer =
      scheduler_.schedule_at(meta.end_time + kRw2DelayS, [this, cp] { on_rw_timer(*cp, 2); });
}

void NetworkServer::handle_ack(DeviceContext& ctx) {
  auto it = std::find_if(ctx.queue.begin(), ctx.queue.end(), [](const DownlinkJob& j) {
    return j.confirmed && !j.is_ack && j.sent;
  });
  if (it == ctx.queue.end()) return;  // ack with nothing pending
  DownlinkJob job = *it;
  ctx.queue.erase(it);
  if (hooks_.on_job_concluded) hooks_.on_job_concluded(job, true);
}

void NetworkServer::prune_expired(DeviceContext& ctx) {
  while (!ctx.queue.empty()) {
    const DownlinkJob& head = ctx.queue.front();
    if (!(head.confirmed && !head.is_ack && head.sent && head.remaining_attempts == 0)) break;
    DownlinkJob job = head;
    ctx.queue.pop_front();
    if (hooks_.on_job_concluded) hooks_.on_job_concluded(job, false);
  }
}

std::uint64_t NetworkServer::enqueue_downstream(int address, int app_payload_bytes,
                                                bool confirmed) {
  DeviceContext& ctx = context(address);
  DownlinkJob job;
  job.job_id = ids_.next_message_id++;
  job.app_payload_bytes = app_payload_bytes;
  job.confirmed = confirmed;
  job.remaining_attempts = confirmed ? config_.ds_max_attempts : 1;
  job.created_time = scheduler_.now();
  ctx.queue.push_back(job);
  return job.job_id;
}

void NetworkServer::on_rw_timer(DeviceContext& ctx, int window) {
  if (ctx.pair_served || ctx.queue.empty()) return;
  DownlinkJob& job = ctx.queue.front();

  LoRaTxParams params;
  params.cr = config_.cr;
  params.tx_power_dbm = config_.tx_power_dbm;
  if (window == 1) {
    params.sf = ctx.last_sf;
    params.channel_hz = ctx.last_channel_hz;
  } else {
    params.sf = config_.rw2_sf;
    params.channel_hz = config_.rw2_channel_hz;
  }

  Frame frame;
  frame.frame_id = ids_.next_frame_id++;
  frame.message_id = job.job_id;
  frame.src_addr = -1;
  frame.dst_addr = ctx.address;
  frame.uplink = false;
  frame.confirmed = job.confirmed && !job.is_ack;
  frame.ack = job.is_ack;
  frame.app_payload_bytes = job.app_payload_bytes;

  int bytes = kFrameOverheadBytes + job.app_payload_bytes;
  for (int gw_node : ctx.gateways) {
    GatewayNode* gw = gateways_.at(gw_node);
    if (gw->send_downlink(frame, params, bytes) != GatewayNode::SendResult::kSent) continue;
    ctx.pair_served = true;
    job.sent = true;
    ++job.attempts_used;
    --job.remaining_attempts;
    if (hooks_.on_downlink_tx) hooks_.on_downlink_tx(job, frame, params, gw_node, window);
    if (job.is_ack) {
      window == 1 ? ++ack_rw1_ : ++ack_rw2_;
      ctx.queue.pop_front();
    } else if (!job.confirmed) {
      ctx.queue.pop_front();  // single shot; delivery is the device's story
    }
    return;
  }
  if (window == 2) {
    ++missed_rws_;
    if (hooks_.on_missed_rw) hooks_.on_missed_rw(ctx.address, 2);
  }
}

}  // namespace lorawan
