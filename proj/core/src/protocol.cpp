#include "dmrf/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace dmrf {

double compute_lambda(Millis remaining, Millis estimated) {
  if (!(estimated > 0.0)) {
    throw InvalidInput("estimated transmission time must be positive, got " +
                       std::to_string(estimated));
  }
  if (remaining <= 0.0) return 0.0;
  return remaining / estimated;
}

std::optional<Thresholds> compute_thresholds(double theta_jump, Millis sink_delay,
                                             Millis max_fcs_delay, Millis max_next_hop_delay,
                                             Millis mean_hop_delay, Millis remaining,
                                             double omega_floor) {
  if (!std::isfinite(sink_delay)) return std::nullopt;
  if (!(sink_delay > 0.0)) throw InvalidInput("sink delay must be positive");
  if (!(theta_jump > 0.0 && theta_jump < 1.0)) throw InvalidInput("theta_jump must lie in (0,1)");
  constexpr double kInf = std::numeric_limits<double>::infinity();

  Thresholds th;
  th.jump = theta_jump;
  th.omega = std::clamp((remaining - max_next_hop_delay) / sink_delay, omega_floor, 1.0);
  th.high = theta_jump + max_fcs_delay / sink_delay;
  if (!(th.high > th.jump)) th.high = std::nextafter(th.jump, kInf);
  th.low = th.high / th.omega + mean_hop_delay / sink_delay;
  if (!(th.low > th.high)) th.low = std::nextafter(th.high, kInf);
  return th;
}

std::optional<RateClass> rate_band(double lambda, const Thresholds& th) noexcept {
  if (lambda >= th.low) return RateClass::Low;
  if (lambda >= th.high) return RateClass::Medium;
  if (lambda > th.jump) return RateClass::High;
  return std::nullopt;
}

RateClass smooth_rate(RateClass previous, RateClass wanted) noexcept {
  const bool jump_across = (previous == RateClass::Low && wanted == RateClass::High) ||
                           (previous == RateClass::High && wanted == RateClass::Low);
  return jump_across ? RateClass::Medium : wanted;
}

void jump_probabilities(std::span<CandidateEntry> entries) {
  if (entries.empty()) return;
  double total = 0.0;
  for (const auto& e : entries) total += e.suc;
  if (total > 0.0) {
    for (auto& e : entries) e.jump_p = e.suc / total;
  } else {
    const double p = 1.0 / static_cast<double>(entries.size());
    for (auto& e : entries) e.jump_p = p;
  }
}

std::optional<NodeId> choose_jump_target(std::span<const CandidateEntry> entries, Rng& rng,
                                         std::optional<NodeId> sink_in_range) {
  std::vector<const CandidateEntry*> usable;
  usable.reserve(entries.size());
  double mass = 0.0;
  for (const auto& e : entries) {
    if (e.cached_state == NodeState::Faulty) continue;
    usable.push_back(&e);
    mass += e.jump_p;
  }
  if (usable.empty()) return sink_in_range;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double draw = u(rng);
  if (!(mass > 0.0)) {
    const auto k = std::min(usable.size() - 1, static_cast<std::size_t>(draw * usable.size()));
    return usable[k]->candidate;
  }
  const double target = draw * mass;
  double acc = 0.0;
  for (const auto* e : usable) {
    acc += e->jump_p;
    if (target < acc) return e->candidate;
  }
  // Rounding left the draw just past the last bucket; take the last positive one.
  for (auto it = usable.rbegin(); it != usable.rend(); ++it) {
    if ((*it)->jump_p > 0.0) return (*it)->candidate;
  }
  return usable.back()->candidate;
}

DmrfNode::DmrfNode(NodeId self, NodeId sink, Millis sink_delay, Millis mean_hop_delay,
                   std::vector<CandidateEntry> candidates, std::span<const NodeId> fcs,
                   ProtocolParams params)
    : self_(self),
      sink_(sink),
      sink_delay_(sink_delay),
      mean_hop_delay_(mean_hop_delay),
      cand_(std::move(candidates)),
      params_(params) {
  std::sort(cand_.begin(), cand_.end(),
            [](const auto& a, const auto& b) { return a.candidate < b.candidate; });
  for (NodeId id : fcs) {
    auto it = std::lower_bound(cand_.begin(), cand_.end(), id,
                               [](const CandidateEntry& e, NodeId v) { return e.candidate < v; });
    if (it == cand_.end() || it->candidate != id) {
      throw InvalidInput("FCS member missing from the jump candidate set");
    }
    fcs_.push_back(static_cast<std::size_t>(it - cand_.begin()));
  }
  for (auto& e : cand_) e.confidence.threshold = params_.confidence_threshold;
  jump_probabilities(cand_);
  state_ = derive_state();
}

std::vector<CandidateEntry> DmrfNode::fcs() const {
  std::vector<CandidateEntry> out;
  out.reserve(fcs_.size());
  for (auto i : fcs_) out.push_back(cand_[i]);
  return out;
}

std::vector<NodeState> DmrfNode::fcs_states() const {
  std::vector<NodeState> out;
  out.reserve(fcs_.size());
  for (auto i : fcs_) out.push_back(cand_[i].cached_state);
  return out;
}

const CandidateEntry* DmrfNode::find(NodeId id) const noexcept {
  auto it = std::lower_bound(cand_.begin(), cand_.end(), id,
                             [](const CandidateEntry& e, NodeId v) { return e.candidate < v; });
  return (it != cand_.end() && it->candidate == id) ? &*it : nullptr;
}

CandidateEntry* DmrfNode::entry(NodeId id) noexcept {
  return const_cast<CandidateEntry*>(std::as_const(*this).find(id));
}

NodeState DmrfNode::derive_state() const {
  if (self_ == sink_) return NodeState::Normal;  // the destination is never a dead end
  const auto states = fcs_states();
  auto all = [&](auto pred) { return std::all_of(states.begin(), states.end(), pred); };
  if (states.empty() || all([](NodeState s) { return s == NodeState::Void; })) {
    return NodeState::Void;
  }
  if (all([](NodeState s) { return s == NodeState::Faulty || s == NodeState::JFaulty; })) {
    return NodeState::JFaulty;
  }
  if (congested_) return NodeState::Cong;
  if (all([](NodeState s) { return s == NodeState::Cong || s == NodeState::JCong; })) {
    return NodeState::JCong;
  }
  return NodeState::Normal;
}

Detection DmrfNode::refresh_state(std::vector<StateUpdate> updates) {
  Detection d;
  d.candidate_updates = std::move(updates);
  d.before = state_;
  state_ = derive_state();
  d.after = state_;
  if (d.changed()) {
    FeedbackMessage msg;
    msg.origin = self_;
    msg.subject = self_;
    msg.hop_limit = 0;
    switch (state_) {
      case NodeState::Void: msg.kind = FeedbackKind::Void; break;
      case NodeState::JFaulty:
      case NodeState::Faulty: msg.kind = FeedbackKind::Fault; break;
      case NodeState::Cong:
      case NodeState::JCong: msg.kind = FeedbackKind::Cong; break;
      case NodeState::Normal: msg.kind = FeedbackKind::Recover; break;
    }
    d.feedback = msg;
  }
  return d;
}

Millis DmrfNode::max_fcs_link_delay() const {
  Millis m = 0.0;
  for (auto i : fcs_) m = std::max(m, cand_[i].link_delay);
  return m;
}

std::optional<NodeId> DmrfNode::sink_if_in_range() const {
  return find(sink_) ? std::optional<NodeId>(sink_) : std::nullopt;
}

std::optional<Thresholds> DmrfNode::thresholds(Millis remaining) const {
  const Millis maxd = max_fcs_link_delay();
  return compute_thresholds(params_.theta_jump, sink_delay_, maxd, maxd, mean_hop_delay_,
                            remaining, params_.omega_floor);
}

Detection DmrfNode::detect_faulty(std::span<const ProbeResult> probes) {
  std::vector<StateUpdate> updates;
  for (const auto& pr : probes) {
    CandidateEntry* e = entry(pr.candidate);
    if (e == nullptr) continue;
    NodeState next = e->cached_state;
    if (pr.replied) {
      e->confidence.reset();
      e->set_link_delay(pr.measured_delay);
      next = pr.reported_state;
    } else {
      e->confidence.decrease(params_.confidence_step);
      if (e->confidence.faulty()) next = NodeState::Faulty;
    }
    if (next != e->cached_state) {
      e->cached_state = next;
      updates.push_back({pr.candidate, next});
    }
  }
  return refresh_state(std::move(updates));
}

Detection DmrfNode::record_missed_reply(NodeId candidate) {
  ProbeResult pr;
  pr.candidate = candidate;
  pr.replied = false;
  return detect_faulty(std::span<const ProbeResult>(&pr, 1));
}

Detection DmrfNode::detect_congestion(double used_bytes, double capacity_bytes,
                                      double arrival_rate_per_ms, double packet_bytes) {
  if (!(capacity_bytes > 0.0)) throw InvalidInput("buffer capacity must be positive");
  const double occupancy = used_bytes / capacity_bytes;
  const double forecast =
      occupancy + arrival_rate_per_ms * params_.cong_horizon * packet_bytes / capacity_bytes;
  if (forecast >= params_.theta_cong) {
    congested_ = true;
  } else if (congested_ && forecast < params_.theta_cong - params_.cong_hysteresis) {
    congested_ = false;
  }
  return refresh_state({});
}

Detection DmrfNode::detect_void() { return refresh_state({}); }

Detection DmrfNode::set_candidate_state(NodeId candidate, NodeState state) {
  std::vector<StateUpdate> updates;
  if (CandidateEntry* e = entry(candidate); e != nullptr && e->cached_state != state) {
    e->cached_state = state;
    updates.push_back({candidate, state});
  }
  return refresh_state(std::move(updates));
}

void DmrfNode::set_link_delay(NodeId candidate, Millis delay) {
  if (CandidateEntry* e = entry(candidate)) e->set_link_delay(delay);
}

ForwardDecision DmrfNode::select_next_hop(Packet& packet, Millis now, Rng& rng) {
  const Millis remaining = remaining_time(packet, now);
  if (remaining <= 0.0) return Drop{DropReason::Expired};

  auto jump = [&]() -> ForwardDecision {
    // Prefer targets that can still meet the deadline; any target otherwise.
    std::vector<CandidateEntry> feasible;
    for (const auto& e : cand_) {
      if (e.delay_est <= remaining) feasible.push_back(e);
    }
    const auto target = choose_jump_target(feasible.empty() ? std::span<const CandidateEntry>(cand_)
                                                            : std::span<const CandidateEntry>(feasible),
                                           rng, sink_if_in_range());
    if (!target) return Drop{DropReason::NoRoute};
    packet.mode = TransmitMode::Jump;
    return Jump{*target};
  };

  if (state_ == NodeState::JFaulty || state_ == NodeState::Void || state_ == NodeState::JCong) {
    return jump();
  }
  const auto th = thresholds(remaining);
  if (!th) return jump();
  const auto band = rate_band(compute_lambda(remaining, sink_delay_), *th);
  if (!band) return jump();

  CandidateEntry* best = nullptr;
  for (auto i : fcs_) {
    CandidateEntry& e = cand_[i];
    if (e.cached_state != NodeState::Normal || e.delay_est > remaining) continue;
    if (best == nullptr || e.tx_count < best->tx_count ||
        (e.tx_count == best->tx_count && e.delay_est > best->delay_est)) {
      best = &e;  // fcs_ is ascending by id, so equal keys keep the smaller id
    }
  }
  if (best == nullptr) return jump();

  best->tx_count += 1;
  packet.rate = smooth_rate(packet.rate, *band);
  packet.mode = TransmitMode::HopByHop;
  return Forward{best->candidate, packet.rate};
}

std::optional<FeedbackMessage> DmrfNode::on_jump_result(NodeId target, bool success) {
  CandidateEntry* e = entry(target);
  if (e == nullptr) return std::nullopt;
  e->attempts += 1;
  const double attempts = static_cast<double>(e->attempts);
  if (success) {
    e->successes += 1;
    e->suc = static_cast<double>(e->successes) / attempts;
  } else {
    // Literal penalty (S - 1) / T, clamped so a never-successful target sits at zero.
    e->suc = (e->successes > 0 ? static_cast<double>(e->successes - 1) : 0.0) / attempts;
  }
  jump_probabilities(cand_);
  if (success) return std::nullopt;
  FeedbackMessage msg;
  msg.kind = FeedbackKind::JumpFail;
  msg.origin = self_;
  msg.subject = target;
  msg.hop_limit = 0;
  return msg;
}

FeedbackOutcome DmrfNode::on_feedback(const FeedbackMessage& msg, Rng& rng) {
  FeedbackOutcome out;
  switch (msg.kind) {
    case FeedbackKind::Fault:
      out.state_change = set_candidate_state(
          msg.subject, msg.subject == msg.origin ? NodeState::JFaulty : NodeState::Faulty);
      break;
    case FeedbackKind::Cong:
      out.state_change = set_candidate_state(msg.subject, NodeState::Cong);
      break;
    case FeedbackKind::Recover:
      out.state_change = set_candidate_state(msg.subject, NodeState::Normal);
      break;
    case FeedbackKind::Void:
      out.state_change = set_candidate_state(msg.subject, NodeState::Void);
      break;
    case FeedbackKind::JumpFail: {
      if (CandidateEntry* e = entry(msg.origin)) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double tau = u(rng);
        e->suc *= tau;
        out.tau = tau;
        jump_probabilities(cand_);
      }
      if (msg.hop_limit > 0) {
        FeedbackMessage fwd = msg;
        fwd.origin = self_;
        fwd.hop_limit = msg.hop_limit - 1;
        out.forward = fwd;
      }
      break;
    }
  }
  if (out.state_change && !out.state_change->changed() &&
      out.state_change->candidate_updates.empty()) {
    out.state_change.reset();
  }
  return out;
}

DmrfNode make_dmrf_node(const Topology& topo, NodeId node, std::span<const Millis> sink_delays,
                        Millis mean_hop_delay, const ProtocolParams& params) {
  const double own = topo.distance_to_sink(node);
  std::vector<NodeId> ids;
  for (std::size_t j = 0; j < topo.size(); ++j) {
    const NodeId other = node_id(j);
    if (other == node) continue;
    if (topo.distance_to_sink(other) < own && topo.distance(node, other) <= topo.max_tx_distance()) {
      ids.push_back(other);
    }
  }
  auto entries = fresh_entries(ids);
  for (auto& e : entries) {
    e.sink_delay = sink_delays[to_index(e.candidate)];
    e.set_link_delay(mean_hop_delay);
  }
  const auto fcs = forward_neighbors(topo, node);
  return DmrfNode(node, topo.sink(), sink_delays[to_index(node)], mean_hop_delay,
                  std::move(entries), fcs, params);
}

}  // namespace dmrf
