#include "dmrf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dmrf {

std::string_view to_string(BaselineKind k) noexcept {
  switch (k) {
    case BaselineKind::GreedyMinDelay: return "GREEDY_MIN_DELAY";
    case BaselineKind::GreedyMaxRate: return "GREEDY_MAX_RATE";
    case BaselineKind::Bypass: return "BYPASS";
  }
  return "?";
}

ForwardDecision greedy_min_delay(const NodeView& view, const Packet& packet, Millis now) {
  if (remaining_time(packet, now) <= 0.0) return Drop{DropReason::Expired};
  const CandidateEntry* best = nullptr;
  for (const auto& e : view.fcs) {
    if (best == nullptr || e.delay_est < best->delay_est ||
        (e.delay_est == best->delay_est && e.candidate < best->candidate)) {
      best = &e;
    }
  }
  if (best == nullptr) return Drop{DropReason::NoRoute};
  return Forward{best->candidate, RateClass::Medium};
}

ForwardDecision greedy_max_rate(const NodeView& view, const Packet& packet, Millis now) {
  if (remaining_time(packet, now) <= 0.0) return Drop{DropReason::Expired};
  const double own = view.distance_to_sink(view.self);
  const CandidateEntry* best = nullptr;
  double best_rate = -1.0;
  for (const auto& e : view.fcs) {
    const double progress = own - view.distance_to_sink(e.candidate);
    const double rate = e.delay_est > 0.0 ? progress / e.delay_est : progress;
    if (best == nullptr || rate > best_rate ||
        (rate == best_rate && e.candidate < best->candidate)) {
      best = &e;
      best_rate = rate;
    }
  }
  if (best == nullptr) return Drop{DropReason::NoRoute};
  return Forward{best->candidate, RateClass::Medium};
}

namespace {

double angle_of(Point from, Point to) { return std::atan2(to.y - from.y, to.x - from.x); }

/// Counterclockwise rotation from `ref` to `a`, in (0, 2*pi].
double ccw_from(double ref, double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double d = std::fmod(a - ref, kTwoPi);
  if (d <= 0.0) d += kTwoPi;
  return d;
}

}  // namespace

ForwardDecision bypass_next_hop(const NodeView& view, Packet& packet, Millis now) {
  if (remaining_time(packet, now) <= 0.0) return Drop{DropReason::Expired};
  const double own = view.distance_to_sink(view.self);
  if (packet.perimeter_anchor && own < *packet.perimeter_anchor) packet.perimeter_anchor.reset();

  if (!packet.perimeter_anchor && !view.fcs.empty()) {
    const CandidateEntry* best = nullptr;
    for (const auto& e : view.fcs) {
      if (best == nullptr ||
          view.distance_to_sink(e.candidate) < view.distance_to_sink(best->candidate)) {
        best = &e;
      }
    }
    return Forward{best->candidate, RateClass::Medium};
  }

  const Point here = view.position(view.self);
  double ref = 0.0;
  std::optional<NodeId> previous;
  if (!packet.perimeter_anchor) {
    packet.perimeter_anchor = own;
    ref = angle_of(here, view.position(view.sink));
  } else {
    if (packet.hop_trace.size() >= 2) previous = packet.hop_trace[packet.hop_trace.size() - 2];
    ref = previous ? angle_of(here, view.position(*previous))
                   : angle_of(here, view.position(view.sink));
  }

  std::optional<NodeId> next;
  double best = 0.0;
  for (NodeId n : view.perimeter_neighbors) {
    const double rot = ccw_from(ref, angle_of(here, view.position(n)));
    if (!next || rot < best) {
      next = n;
      best = rot;
    }
  }
  if (!next) return Drop{DropReason::NoRoute};
  // A face walk may pass a node twice (around a pendant node), but taking the
  // same directed hop twice means the packet is circling.
  const auto& trace = packet.hop_trace;
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    if (trace[i] == view.self && trace[i + 1] == *next) return Drop{DropReason::NoRoute};
  }
  return Forward{*next, RateClass::Medium};
}

ForwardDecision baseline_next_hop(BaselineKind kind, const NodeView& view, Packet& packet,
                                  Millis now) {
  switch (kind) {
    case BaselineKind::GreedyMinDelay: return greedy_min_delay(view, packet, now);
    case BaselineKind::GreedyMaxRate: return greedy_max_rate(view, packet, now);
    case BaselineKind::Bypass: return bypass_next_hop(view, packet, now);
  }
  return Drop{DropReason::NoRoute};
}

std::vector<std::vector<NodeId>> planar_neighbors(const Topology& topo) {
  std::vector<std::vector<NodeId>> out(topo.size());
  for (std::size_t u = 0; u < topo.size(); ++u) {
    const NodeId a = node_id(u);
    for (NodeId b : topo.neighbors(a)) {
      const double duv = topo.distance(a, b);
      bool keep = true;
      for (NodeId w : topo.neighbors(a)) {
        if (w == b) continue;
        if (std::max(topo.distance(a, w), topo.distance(b, w)) < duv) {
          keep = false;
          break;
        }
      }
      if (keep) out[u].push_back(b);
    }
  }
  return out;
}

}  // namespace dmrf
