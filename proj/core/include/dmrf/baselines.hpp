#pragma once

// Comparison forwarders: greedy minimum-delay (SPEED-T style), greedy
// maximum-rate (SPEED-S style) and a greedy/perimeter bypass (FTSPEED style).
// None of them jump, learn, or send feedback.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dmrf/model.hpp"
#include "dmrf/protocol.hpp"
#include "dmrf/topology.hpp"

namespace dmrf {

enum class BaselineKind : std::uint8_t { GreedyMinDelay, GreedyMaxRate, Bypass };

std::string_view to_string(BaselineKind k) noexcept;

/// What a baseline may look at when choosing a next hop.
struct NodeView {
  NodeId self{};
  NodeId sink{};
  /// All node positions, indexed by id.
  std::span<const Point> positions;
  /// Forwarding candidates with their current link delay estimates.
  std::span<const CandidateEntry> fcs;
  /// Planarized neighbor list used for perimeter traversal.
  std::span<const NodeId> perimeter_neighbors;

  [[nodiscard]] Point position(NodeId id) const { return positions[to_index(id)]; }
  [[nodiscard]] double distance_to_sink(NodeId id) const {
    return distance(position(id), position(sink));
  }
};

ForwardDecision greedy_min_delay(const NodeView& view, const Packet& packet, Millis now);

/// Maximizes geographic progress per millisecond of link delay.
ForwardDecision greedy_max_rate(const NodeView& view, const Packet& packet, Millis now);

/// Greedy maximum progress; right-hand perimeter traversal while the FCS is
/// empty, until the packet is closer to the sink than where recovery began.
ForwardDecision bypass_next_hop(const NodeView& view, Packet& packet, Millis now);

ForwardDecision baseline_next_hop(BaselineKind kind, const NodeView& view, Packet& packet,
                                  Millis now);

/// Relative-neighborhood-graph subset of each node's neighbor list (planar on
/// lattices), used for perimeter traversal.
std::vector<std::vector<NodeId>> planar_neighbors(const Topology& topo);

}  // namespace dmrf
