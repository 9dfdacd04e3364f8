#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "dmrf/model.hpp"

namespace dmrf {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

double distance(Point a, Point b) noexcept;

struct Region {
  double width = 20.0;
  double height = 20.0;
};

enum class DeployMode : std::uint8_t { UniformGrid, Random };

/// Node deployment plus the radio ranges that define its neighbor graph.
class Topology {
 public:
  Topology(std::vector<Point> positions, Region region, double comm_radius,
           double max_tx_distance, NodeId source, NodeId sink);

  [[nodiscard]] std::size_t size() const noexcept { return positions_.size(); }
  [[nodiscard]] Point position(NodeId id) const { return positions_.at(to_index(id)); }
  [[nodiscard]] std::span<const Point> positions() const noexcept { return positions_; }
  [[nodiscard]] Region region() const noexcept { return region_; }
  [[nodiscard]] double comm_radius() const noexcept { return comm_radius_; }
  [[nodiscard]] double max_tx_distance() const noexcept { return max_tx_distance_; }
  [[nodiscard]] NodeId source() const noexcept { return source_; }
  [[nodiscard]] NodeId sink() const noexcept { return sink_; }
  [[nodiscard]] bool contains(NodeId id) const noexcept { return to_index(id) < size(); }

  /// Neighbors within comm_radius, ascending by id.
  [[nodiscard]] std::span<const NodeId> neighbors(NodeId id) const {
    return neighbors_.at(to_index(id));
  }
  [[nodiscard]] bool are_neighbors(NodeId a, NodeId b) const;
  [[nodiscard]] double distance(NodeId a, NodeId b) const;
  [[nodiscard]] double distance_to_sink(NodeId id) const { return distance(id, sink_); }

 private:
  std::vector<Point> positions_;
  Region region_;
  double comm_radius_;
  double max_tx_distance_;
  NodeId source_;
  NodeId sink_;
  std::vector<std::vector<NodeId>> neighbors_;
};

/// Places `count` nodes in `region`. Source and sink are the nodes nearest the
/// (0,0) and (width,height) corners.
Topology deploy(std::size_t count, Region region, DeployMode mode, std::uint64_t rng_seed,
                double comm_radius, double max_tx_distance);

struct Fcs {
  NodeId owner{};
  std::vector<CandidateEntry> members;
};

/// Fresh candidate entries for every node in `ids`: T=S=0, suc=1, uniform jump_p.
std::vector<CandidateEntry> fresh_entries(std::span<const NodeId> ids);

/// Ids of the neighbors of `node` strictly closer to the sink, ascending.
std::vector<NodeId> forward_neighbors(const Topology& topo, NodeId node);

/// Forwarding candidate set of `node`. Empty for the sink and for nodes at a void edge.
Fcs build_fcs(const Topology& topo, NodeId node);

/// Removes every node strictly inside the disc except the source and sink.
/// Ids are renumbered densely in their original order.
Topology carve_void(const Topology& topo, Point center, double radius);

inline constexpr Millis kUnreachable = std::numeric_limits<Millis>::infinity();

/// Estimated transmission time from every node to the sink with `mean_hop_delay`
/// per hop; kUnreachable for nodes disconnected from the sink.
std::vector<Millis> delays_to_sink(const Topology& topo, Millis mean_hop_delay);

Millis shortest_delay(const Topology& topo, NodeId from, Millis mean_hop_delay);

struct PathSet {
  std::vector<std::vector<NodeId>> paths;
  std::vector<Millis> delay;
  std::vector<std::size_t> chosen;

  [[nodiscard]] bool empty() const noexcept { return paths.empty(); }
  [[nodiscard]] std::size_t size() const noexcept { return paths.size(); }
};

/// Up to `max_paths` source->sink paths that share no interior node, with the
/// smallest total hop count among all sets of that many disjoint paths.
PathSet disjoint_paths(const Topology& topo, std::size_t max_paths, Millis mean_hop_delay);

/// Marks the `k` lowest-delay paths as chosen (ties by node sequence).
PathSet select_k(PathSet set, std::size_t k);

}  // namespace dmrf
