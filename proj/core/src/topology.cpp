#include "dmrf/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <random>
#include <string>

namespace dmrf {

double distance(Point a, Point b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

Topology::Topology(std::vector<Point> positions, Region region, double comm_radius,
                   double max_tx_distance, NodeId source, NodeId sink)
    : positions_(std::move(positions)),
      region_(region),
      comm_radius_(comm_radius),
      max_tx_distance_(max_tx_distance),
      source_(source),
      sink_(sink) {
  if (positions_.size() < 2) throw InvalidInput("topology needs at least two nodes");
  if (!(comm_radius_ > 0.0)) throw InvalidInput("comm_radius must be positive");
  if (comm_radius_ > max_tx_distance_) {
    throw InvalidInput("comm_radius must not exceed max_tx_distance");
  }
  if (!contains(source_) || !contains(sink_) || source_ == sink_) {
    throw InvalidInput("source and sink must be distinct existing nodes");
  }
  for (const Point& p : positions_) {
    if (p.x < 0.0 || p.y < 0.0 || p.x > region_.width || p.y > region_.height) {
      throw InvalidInput("node position outside the deployment region");
    }
  }
  const std::size_t n = positions_.size();
  neighbors_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (dmrf::distance(positions_[i], positions_[j]) <= comm_radius_) {
        neighbors_[i].push_back(node_id(j));
        neighbors_[j].push_back(node_id(i));
      }
    }
  }
  for (auto& list : neighbors_) std::sort(list.begin(), list.end());
}

bool Topology::are_neighbors(NodeId a, NodeId b) const {
  auto list = neighbors(a);
  return std::binary_search(list.begin(), list.end(), b);
}

double Topology::distance(NodeId a, NodeId b) const {
  return dmrf::distance(position(a), position(b));
}

namespace {

NodeId nearest_to(std::span<const Point> pts, Point target, std::optional<NodeId> exclude) {
  std::size_t best = pts.size();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (exclude && node_id(i) == *exclude) continue;
    const double d = distance(pts[i], target);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return node_id(best);
}

}  // namespace

Topology deploy(std::size_t count, Region region, DeployMode mode, std::uint64_t rng_seed,
                double comm_radius, double max_tx_distance) {
  if (count < 2) throw InvalidInput("deploy needs count >= 2, got " + std::to_string(count));
  if (!(region.width > 0.0) || !(region.height > 0.0)) {
    throw InvalidInput("region dimensions must be positive");
  }
  std::vector<Point> pts;
  pts.reserve(count);
  if (mode == DeployMode::UniformGrid) {
    const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
    const double dx = region.width / static_cast<double>(side - 1);
    const double dy = region.height / static_cast<double>(side - 1);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t row = k / side;
      const std::size_t col = k % side;
      // Clamp guards the last lattice column/row against rounding past the edge.
      pts.push_back({std::min(region.width, static_cast<double>(col) * dx),
                     std::min(region.height, static_cast<double>(row) * dy)});
    }
  } else {
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> ux(0.0, region.width);
    std::uniform_real_distribution<double> uy(0.0, region.height);
    for (std::size_t k = 0; k < count; ++k) {
      const double x = ux(rng);
      const double y = uy(rng);
      pts.push_back({x, y});
    }
  }
  const NodeId source = nearest_to(pts, {0.0, 0.0}, std::nullopt);
  const NodeId sink = nearest_to(pts, {region.width, region.height}, source);
  return Topology(std::move(pts), region, comm_radius, max_tx_distance, source, sink);
}

std::vector<CandidateEntry> fresh_entries(std::span<const NodeId> ids) {
  std::vector<CandidateEntry> out;
  out.reserve(ids.size());
  const double p = ids.empty() ? 0.0 : 1.0 / static_cast<double>(ids.size());
  for (NodeId id : ids) {
    CandidateEntry e;
    e.candidate = id;
    e.jump_p = p;
    out.push_back(e);
  }
  return out;
}

std::vector<NodeId> forward_neighbors(const Topology& topo, NodeId node) {
  if (!topo.contains(node)) throw InvalidInput("unknown node");
  const double own = topo.distance_to_sink(node);
  std::vector<NodeId> out;
  for (NodeId n : topo.neighbors(node)) {
    if (topo.distance_to_sink(n) < own) out.push_back(n);
  }
  return out;
}

Fcs build_fcs(const Topology& topo, NodeId node) {
  const auto ids = forward_neighbors(topo, node);
  return Fcs{node, fresh_entries(ids)};
}

Topology carve_void(const Topology& topo, Point center, double radius) {
  if (radius < 0.0) throw InvalidInput("void radius must be non-negative");
  std::vector<Point> kept;
  NodeId source{};
  NodeId sink{};
  for (std::size_t i = 0; i < topo.size(); ++i) {
    const NodeId id = node_id(i);
    const Point p = topo.position(id);
    const bool protected_node = id == topo.source() || id == topo.sink();
    if (!protected_node && distance(p, center) < radius) continue;
    if (id == topo.source()) source = node_id(kept.size());
    if (id == topo.sink()) sink = node_id(kept.size());
    kept.push_back(p);
  }
  return Topology(std::move(kept), topo.region(), topo.comm_radius(), topo.max_tx_distance(),
                  source, sink);
}

std::vector<Millis> delays_to_sink(const Topology& topo, Millis mean_hop_delay) {
  // Dijkstra from the sink; the neighbor graph is undirected.
  std::vector<Millis> dist(topo.size(), kUnreachable);
  using Item = std::pair<Millis, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[to_index(topo.sink())] = 0.0;
  pq.emplace(0.0, to_index(topo.sink()));
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (NodeId v : topo.neighbors(node_id(u))) {
      const Millis nd = d + mean_hop_delay;
      if (nd < dist[to_index(v)]) {
        dist[to_index(v)] = nd;
        pq.emplace(nd, to_index(v));
      }
    }
  }
  return dist;
}

Millis shortest_delay(const Topology& topo, NodeId from, Millis mean_hop_delay) {
  if (!topo.contains(from)) throw InvalidInput("unknown node");
  return delays_to_sink(topo, mean_hop_delay)[to_index(from)];
}

namespace {

// Unit-capacity min-cost flow on the node-split graph: node v becomes
// in(v) = 2v -> out(v) = 2v+1 with capacity 1, so augmenting paths never share
// an interior node.
class SplitFlow {
 public:
  explicit SplitFlow(const Topology& topo) : adj_(2 * topo.size()) {
    const std::size_t n = topo.size();
    const int big = static_cast<int>(n);
    for (std::size_t v = 0; v < n; ++v) {
      const NodeId id = node_id(v);
      const int cap = (id == topo.source() || id == topo.sink()) ? big : 1;
      add_edge(2 * v, 2 * v + 1, cap, 0);
      for (NodeId w : topo.neighbors(id)) add_edge(2 * v + 1, 2 * to_index(w), 1, 1);
    }
  }

  /// One shortest augmenting path; false when none is left.
  bool augment(std::size_t s, std::size_t t) {
    const std::size_t n = adj_.size();
    std::vector<int> dist(n, std::numeric_limits<int>::max());
    std::vector<std::pair<std::size_t, std::size_t>> prev(n, {n, 0});
    std::vector<bool> queued(n, false);
    std::deque<std::size_t> q;
    dist[s] = 0;
    q.push_back(s);
    queued[s] = true;
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop_front();
      queued[u] = false;
      for (std::size_t k = 0; k < adj_[u].size(); ++k) {
        const Edge& e = adj_[u][k];
        if (e.cap <= 0) continue;
        if (dist[u] + e.cost < dist[e.to]) {
          dist[e.to] = dist[u] + e.cost;
          prev[e.to] = {u, k};
          if (!queued[e.to]) {
            q.push_back(e.to);
            queued[e.to] = true;
          }
        }
      }
    }
    if (dist[t] == std::numeric_limits<int>::max()) return false;
    for (std::size_t v = t; v != s;) {
      auto [u, k] = prev[v];
      Edge& e = adj_[u][k];
      e.cap -= 1;
      adj_[e.to][e.rev].cap += 1;
      v = u;
    }
    return true;
  }

  /// Walks one unit of flow from s to t, consuming it; returns split-graph vertices.
  std::vector<std::size_t> take_path(std::size_t s, std::size_t t) {
    std::vector<std::size_t> walk{s};
    std::size_t u = s;
    while (u != t) {
      bool moved = false;
      for (Edge& e : adj_[u]) {
        if (e.original && e.flow() > 0) {
          e.cap += 1;  // consume the unit so it is not walked twice
          adj_[e.to][e.rev].cap -= 1;
          u = e.to;
          walk.push_back(u);
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    return walk;
  }

 private:
  struct Edge {
    std::size_t to;
    std::size_t rev;
    int cap;
    int cost;
    int initial;
    bool original;
    [[nodiscard]] int flow() const noexcept { return initial - cap; }
  };

  void add_edge(std::size_t u, std::size_t v, int cap, int cost) {
    adj_[u].push_back(Edge{v, adj_[v].size(), cap, cost, cap, true});
    adj_[v].push_back(Edge{u, adj_[u].size() - 1, 0, -cost, 0, false});
  }

  std::vector<std::vector<Edge>> adj_;
};

}  // namespace

PathSet disjoint_paths(const Topology& topo, std::size_t max_paths, Millis mean_hop_delay) {
  if (max_paths < 1) throw InvalidInput("disjoint_paths needs M >= 1");
  SplitFlow flow(topo);
  const std::size_t s = 2 * to_index(topo.source()) + 1;
  const std::size_t t = 2 * to_index(topo.sink());
  std::size_t found = 0;
  while (found < max_paths && flow.augment(s, t)) ++found;

  PathSet out;
  for (std::size_t i = 0; i < found; ++i) {
    const auto walk = flow.take_path(s, t);
    std::vector<NodeId> path{topo.source()};
    // Split vertices alternate out(u) -> in(v) -> out(v) ...; record each in(v).
    for (std::size_t k = 1; k < walk.size(); ++k) {
      if (walk[k] % 2 == 0) path.push_back(node_id(walk[k] / 2));
    }
    out.delay.push_back(static_cast<Millis>(path.size() - 1) * mean_hop_delay);
    out.paths.push_back(std::move(path));
  }
  return out;
}

PathSet select_k(PathSet set, std::size_t k) {
  if (k < 1) throw InvalidInput("select_k needs k >= 1");
  std::vector<std::size_t> order(set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (set.delay[a] != set.delay[b]) return set.delay[a] < set.delay[b];
    return set.paths[a] < set.paths[b];
  });
  order.resize(std::min(k, order.size()));
  std::sort(order.begin(), order.end());
  set.chosen = std::move(order);
  return set;
}

}  // namespace dmrf
