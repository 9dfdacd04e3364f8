#include <doctest.h>

#include <variant>
#include <vector>

#include "dmrf/baselines.hpp"

using namespace dmrf;

namespace {

CandidateEntry link(NodeId id, Millis delay) {
  CandidateEntry e;
  e.candidate = id;
  e.set_link_delay(delay);
  return e;
}

// Self 0 at the origin, sink 3 at (10,0); candidates 1 and 2 ahead of self.
const std::vector<Point> kPositions{{0, 0}, {1, 0}, {1.5, 0}, {10, 0}, {0, 1}};

NodeView view_of(std::span<const CandidateEntry> fcs, std::span<const NodeId> perimeter = {}) {
  return NodeView{node_id(0), node_id(3), kPositions, fcs, perimeter};
}

Packet fresh() { return make_packet(node_id(0), 256, 0.0, 50.0); }

}  // namespace

TEST_CASE("greedy minimum delay") {
  const std::vector fcs{link(node_id(1), 1.1), link(node_id(2), 2.0)};
  SUBCASE("takes the fastest candidate") {
    const auto d = greedy_min_delay(view_of(fcs), fresh(), 0.0);
    REQUIRE(std::holds_alternative<Forward>(d));
    CHECK(std::get<Forward>(d).next == node_id(1));
  }
  SUBCASE("drops when there is no candidate") {
    const auto d = greedy_min_delay(view_of({}), fresh(), 0.0);
    REQUIRE(std::holds_alternative<Drop>(d));
    CHECK(std::get<Drop>(d).reason == DropReason::NoRoute);
  }
  SUBCASE("drops expired packets") {
    const auto d = greedy_min_delay(view_of(fcs), fresh(), 60.0);
    REQUIRE(std::holds_alternative<Drop>(d));
    CHECK(std::get<Drop>(d).reason == DropReason::Expired);
  }
}

TEST_CASE("greedy maximum rate") {
  SUBCASE("compares progress per millisecond") {
    // 1 m in 1 ms beats 1.5 m in 2 ms.
    const std::vector fcs{link(node_id(1), 1.0), link(node_id(2), 2.0)};
    const auto d = greedy_max_rate(view_of(fcs), fresh(), 0.0);
    CHECK(std::get<Forward>(d).next == node_id(1));
  }
  SUBCASE("faster link flips the choice") {
    const std::vector fcs{link(node_id(1), 1.0), link(node_id(2), 1.0)};
    CHECK(std::get<Forward>(greedy_max_rate(view_of(fcs), fresh(), 0.0)).next == node_id(2));
  }
  SUBCASE("single candidate") {
    const std::vector fcs{link(node_id(2), 5.0)};
    CHECK(std::get<Forward>(greedy_max_rate(view_of(fcs), fresh(), 0.0)).next == node_id(2));
  }
  SUBCASE("expired") {
    const std::vector fcs{link(node_id(2), 5.0)};
    const auto d = greedy_max_rate(view_of(fcs), fresh(), 50.0);
    CHECK(std::get<Drop>(d).reason == DropReason::Expired);
  }
}

TEST_CASE("bypass") {
  SUBCASE("greedy while candidates exist") {
    const std::vector fcs{link(node_id(1), 1.0), link(node_id(2), 9.0)};
    Packet p = fresh();
    CHECK(std::get<Forward>(bypass_next_hop(view_of(fcs), p, 0.0)).next == node_id(2));
    CHECK_FALSE(p.perimeter_anchor);
  }
  SUBCASE("a node facing a void takes its perimeter neighbor") {
    const std::vector perimeter{node_id(4)};
    Packet p = fresh();
    p.hop_trace = {node_id(0)};
    const auto d = bypass_next_hop(view_of({}, perimeter), p, 0.0);
    REQUIRE(std::holds_alternative<Forward>(d));
    CHECK(std::get<Forward>(d).next == node_id(4));
    REQUIRE(p.perimeter_anchor);
    CHECK(*p.perimeter_anchor == 10.0);
  }
  SUBCASE("repeating a directed hop is a loop") {
    const std::vector perimeter{node_id(4)};
    Packet p = fresh();
    p.hop_trace = {node_id(0), node_id(4), node_id(1), node_id(0)};
    p.perimeter_anchor = 10.0;
    const auto d = bypass_next_hop(view_of({}, perimeter), p, 0.0);
    REQUIRE(std::holds_alternative<Drop>(d));
    CHECK(std::get<Drop>(d).reason == DropReason::NoRoute);
  }
  SUBCASE("no neighbor at all") {
    Packet p = fresh();
    CHECK(std::holds_alternative<Drop>(bypass_next_hop(view_of({}), p, 0.0)));
  }
}

TEST_CASE("baseline dispatch") {
  const std::vector fcs{link(node_id(1), 1.1), link(node_id(2), 2.0)};
  Packet p = fresh();
  CHECK(std::get<Forward>(baseline_next_hop(BaselineKind::GreedyMinDelay, view_of(fcs), p, 0.0))
            .next == node_id(1));
  CHECK(to_string(BaselineKind::Bypass) == "BYPASS");
}

TEST_CASE("planarized neighbors drop the long diagonal of a unit square") {
  const Topology sq({{0, 0}, {1, 0}, {0, 1}, {1, 1}}, Region{1, 1}, 1.5, 30.0, node_id(0),
                    node_id(3));
  const auto g = planar_neighbors(sq);
  CHECK(g[0] == std::vector{node_id(1), node_id(2)});
  CHECK(g[3] == std::vector{node_id(1), node_id(2)});
}
