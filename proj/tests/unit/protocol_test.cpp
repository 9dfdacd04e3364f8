#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <variant>
#include <vector>

#include "dmrf/protocol.hpp"

using namespace dmrf;

namespace {

constexpr NodeId kSelf = node_id(0);
constexpr NodeId kA = node_id(1);
constexpr NodeId kB = node_id(2);
constexpr NodeId kSink = node_id(9);

CandidateEntry entry(NodeId id, Millis link, Millis sink_delay) {
  CandidateEntry e;
  e.candidate = id;
  e.sink_delay = sink_delay;
  e.set_link_delay(link);
  return e;
}

/// Node with forwarding candidates a and b and the sink as an extra jump target.
DmrfNode two_candidate_node(CandidateEntry a, CandidateEntry b, ProtocolParams params = {}) {
  std::vector entries{a, b, entry(kSink, 1.28, 0.0)};
  const std::array fcs{kA, kB};
  return DmrfNode(kSelf, kSink, 10.0, 1.28, entries, fcs, params);
}

DmrfNode default_node() { return two_candidate_node(entry(kA, 1.0, 8.0), entry(kB, 1.0, 8.0)); }

}  // namespace

TEST_CASE("slack ratio") {
  CHECK(compute_lambda(12.0, 10.0) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(compute_lambda(10.0, 10.0) == 1.0);
  CHECK(compute_lambda(-1.0, 10.0) == 0.0);
  CHECK_THROWS_AS(compute_lambda(5.0, 0.0), InvalidInput);
}

TEST_CASE("threshold worked example") {
  const auto th = compute_thresholds(0.2, 10.0, 2.0, 2.0, 1.28, 12.0);
  REQUIRE(th);
  CHECK(th->omega == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(th->high == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(th->low == doctest::Approx(0.528).epsilon(1e-12));
  CHECK(th->jump == 0.2);
}

TEST_CASE("omega clamps when no slack is left after the next hop") {
  const auto th = compute_thresholds(0.2, 10.0, 2.0, 2.0, 1.28, 2.0, 1e-3);
  REQUIRE(th);
  CHECK(th->omega == 1e-3);
  CHECK(th->low == doctest::Approx(0.4 / 1e-3 + 0.128).epsilon(1e-12));
}

TEST_CASE("sink-adjacent thresholds keep their ordering") {
  const auto th = compute_thresholds(0.2, 10.0, 0.0, 0.0, 1.28, 12.0);
  REQUIRE(th);
  CHECK(th->high > th->jump);
  CHECK(th->low > th->high);
}

TEST_CASE("thresholds without a route") {
  CHECK_FALSE(compute_thresholds(0.2, kUnreachable, 1.0, 1.0, 1.28, 5.0));
  CHECK_THROWS_AS(compute_thresholds(1.2, 10.0, 1.0, 1.0, 1.28, 5.0), InvalidInput);
}

TEST_CASE("rate bands") {
  const auto th = *compute_thresholds(0.2, 10.0, 2.0, 2.0, 1.28, 12.0);
  CHECK(rate_band(1.2, th) == RateClass::Low);
  CHECK(rate_band(0.5, th) == RateClass::Medium);
  CHECK(rate_band(0.3, th) == RateClass::High);
  CHECK_FALSE(rate_band(0.15, th));
  CHECK_FALSE(rate_band(0.2, th));
}

TEST_CASE("rate class never swings between LOW and HIGH in one hop") {
  CHECK(smooth_rate(RateClass::Low, RateClass::High) == RateClass::Medium);
  CHECK(smooth_rate(RateClass::High, RateClass::Low) == RateClass::Medium);
  CHECK(smooth_rate(RateClass::Medium, RateClass::High) == RateClass::High);
  CHECK(smooth_rate(RateClass::Low, RateClass::Low) == RateClass::Low);
}

TEST_CASE("jump probabilities") {
  SUBCASE("proportional to success ratio") {
    std::vector<CandidateEntry> e(2);
    e[0].suc = 0.75;
    e[1].suc = 0.5;
    jump_probabilities(e);
    CHECK(e[0].jump_p == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(e[1].jump_p == doctest::Approx(0.4).epsilon(1e-12));
  }
  SUBCASE("single candidate") {
    std::vector<CandidateEntry> e(1);
    e[0].suc = 0.3;
    jump_probabilities(e);
    CHECK(e[0].jump_p == 1.0);
  }
  SUBCASE("all zero falls back to uniform") {
    std::vector<CandidateEntry> e(4);
    for (auto& x : e) x.suc = 0.0;
    jump_probabilities(e);
    for (const auto& x : e) CHECK(x.jump_p == 0.25);
  }
}

TEST_CASE("choose_jump_target") {
  Rng rng(42);
  SUBCASE("a single mass is deterministic") {
    std::vector<CandidateEntry> e(1);
    e[0].candidate = kA;
    e[0].jump_p = 1.0;
    for (int i = 0; i < 100; ++i) CHECK(choose_jump_target(e, rng, std::nullopt) == kA);
  }
  SUBCASE("draws follow the probabilities") {
    std::vector<CandidateEntry> e(2);
    e[0].candidate = kA;
    e[0].jump_p = 0.6;
    e[1].candidate = kB;
    e[1].jump_p = 0.4;
    int hits = 0;
    constexpr int kDraws = 100000;
    for (int i = 0; i < kDraws; ++i) hits += choose_jump_target(e, rng, std::nullopt) == kA;
    const double freq = static_cast<double>(hits) / kDraws;
    CHECK(freq >= 0.59);
    CHECK(freq <= 0.61);
  }
  SUBCASE("only the sink remains when every candidate is faulty") {
    std::vector<CandidateEntry> e(2);
    e[0].candidate = kA;
    e[0].cached_state = NodeState::Faulty;
    e[1].candidate = kB;
    e[1].cached_state = NodeState::Faulty;
    CHECK(choose_jump_target(e, rng, kSink) == kSink);
    CHECK_FALSE(choose_jump_target(e, rng, std::nullopt));
  }
}

TEST_CASE("missed probes lower confidence until the candidate is faulty") {
  SUBCASE("one miss from full confidence") {
    auto n = default_node();
    const auto d = n.record_missed_reply(kA);
    CHECK(n.find(kA)->confidence.value == 75);
    CHECK(n.find(kA)->cached_state == NodeState::Normal);
    CHECK_FALSE(d.changed());
  }
  SUBCASE("one miss from 55 crosses the threshold") {
    auto a = entry(kA, 1.0, 8.0);
    a.confidence.value = 55;
    auto n = two_candidate_node(a, entry(kB, 1.0, 8.0));
    const auto d = n.record_missed_reply(kA);
    CHECK(n.find(kA)->confidence.value == 30);
    CHECK(n.find(kA)->cached_state == NodeState::Faulty);
    REQUIRE(d.candidate_updates.size() == 1);
    CHECK(d.candidate_updates[0].state == NodeState::Faulty);
  }
  SUBCASE("a reply restores confidence and the measured delay") {
    auto n = default_node();
    n.record_missed_reply(kA);
    const ProbeResult ok{kA, true, 1.7, NodeState::Normal};
    n.detect_faulty(std::span(&ok, 1));
    CHECK(n.find(kA)->confidence.value == 100);
    CHECK(n.find(kA)->delay_est == doctest::Approx(9.7).epsilon(1e-12));
  }
}

TEST_CASE("every candidate faulty makes the node JFAULTY") {
  auto n = default_node();
  n.set_candidate_state(kA, NodeState::Faulty);
  const auto d = n.set_candidate_state(kB, NodeState::Faulty);
  CHECK(n.state() == NodeState::JFaulty);
  CHECK(d.changed());
  REQUIRE(d.feedback);
  CHECK(d.feedback->kind == FeedbackKind::Fault);
  CHECK(d.feedback->subject == kSelf);
}

TEST_CASE("congestion detection") {
  SUBCASE("85 of 100 bytes is congested") {
    auto n = default_node();
    const auto d = n.detect_congestion(85.0, 100.0, 0.0, 32.0);
    CHECK(n.state() == NodeState::Cong);
    REQUIRE(d.feedback);
    CHECK(d.feedback->kind == FeedbackKind::Cong);
  }
  SUBCASE("an empty buffer stays normal and sends nothing") {
    auto n = default_node();
    const auto d = n.detect_congestion(0.0, 100.0, 0.0, 32.0);
    CHECK(n.state() == NodeState::Normal);
    CHECK_FALSE(d.feedback);
  }
  SUBCASE("recovery needs the hysteresis margin") {
    auto n = default_node();
    n.detect_congestion(85.0, 100.0, 0.0, 32.0);
    n.detect_congestion(75.0, 100.0, 0.0, 32.0);
    CHECK(n.state() == NodeState::Cong);
    const auto d = n.detect_congestion(60.0, 100.0, 0.0, 32.0);
    CHECK(n.state() == NodeState::Normal);
    REQUIRE(d.feedback);
    CHECK(d.feedback->kind == FeedbackKind::Recover);
  }
  SUBCASE("arrivals count toward the forecast") {
    auto n = default_node();
    // 50% occupancy plus 0.2 packets/ms over 5 ms of 32 B packets = 0.82.
    n.detect_congestion(50.0, 100.0, 0.2, 32.0);
    CHECK(n.state() == NodeState::Cong);
  }
  SUBCASE("every candidate congested makes the node JCONG") {
    auto n = default_node();
    n.set_candidate_state(kA, NodeState::Cong);
    n.set_candidate_state(kB, NodeState::JCong);
    CHECK(n.state() == NodeState::JCong);
  }
}

TEST_CASE("void detection") {
  SUBCASE("no forwarding candidates") {
    DmrfNode n(kSelf, kSink, 10.0, 1.28, {entry(kSink, 1.28, 0.0)}, {}, {});
    CHECK(n.detect_void().after == NodeState::Void);
  }
  SUBCASE("only void candidates") {
    auto n = default_node();
    n.set_candidate_state(kA, NodeState::Void);
    n.set_candidate_state(kB, NodeState::Void);
    CHECK(n.state() == NodeState::Void);
  }
  SUBCASE("a healthy candidate keeps the node normal") {
    auto n = default_node();
    n.set_candidate_state(kA, NodeState::Void);
    const auto d = n.detect_void();
    CHECK(n.state() == NodeState::Normal);
    CHECK_FALSE(d.changed());
  }
  SUBCASE("the sink is never a dead end") {
    DmrfNode n(kSink, kSink, 0.0, 1.28, {}, {}, {});
    CHECK(n.state() == NodeState::Normal);
  }
}

TEST_CASE("next-hop selection") {
  Rng rng(1);
  SUBCASE("ample slack forwards at LOW") {
    auto n = default_node();
    Packet p = make_packet(kSelf, 256, 0.0, 12.0);
    const auto d = n.select_next_hop(p, 0.0, rng);
    REQUIRE(std::holds_alternative<Forward>(d));
    CHECK(std::get<Forward>(d).rate == RateClass::Low);
  }
  SUBCASE("slack below the jump threshold jumps") {
    auto n = default_node();
    Packet p = make_packet(kSelf, 256, 0.0, 1.5);
    CHECK(std::holds_alternative<Jump>(n.select_next_hop(p, 0.0, rng)));
    CHECK(p.mode == TransmitMode::Jump);
  }
  SUBCASE("fewest transmissions wins") {
    auto a = entry(kA, 1.0, 8.0);
    auto b = entry(kB, 1.0, 8.0);
    a.tx_count = 5;
    b.tx_count = 3;
    auto n = two_candidate_node(a, b);
    Packet p = make_packet(kSelf, 256, 0.0, 30.0);
    const auto d = n.select_next_hop(p, 0.0, rng);
    REQUIRE(std::holds_alternative<Forward>(d));
    CHECK(std::get<Forward>(d).next == kB);
    CHECK(n.find(kB)->tx_count == 4);
  }
  SUBCASE("equal load prefers the slower feasible candidate") {
    auto n = two_candidate_node(entry(kA, 1.0, 8.0), entry(kB, 1.0, 12.0));
    Packet p = make_packet(kSelf, 256, 0.0, 30.0);
    CHECK(std::get<Forward>(n.select_next_hop(p, 0.0, rng)).next == kB);
  }
  SUBCASE("equal load and delay falls back to the smaller id") {
    auto n = default_node();
    Packet p = make_packet(kSelf, 256, 0.0, 30.0);
    CHECK(std::get<Forward>(n.select_next_hop(p, 0.0, rng)).next == kA);
  }
  SUBCASE("infeasible candidates are skipped") {
    auto n = two_candidate_node(entry(kA, 1.0, 8.0), entry(kB, 1.0, 40.0));
    Packet p = make_packet(kSelf, 256, 0.0, 20.0);
    const auto d = n.select_next_hop(p, 0.0, rng);
    REQUIRE(std::holds_alternative<Forward>(d));
    CHECK(std::get<Forward>(d).next == kA);
  }
  SUBCASE("unhealthy candidates are skipped") {
    auto n = default_node();
    n.set_candidate_state(kA, NodeState::Cong);
    Packet p = make_packet(kSelf, 256, 0.0, 30.0);
    CHECK(std::get<Forward>(n.select_next_hop(p, 0.0, rng)).next == kB);
  }
  SUBCASE("no eligible candidate jumps") {
    auto n = two_candidate_node(entry(kA, 1.0, 40.0), entry(kB, 1.0, 40.0));
    Packet p = make_packet(kSelf, 256, 0.0, 20.0);
    const auto d = n.select_next_hop(p, 0.0, rng);
    REQUIRE(std::holds_alternative<Jump>(d));
    // Only the sink can still make the deadline.
    CHECK(std::get<Jump>(d).next == kSink);
  }
  SUBCASE("a jumping node jumps") {
    auto n = default_node();
    n.set_candidate_state(kA, NodeState::Faulty);
    n.set_candidate_state(kB, NodeState::Faulty);
    Packet p = make_packet(kSelf, 256, 0.0, 30.0);
    CHECK(std::holds_alternative<Jump>(n.select_next_hop(p, 0.0, rng)));
  }
  SUBCASE("expired packets are dropped") {
    auto n = default_node();
    Packet p = make_packet(kSelf, 256, 0.0, 5.0);
    const auto d = n.select_next_hop(p, 5.0, rng);
    REQUIRE(std::holds_alternative<Drop>(d));
    CHECK(std::get<Drop>(d).reason == DropReason::Expired);
  }
  SUBCASE("LOW is never followed directly by HIGH") {
    // lambda = 2.5 / 10 lies in the HIGH band (0.2, 0.3).
    auto n = two_candidate_node(entry(kA, 1.0, 1.0), entry(kB, 1.0, 1.0));
    Packet p = make_packet(kSelf, 256, 0.0, 2.5);
    p.rate = RateClass::Low;
    const auto d = n.select_next_hop(p, 0.0, rng);
    REQUIRE(std::holds_alternative<Forward>(d));
    CHECK(std::get<Forward>(d).rate == RateClass::Medium);
    Packet q = make_packet(kSelf, 256, 0.0, 2.5);
    q.rate = RateClass::Medium;
    CHECK(std::get<Forward>(n.select_next_hop(q, 0.0, rng)).rate == RateClass::High);
  }
}

TEST_CASE("jump results update the success ratio") {
  auto a = entry(kA, 1.0, 8.0);
  a.successes = 3;
  a.attempts = 4;
  a.suc = 0.75;
  auto b = entry(kB, 1.0, 8.0);
  b.suc = 0.5;
  SUBCASE("failure") {
    auto n = two_candidate_node(a, b);
    const auto msg = n.on_jump_result(kA, false);
    CHECK(n.find(kA)->attempts == 5);
    CHECK(n.find(kA)->suc == doctest::Approx(0.4).epsilon(1e-12));
    REQUIRE(msg);
    CHECK(msg->kind == FeedbackKind::JumpFail);
  }
  SUBCASE("success") {
    auto n = two_candidate_node(a, b);
    CHECK_FALSE(n.on_jump_result(kA, true));
    CHECK(n.find(kA)->successes == 4);
    CHECK(n.find(kA)->attempts == 5);
    CHECK(n.find(kA)->suc == doctest::Approx(0.8).epsilon(1e-12));
  }
  SUBCASE("probabilities follow the new ratio") {
    // Sink entry removed from the mass by giving it no success.
    std::vector entries{a, b};
    const std::array fcs{kA, kB};
    DmrfNode n(kSelf, kSink, 10.0, 1.28, entries, fcs, {});
    n.on_jump_result(kA, false);
    CHECK(n.find(kA)->jump_p == doctest::Approx(0.4 / 0.9).epsilon(1e-12));
    CHECK(n.find(kB)->jump_p == doctest::Approx(0.5 / 0.9).epsilon(1e-12));
  }
}

TEST_CASE("feedback handling") {
  Rng rng(3);
  SUBCASE("JUMP_FAIL scales the sender's ratio by tau") {
    auto a = entry(kA, 1.0, 8.0);
    a.suc = 0.8;
    auto n = two_candidate_node(a, entry(kB, 1.0, 8.0));
    FeedbackMessage m{FeedbackKind::JumpFail, kA, node_id(7), 2, std::nullopt};
    const auto out = n.on_feedback(m, rng);
    REQUIRE(out.tau);
    CHECK(*out.tau >= 0.0);
    CHECK(*out.tau < 1.0);
    CHECK(n.find(kA)->suc == doctest::Approx(0.8 * *out.tau).epsilon(1e-12));
    REQUIRE(out.forward);
    CHECK(out.forward->hop_limit == 1);
    CHECK(out.forward->origin == kSelf);
  }
  SUBCASE("JUMP_FAIL at its last hop is not forwarded") {
    auto n = default_node();
    FeedbackMessage m{FeedbackKind::JumpFail, kA, node_id(7), 0, std::nullopt};
    CHECK_FALSE(n.on_feedback(m, rng).forward);
  }
  SUBCASE("CONG then RECOVER") {
    auto n = default_node();
    n.on_feedback({FeedbackKind::Cong, kA, kA, 0, std::nullopt}, rng);
    CHECK(n.find(kA)->cached_state == NodeState::Cong);
    n.on_feedback({FeedbackKind::Recover, kA, kA, 0, std::nullopt}, rng);
    CHECK(n.find(kA)->cached_state == NodeState::Normal);
  }
  SUBCASE("FAULT from the failing node itself marks it JFAULTY") {
    auto n = default_node();
    n.on_feedback({FeedbackKind::Fault, kA, kA, 0, std::nullopt}, rng);
    CHECK(n.find(kA)->cached_state == NodeState::JFaulty);
  }
}

TEST_CASE("routing table from a topology") {
  const Topology t({{0, 0}, {1, 0}, {2, 0}, {3, 0}}, Region{3, 3}, 1.1, 30.0, node_id(0),
                   node_id(3));
  const auto delays = delays_to_sink(t, 1.28);
  const auto n = make_dmrf_node(t, node_id(0), delays, 1.28, {});
  CHECK(n.sink_delay() == doctest::Approx(3 * 1.28).epsilon(1e-12));
  CHECK(n.candidates().size() == 3);
  REQUIRE(n.fcs_indices().size() == 1);
  CHECK(n.candidates()[n.fcs_indices()[0]].candidate == node_id(1));
  CHECK(n.find(node_id(3))->delay_est == doctest::Approx(1.28).epsilon(1e-12));
}

TEST_CASE("constructor rejects an FCS member outside the candidate set") {
  const std::array fcs{kA};
  CHECK_THROWS_AS(DmrfNode(kSelf, kSink, 10.0, 1.28, {entry(kB, 1.0, 8.0)}, fcs, {}),
                  InvalidInput);
}
