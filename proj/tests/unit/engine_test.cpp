#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <set>
#include <sstream>
#include <string>

#include "dmrf/engine.hpp"

using namespace dmrf;

namespace {

Topology grid400() { return deploy(400, Region{}, DeployMode::UniformGrid, 1, 1.5, 30.0); }

Scenario table2_scenario(ProtocolKind protocol, const Topology& topo) {
  Scenario s;
  s.protocol = protocol;
  s.radio = make_radio(256, 200.0, 0.15, 30.0);
  s.packet_lifetime = 3.0 * shortest_delay(topo, topo.source(), s.radio.mu);
  return s;
}

Topology line(std::size_t n) {
  std::vector<Point> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back({double(i), 0.0});
  const double extent = static_cast<double>(n - 1);
  return Topology(pts, Region{extent, extent}, 1.1, 30.0, node_id(0), node_id(n - 1));
}

constexpr std::array kAllProtocols{ProtocolKind::Dmrf, ProtocolKind::GreedyMinDelay,
                                   ProtocolKind::GreedyMaxRate, ProtocolKind::Bypass};

}  // namespace

TEST_CASE("radio parameters follow from packet size and bandwidth") {
  const auto r = make_radio(256, 200.0, 0.15, 30.0);
  CHECK(r.mu == doctest::Approx(1.28).epsilon(1e-12));
  CHECK(r.sigma == doctest::Approx(0.192).epsilon(1e-12));
  CHECK(r.max_tx_distance == 30.0);
}

TEST_CASE("delay sampling") {
  Rng rng(5);
  SUBCASE("zero spread returns the mean") {
    const auto r = make_radio(256, 200.0, 0.0, 30.0);
    for (int i = 0; i < 100; ++i) CHECK(sample_delay(r, rng) == r.mu);
  }
  SUBCASE("sample mean within 1% of mu") {
    auto r = make_radio(256, 200.0, 0.0, 30.0);
    r.sigma = 0.2;
    double sum = 0.0;
    constexpr int kSamples = 100000;
    for (int i = 0; i < kSamples; ++i) {
      const double d = sample_delay(r, rng);
      CHECK_GT(d, 0.0);
      sum += d;
    }
    CHECK(sum / kSamples == doctest::Approx(r.mu).epsilon(0.01));
  }
}

TEST_CASE("first-order radio energy") {
  const auto r = make_radio(256, 200.0, 0.15, 30.0);
  CHECK(energy_cost(r, 10.0, 256) == doctest::Approx(1.536e-5).epsilon(1e-12));
  CHECK(energy_cost(r, 0.0, 256) == doctest::Approx(256 * 50e-9).epsilon(1e-12));
  auto amp_heavy = r;
  amp_heavy.eps_elec = 0.0;
  CHECK(energy_cost(amp_heavy, 10.0, 256) > 2.0 * energy_cost(amp_heavy, 5.0, 256));
  CHECK_THROWS_AS(energy_cost(r, 31.0, 256), InvalidInput);
}

TEST_CASE("fault injection") {
  const auto t = grid400();
  Rng rng(9);
  SUBCASE("a fifth of the interior nodes") {
    const auto f = inject_faults(t, 0.2, rng);
    CHECK(f.size() == 79);
    std::set<NodeId> distinct;
    for (const auto& x : f) {
      distinct.insert(x.node);
      CHECK(x.node != t.source());
      CHECK(x.node != t.sink());
      CHECK(x.at == 0.0);
    }
    CHECK(distinct.size() == f.size());
  }
  SUBCASE("ratio zero") { CHECK(inject_faults(t, 0.0, rng).empty()); }
  SUBCASE("ratio one spares the endpoints") { CHECK(inject_faults(t, 1.0, rng).size() == 398); }
  SUBCASE("out of range") { CHECK_THROWS_AS(inject_faults(t, 1.5, rng), InvalidInput); }
}

TEST_CASE("buffer preload") {
  const auto t = grid400();
  const auto empty = preload_buffers(t, 0.0, 100.0);
  CHECK(std::all_of(empty.begin(), empty.end(), [](double b) { return b == 0.0; }));
  const auto full = preload_buffers(t, 1.0, 100.0);
  CHECK(full[to_index(t.source())] == 0.0);
  CHECK(full[to_index(t.sink())] == 0.0);
  CHECK(full[21] == 100.0);
  CHECK(preload_buffers(t, 0.85, 100.0)[21] == doctest::Approx(85.0));
}

TEST_CASE("protocol names") {
  for (auto p : kAllProtocols) CHECK(parse_protocol(to_string(p)) == p);
  CHECK(parse_protocol("dmrf") == ProtocolKind::Dmrf);
  CHECK_FALSE(parse_protocol("speed"));
}

TEST_CASE("scenario validation names the field") {
  const auto t = grid400();
  auto s = table2_scenario(ProtocolKind::Dmrf, t);
  s.fault_ratio = 1.5;
  try {
    validate(s);
    FAIL("expected InvalidInput");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("fault_ratio") != std::string::npos);
  }
  s = table2_scenario(ProtocolKind::Dmrf, t);
  s.params.probe_timeout = s.params.probe_period;
  CHECK_THROWS_AS(validate(s), InvalidInput);
}

TEST_CASE("fault-free grid delivers every packet on time") {
  const auto t = grid400();
  for (auto p : kAllProtocols) {
    CAPTURE(to_string(p));
    const auto r = run(t, table2_scenario(p, t), 1);
    CHECK(r.metrics.injected == 100);
    CHECK(r.metrics.delivered == 100);
    CHECK(r.metrics.conserved());
    for (const auto& pk : r.packets) {
      CHECK(pk.outcome == Outcome::Delivered);
      CHECK(pk.finished_at <= pk.deadline);
      CHECK(pk.hop_trace.front() == t.source());
      CHECK(pk.hop_trace.back() == t.sink());
      CHECK(pk.rate_trace.size() + 1 == pk.hop_trace.size());
    }
    CHECK(r.metrics.mean_delay > 0.0);
    CHECK(r.metrics.p95_delay >= r.metrics.mean_delay * 0.5);
    CHECK(r.metrics.energy_total > 0.0);
  }
}

TEST_CASE("no packets, no activity") {
  const auto t = grid400();
  auto s = table2_scenario(ProtocolKind::Dmrf, t);
  s.packet_count = 0;
  const auto r = run(t, s, 1);
  const auto& m = r.metrics;
  CHECK(m.injected == 0);
  CHECK(m.delivered + m.expired + m.dropped_no_route + m.buffer_drops == 0);
  CHECK(m.control_packets == 0);
  CHECK(m.jumps == 0);
  CHECK(m.energy_total == 0.0);
  CHECK(std::all_of(m.node_tx.begin(), m.node_tx.end(), [](auto v) { return v == 0; }));
}

TEST_CASE("identical seeds give identical runs") {
  const auto t = grid400();
  auto s = table2_scenario(ProtocolKind::Dmrf, t);
  s.fault_ratio = 0.2;
  const auto a = run(t, s, 77);
  const auto b = run(t, s, 77);
  const auto c = run(t, s, 78);
  CHECK(a.trace_hash == b.trace_hash);
  CHECK(a.metrics.delivered == b.metrics.delivered);
  CHECK(a.metrics.control_packets == b.metrics.control_packets);
  CHECK(a.metrics.energy_total == b.metrics.energy_total);
  CHECK(a.metrics.node_tx == b.metrics.node_tx);
  CHECK(a.trace_hash != c.trace_hash);
}

TEST_CASE("on a fault-free line every protocol takes the same path") {
  const auto t = line(8);
  std::vector<NodeId> expected;
  for (std::size_t i = 0; i < 8; ++i) expected.push_back(node_id(i));
  for (auto p : kAllProtocols) {
    CAPTURE(to_string(p));
    Scenario s;
    s.protocol = p;
    s.radio = make_radio(256, 200.0, 0.15, 30.0);
    s.packet_lifetime = 3.0 * shortest_delay(t, t.source(), s.radio.mu);
    s.packet_count = 10;
    const auto r = run(t, s, 3);
    CHECK(r.metrics.delivered == 10);
    CHECK(r.metrics.jumps == 0);
    for (const auto& pk : r.packets) CHECK(pk.hop_trace == expected);
  }
}

TEST_CASE("full buffers drop the first hop of a greedy forwarder") {
  const auto t = grid400();
  auto s = table2_scenario(ProtocolKind::GreedyMinDelay, t);
  s.buffer_fill = 1.0;
  const auto r = run(t, s, 1);
  CHECK(r.metrics.buffer_drops == 100);
  CHECK(r.metrics.conserved());
}

TEST_CASE("faults and congestion keep packets conserved") {
  const auto t = grid400();
  for (auto p : kAllProtocols) {
    auto s = table2_scenario(p, t);
    s.fault_ratio = 0.3;
    s.buffer_fill = 0.4;
    const auto r = run(t, s, 11);
    CAPTURE(to_string(p));
    CHECK(r.metrics.conserved());
    CHECK(r.metrics.injected == 100);
    for (const auto& pk : r.packets) {
      if (pk.outcome == Outcome::Delivered) CHECK(pk.finished_at <= pk.deadline);
    }
  }
}

TEST_CASE("baselines never jump") {
  const auto t = grid400();
  for (auto p : {ProtocolKind::GreedyMinDelay, ProtocolKind::GreedyMaxRate, ProtocolKind::Bypass}) {
    auto s = table2_scenario(p, t);
    s.fault_ratio = 0.3;
    const auto r = run(t, s, 4);
    CHECK(r.metrics.jumps == 0);
    for (const auto& pk : r.packets) CHECK(pk.jump_hops.empty());
  }
}

TEST_CASE("probe counting can be switched off") {
  const auto t = grid400();
  auto s = table2_scenario(ProtocolKind::GreedyMinDelay, t);
  const auto with = run(t, s, 1).metrics.control_packets;
  s.count_probes = false;
  CHECK(run(t, s, 1).metrics.control_packets == 0);
  CHECK(with > 0);
}

TEST_CASE("event trace is one JSON object per line in time order") {
  const auto t = line(5);
  Scenario s;
  s.radio = make_radio(256, 200.0, 0.15, 30.0);
  s.packet_lifetime = 20.0;
  s.packet_count = 3;
  s.record_trace = true;
  const auto r = run(t, s, 2);
  std::istringstream in(r.trace);
  std::string line_text;
  double last = 0.0;
  std::size_t lines = 0;
  std::set<std::string> kinds;
  while (std::getline(in, line_text)) {
    const auto j = nlohmann::json::parse(line_text);
    CHECK(j.at("t").get<double>() >= last);
    last = j.at("t").get<double>();
    kinds.insert(j.at("kind").get<std::string>());
    CHECK(j.contains("node"));
    CHECK(j.contains("packet"));
    ++lines;
  }
  CHECK(lines > 0);
  CHECK(kinds.count("PACKET_INJECT") == 1);
  CHECK(kinds.count("PACKET_ARRIVAL") == 1);
  s.record_trace = false;
  const auto quiet = run(t, s, 2);
  CHECK(quiet.trace.empty());
  CHECK(quiet.trace_hash == r.trace_hash);
}

TEST_CASE("radio range must match the topology") {
  const auto t = grid400();
  auto s = table2_scenario(ProtocolKind::Dmrf, t);
  s.radio.max_tx_distance = 20.0;
  CHECK_THROWS_AS(run(t, s, 1), InvalidInput);
}
