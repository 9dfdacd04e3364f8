#include "dmrf/engine.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>

namespace dmrf {

RadioModel make_radio(std::uint32_t packet_bits, double bandwidth_bits_per_ms, double sigma_ratio,
                      double max_tx_distance) {
  if (!(bandwidth_bits_per_ms > 0.0)) throw InvalidInput("bandwidth must be positive");
  if (packet_bits == 0) throw InvalidInput("packet size must be positive");
  if (!(sigma_ratio >= 0.0)) throw InvalidInput("sigma ratio must be non-negative");
  RadioModel r;
  r.bandwidth = bandwidth_bits_per_ms;
  r.mu = static_cast<double>(packet_bits) / bandwidth_bits_per_ms;
  r.sigma = sigma_ratio * r.mu;
  r.max_tx_distance = max_tx_distance;
  return r;
}

Millis sample_delay(const RadioModel& radio, Rng& rng) {
  if (!(radio.mu > 0.0)) throw InvalidInput("mean hop delay must be positive");
  if (radio.sigma <= 0.0) return radio.mu;
  std::normal_distribution<double> nd(radio.mu, radio.sigma);
  const double floor = radio.mu / 10.0;
  for (;;) {
    const double d = nd(rng);
    if (d >= floor) return d;
  }
}

double energy_cost(const RadioModel& radio, double distance_m, std::uint32_t bits) {
  if (distance_m < 0.0 || distance_m > radio.max_tx_distance) {
    throw InvalidInput("transmission distance " + std::to_string(distance_m) +
                       " m outside [0, max_tx_distance]");
  }
  return static_cast<double>(bits) * (radio.eps_elec + radio.eps_amp * distance_m * distance_m);
}

std::vector<FaultOnset> inject_faults(const Topology& topo, double ratio, Rng& rng) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw InvalidInput("fault_ratio must lie in [0,1]");
  std::vector<NodeId> pool;
  for (std::size_t i = 0; i < topo.size(); ++i) {
    const NodeId id = node_id(i);
    if (id != topo.source() && id != topo.sink()) pool.push_back(id);
  }
  const auto count = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(pool.size())));
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  std::vector<FaultOnset> out;
  out.reserve(count);
  for (NodeId id : pool) out.push_back({id, 0.0});
  return out;
}

std::vector<double> preload_buffers(const Topology& topo, double fill_ratio,
                                    double capacity_bytes) {
  if (!(fill_ratio >= 0.0 && fill_ratio <= 1.0)) throw InvalidInput("buffer_fill must lie in [0,1]");
  std::vector<double> out(topo.size(), fill_ratio * capacity_bytes);
  out[to_index(topo.source())] = 0.0;
  out[to_index(topo.sink())] = 0.0;
  return out;
}

std::string_view to_string(ProtocolKind p) noexcept {
  switch (p) {
    case ProtocolKind::Dmrf: return "DMRF";
    case ProtocolKind::GreedyMinDelay: return "GREEDY_MIN_DELAY";
    case ProtocolKind::GreedyMaxRate: return "GREEDY_MAX_RATE";
    case ProtocolKind::Bypass: return "BYPASS";
  }
  return "?";
}

std::optional<ProtocolKind> parse_protocol(std::string_view name) noexcept {
  for (auto p : {ProtocolKind::Dmrf, ProtocolKind::GreedyMinDelay, ProtocolKind::GreedyMaxRate,
                 ProtocolKind::Bypass}) {
    const auto canonical = to_string(p);
    if (std::equal(canonical.begin(), canonical.end(), name.begin(), name.end(),
                   [](char a, char b) { return a == std::toupper(static_cast<unsigned char>(b)); })) {
      return p;
    }
  }
  return std::nullopt;
}

std::string_view to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::Pending: return "PENDING";
    case Outcome::Delivered: return "DELIVERED";
    case Outcome::Expired: return "EXPIRED";
    case Outcome::NoRoute: return "NO_ROUTE";
    case Outcome::BufferDrop: return "BUFFER_DROP";
  }
  return "?";
}

void validate(const Scenario& s) {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw InvalidInput(std::string(field) + ": " + what);
  };
  require(s.radio.bandwidth > 0.0, "bandwidth", "must be positive");
  require(s.radio.mu > 0.0, "mu", "must be positive");
  require(s.radio.sigma >= 0.0, "sigma", "must be non-negative");
  require(s.radio.max_tx_distance > 0.0, "max_tx_distance", "must be positive");
  require(s.radio.eps_elec >= 0.0, "eps_elec", "must be non-negative");
  require(s.radio.eps_amp >= 0.0, "eps_amp", "must be non-negative");
  require(s.buffer_bytes > 0.0, "buffer_bytes", "must be positive");
  require(s.packet_bytes > 0, "packet_bytes", "must be positive");
  require(static_cast<double>(s.packet_bytes) <= s.buffer_bytes, "packet_bytes",
          "must fit in the buffer");
  require(s.packet_lifetime > 0.0, "packet_lifetime", "must be positive");
  require(s.inject_interval > 0.0, "inject_interval", "must be positive");
  require(s.fault_ratio >= 0.0 && s.fault_ratio <= 1.0, "fault_ratio", "must lie in [0,1]");
  require(s.buffer_fill >= 0.0 && s.buffer_fill <= 1.0, "buffer_fill", "must lie in [0,1]");
  for (double m : s.rate_multipliers) require(m > 0.0, "rate_multipliers", "must be positive");
  require(s.paths_m >= 1, "M", "must be at least 1");
  require(s.paths_k >= 1 && s.paths_k <= s.paths_m, "k", "must lie in [1, M]");
  require(s.horizon > 0.0, "horizon", "must be positive");
  require(s.arrival_window > 0.0, "arrival_window", "must be positive");
  require(s.ack_timeout > 0.0, "ack_timeout", "must be positive");
  require(s.params.theta_jump > 0.0 && s.params.theta_jump < 1.0, "theta_jump",
          "must lie in (0,1)");
  require(s.params.theta_cong > 0.0 && s.params.theta_cong <= 1.0, "theta_cong",
          "must lie in (0,1]");
  require(s.params.probe_period > 0.0, "probe_period", "must be positive");
  require(s.params.probe_timeout > 0.0 && s.params.probe_timeout < s.params.probe_period,
          "probe_timeout", "must be positive and shorter than probe_period");
  require(s.params.confidence_step > 0, "confidence_step", "must be positive");
  require(s.params.confidence_threshold > 0 &&
              s.params.confidence_threshold <= Confidence::kMax,
          "confidence_threshold", "must lie in (0,100]");
}

namespace {

enum class EventKind : std::uint8_t {
  PacketArrival,
  PacketInject,
  Probe,
  ProbeTimeout,
  FeedbackDelivery,
  FaultOnset,
  DeadlineCheck,
  TxTimeout,
};

const char* kind_name(EventKind k) {
  switch (k) {
    case EventKind::PacketArrival: return "PACKET_ARRIVAL";
    case EventKind::PacketInject: return "PACKET_INJECT";
    case EventKind::Probe: return "PROBE";
    case EventKind::ProbeTimeout: return "PROBE_TIMEOUT";
    case EventKind::FeedbackDelivery: return "FEEDBACK_DELIVERY";
    case EventKind::FaultOnset: return "FAULT_ONSET";
    case EventKind::DeadlineCheck: return "DEADLINE_CHECK";
    case EventKind::TxTimeout: return "TX_TIMEOUT";
  }
  return "?";
}

constexpr std::uint64_t kNoPacket = std::numeric_limits<std::uint64_t>::max();

struct Event {
  Millis time = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::PacketInject;
  NodeId node{};
  NodeId other{};
  std::uint64_t packet = kNoPacket;
  std::uint64_t token = 0;
  bool jump = false;
  RateClass rate = RateClass::Medium;
  std::optional<FeedbackMessage> feedback;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const noexcept {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

struct NodeRuntime {
  bool alive = true;
  std::deque<std::uint64_t> queue;
  double data_bytes = 0.0;
  double background = 0.0;
  bool busy = false;
  std::uint64_t token = 0;
  double arrival_rate = 0.0;
  Millis rate_at = 0.0;
  std::vector<NodeId> upstream;
  std::vector<CandidateEntry> fcs;  // baseline view of the forwarding set
  std::vector<ProbeResult> pending;
};

struct PacketRuntime {
  Packet pkt;
  PacketOutcome out;
  bool jumped = false;
};

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30U)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27U)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31U);
}

class Simulator {
 public:
  Simulator(const Topology& topo, const Scenario& sc, std::uint64_t seed)
      : topo_(topo), sc_(sc), nodes_(topo.size()) {
    std::uint64_t s = seed;
    delay_rng_.seed(splitmix64(s));
    proto_rng_.seed(splitmix64(s));
    fault_rng_.seed(splitmix64(s));
    result_.metrics.node_tx.assign(topo.size(), 0);
  }

  RunResult run() {
    if (sc_.packet_count == 0) return std::move(result_);
    setup();
    while (!queue_.empty() && finished_ < sc_.packet_count) {
      Event ev = queue_.top();
      queue_.pop();
      if (ev.time > sc_.horizon) break;
      now_ = ev.time;
      handle(ev);
    }
    for (std::uint64_t pid = 0; pid < packets_.size(); ++pid) {
      if (packets_[pid].out.outcome == Outcome::Pending) finish(pid, Outcome::Expired);
    }
    result_.metrics.injected = packets_.size();
    summarize();
    return std::move(result_);
  }

 private:
  [[nodiscard]] bool dmrf() const noexcept { return sc_.protocol == ProtocolKind::Dmrf; }

  // DMRF plans in slowest-class service time plus one standard deviation of
  // per-hop jitter, so a route that is feasible on its estimate stays feasible
  // at any rate class.
  [[nodiscard]] double plan_scale() const noexcept {
    const double slowest =
        *std::max_element(sc_.rate_multipliers.begin(), sc_.rate_multipliers.end());
    return slowest * (1.0 + sc_.radio.sigma / sc_.radio.mu);
  }

  void schedule(Event ev) {
    ev.seq = seq_++;
    queue_.push(std::move(ev));
  }

  void setup() {
    const std::size_t n = topo_.size();
    const auto background = preload_buffers(topo_, sc_.buffer_fill, sc_.buffer_bytes);
    for (std::size_t i = 0; i < n; ++i) nodes_[i].background = background[i];
    for (std::size_t i = 0; i < n; ++i) {
      for (NodeId v : forward_neighbors(topo_, node_id(i))) {
        nodes_[to_index(v)].upstream.push_back(node_id(i));
      }
    }
    for (const auto& f : inject_faults(topo_, sc_.fault_ratio, fault_rng_)) {
      nodes_[to_index(f.node)].alive = false;
      Event ev;
      ev.time = f.at;
      ev.kind = EventKind::FaultOnset;
      ev.node = f.node;
      schedule(ev);
    }

    if (dmrf()) {
      init_dmrf();
    } else {
      planar_ = planar_neighbors(topo_);
      for (std::size_t i = 0; i < n; ++i) {
        nodes_[i].fcs = build_fcs(topo_, node_id(i)).members;
        for (auto& e : nodes_[i].fcs) e.set_link_delay(sc_.radio.mu);
      }
    }

    std::uniform_real_distribution<double> phase(0.0, sc_.params.probe_period);
    for (std::size_t i = 0; i < n; ++i) {
      const NodeId id = node_id(i);
      if (id == topo_.sink() || !nodes_[i].alive) continue;
      Event ev;
      ev.time = phase(delay_rng_);
      ev.kind = EventKind::Probe;
      ev.node = id;
      schedule(ev);
    }
    for (std::size_t k = 0; k < sc_.packet_count; ++k) {
      Event ev;
      ev.time = static_cast<double>(k) * sc_.inject_interval;
      ev.kind = EventKind::PacketInject;
      ev.node = topo_.source();
      schedule(ev);
    }
  }

  // State notices from every live node, settled to a fixpoint, then RTT
  // measurement along the initial disjoint paths.
  void init_dmrf() {
    const std::size_t n = topo_.size();
    const Millis plan = plan_scale() * sc_.radio.mu;
    const auto sink_delays = delays_to_sink(topo_, plan);
    dmrf_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      dmrf_.push_back(make_dmrf_node(topo_, node_id(i), sink_delays, plan, sc_.params));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!nodes_[i].alive || node_id(i) == topo_.sink()) continue;
      dmrf_[i].detect_congestion(nodes_[i].background, sc_.buffer_bytes, 0.0,
                                 static_cast<double>(sc_.packet_bytes));
      result_.metrics.control_packets += 1;
    }
    for (std::size_t round = 0; round <= n; ++round) {
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (!nodes_[i].alive) continue;
        for (auto idx : dmrf_[i].fcs_indices()) {
          const NodeId v = dmrf_[i].candidates()[idx].candidate;
          if (!nodes_[to_index(v)].alive) continue;
          const auto d = dmrf_[i].set_candidate_state(v, dmrf_[to_index(v)].state());
          changed = changed || !d.candidate_updates.empty();
        }
      }
      if (!changed) break;
    }
    auto paths = select_k(disjoint_paths(topo_, sc_.paths_m, sc_.radio.mu), sc_.paths_k);
    for (const auto& path : paths.paths) {
      result_.metrics.control_packets += 2 * (path.size() - 1);
      for (std::size_t h = 0; h + 1 < path.size(); ++h) {
        if (!nodes_[to_index(path[h + 1])].alive) break;
        dmrf_[to_index(path[h])].set_link_delay(path[h + 1],
                                                plan_scale() * sample_delay(sc_.radio, delay_rng_));
      }
    }
  }

  void handle(const Event& ev) {
    trace(ev);
    switch (ev.kind) {
      case EventKind::PacketInject: on_inject(); break;
      case EventKind::PacketArrival: on_arrival(ev); break;
      case EventKind::TxTimeout: on_timeout(ev); break;
      case EventKind::DeadlineCheck: on_deadline(ev); break;
      case EventKind::Probe: on_probe(ev); break;
      case EventKind::ProbeTimeout: on_probe_timeout(ev); break;
      case EventKind::FeedbackDelivery: on_feedback(ev); break;
      case EventKind::FaultOnset: nodes_[to_index(ev.node)].alive = false; break;
    }
  }

  void trace(const Event& ev) {
    auto mix = [this](std::uint64_t v) {
      for (int b = 0; b < 8; ++b) {
        hash_ ^= (v >> (8 * b)) & 0xFFU;
        hash_ *= 0x100000001B3ULL;
      }
    };
    mix(std::bit_cast<std::uint64_t>(ev.time));
    mix(static_cast<std::uint64_t>(ev.kind));
    mix(static_cast<std::uint64_t>(ev.node));
    mix(ev.packet);
    if (!sc_.record_trace) return;
    char buf[160];
    if (ev.packet == kNoPacket) {
      std::snprintf(buf, sizeof buf, "{\"t\":%.17g,\"kind\":\"%s\",\"node\":%u,\"packet\":null}\n",
                    ev.time, kind_name(ev.kind), static_cast<unsigned>(ev.node));
    } else {
      std::snprintf(buf, sizeof buf, "{\"t\":%.17g,\"kind\":\"%s\",\"node\":%u,\"packet\":%llu}\n",
                    ev.time, kind_name(ev.kind), static_cast<unsigned>(ev.node),
                    static_cast<unsigned long long>(ev.packet));
    }
    result_.trace += buf;
  }

  [[nodiscard]] bool fits(NodeId v) const {
    if (v == topo_.sink()) return true;
    const auto& rt = nodes_[to_index(v)];
    return rt.background + rt.data_bytes + static_cast<double>(sc_.packet_bytes) <=
           sc_.buffer_bytes;
  }

  void decay_rate(NodeRuntime& rt) const {
    rt.arrival_rate *= std::exp(-(now_ - rt.rate_at) / sc_.arrival_window);
    rt.rate_at = now_;
  }

  void check_congestion(NodeId v) {
    if (!dmrf() || v == topo_.sink()) return;
    auto& rt = nodes_[to_index(v)];
    if (!rt.alive) return;
    decay_rate(rt);
    const auto d =
        dmrf_[to_index(v)].detect_congestion(rt.background + rt.data_bytes, sc_.buffer_bytes,
                                             rt.arrival_rate, static_cast<double>(sc_.packet_bytes));
    apply(v, d);
  }

  void apply(NodeId v, const Detection& d) {
    if (d.feedback) broadcast(v, *d.feedback);
  }

  /// One state notice, heard by every live neighbor that has `v` in its FCS.
  void broadcast(NodeId v, const FeedbackMessage& msg) {
    result_.metrics.control_packets += 1;
    for (NodeId u : nodes_[to_index(v)].upstream) {
      if (!nodes_[to_index(u)].alive) continue;
      Event ev;
      ev.time = now_ + sample_delay(sc_.radio, delay_rng_);
      ev.kind = EventKind::FeedbackDelivery;
      ev.node = u;
      ev.other = v;
      ev.feedback = msg;
      schedule(ev);
    }
  }

  void send_jump_fail(std::uint64_t pid) {
    const auto& trace = packets_[pid].pkt.hop_trace;
    const std::size_t k = trace.size() - 1;
    if (k == 0) return;
    FeedbackMessage msg;
    msg.kind = FeedbackKind::JumpFail;
    msg.origin = trace[k];
    msg.subject = trace[k];
    msg.hop_limit = static_cast<int>(k - 1);
    msg.packet = pid;
    unicast(trace[k - 1], trace[k], msg);
  }

  void unicast(NodeId to, NodeId from, const FeedbackMessage& msg) {
    result_.metrics.control_packets += 1;
    Event ev;
    ev.time = now_ + sample_delay(sc_.radio, delay_rng_);
    ev.kind = EventKind::FeedbackDelivery;
    ev.node = to;
    ev.other = from;
    ev.packet = msg.packet.value_or(kNoPacket);
    ev.feedback = msg;
    schedule(ev);
  }

  void enqueue(NodeId v, std::uint64_t pid) {
    auto& rt = nodes_[to_index(v)];
    rt.queue.push_back(pid);
    rt.data_bytes += sc_.packet_bytes;
    decay_rate(rt);
    rt.arrival_rate += 1.0 / sc_.arrival_window;
    check_congestion(v);
  }

  void pop_head(NodeId v) {
    auto& rt = nodes_[to_index(v)];
    rt.queue.pop_front();
    rt.data_bytes -= sc_.packet_bytes;
    rt.busy = false;
    check_congestion(v);
  }

  void finish(std::uint64_t pid, Outcome o) {
    auto& p = packets_[pid];
    if (p.out.outcome != Outcome::Pending) return;
    p.out.outcome = o;
    p.out.finished_at = now_;
    p.out.hop_trace = p.pkt.hop_trace;
    p.out.rate_trace = p.pkt.rate_trace;
    finished_ += 1;
    auto& m = result_.metrics;
    switch (o) {
      case Outcome::Delivered: m.delivered += 1; break;
      case Outcome::Expired: m.expired += 1; break;
      case Outcome::NoRoute: m.dropped_no_route += 1; break;
      case Outcome::BufferDrop: m.buffer_drops += 1; break;
      case Outcome::Pending: break;
    }
    if (dmrf() && p.jumped && (o == Outcome::Expired || o == Outcome::NoRoute)) {
      send_jump_fail(pid);
    }
  }

  void on_inject() {
    const std::uint64_t pid = packets_.size();
    PacketRuntime p;
    p.pkt = make_packet(topo_.source(), sc_.packet_bytes * 8U, now_, sc_.packet_lifetime, pid);
    p.out.id = pid;
    p.out.created_at = now_;
    p.out.deadline = p.pkt.deadline;
    packets_.push_back(std::move(p));

    Event dl;
    dl.time = std::nextafter(packets_[pid].pkt.deadline, std::numeric_limits<double>::infinity());
    dl.kind = EventKind::DeadlineCheck;
    dl.node = topo_.source();
    dl.packet = pid;
    schedule(dl);

    if (!fits(topo_.source())) {
      finish(pid, Outcome::BufferDrop);
      return;
    }
    enqueue(topo_.source(), pid);
    try_start(topo_.source());
  }

  [[nodiscard]] double multiplier(RateClass r, bool jump) const {
    if (!dmrf()) return 1.0;
    if (jump) return sc_.rate_multipliers[2];
    return sc_.rate_multipliers[static_cast<std::size_t>(r)];
  }

  void try_start(NodeId v) {
    auto& rt = nodes_[to_index(v)];
    while (rt.alive && !rt.busy && !rt.queue.empty()) {
      const std::uint64_t pid = rt.queue.front();
      auto& p = packets_[pid];
      ForwardDecision d;
      if (dmrf()) {
        d = dmrf_[to_index(v)].select_next_hop(p.pkt, now_, proto_rng_);
      } else {
        NodeView view{v, topo_.sink(), topo_.positions(), rt.fcs, planar_[to_index(v)]};
        d = baseline_next_hop(static_cast<BaselineKind>(static_cast<int>(sc_.protocol) - 1), view,
                              p.pkt, now_);
      }
      if (const auto* drop = std::get_if<Drop>(&d)) {
        pop_head(v);
        finish(pid, drop->reason == DropReason::Expired ? Outcome::Expired : Outcome::NoRoute);
        continue;
      }
      Event ev;
      ev.kind = EventKind::PacketArrival;
      ev.other = v;
      ev.packet = pid;
      if (const auto* f = std::get_if<Forward>(&d)) {
        ev.node = f->next;
        ev.rate = f->rate;
      } else {
        ev.node = std::get<Jump>(d).next;
        ev.jump = true;
        ev.rate = RateClass::High;
      }
      const double wait = rt.background * 8.0 / sc_.radio.bandwidth;
      ev.time = now_ + wait + sample_delay(sc_.radio, delay_rng_) * multiplier(ev.rate, ev.jump);
      rt.busy = true;
      ev.token = ++rt.token;
      schedule(ev);
    }
  }

  void on_arrival(const Event& ev) {
    const NodeId s = ev.other;
    const NodeId t = ev.node;
    auto& srt = nodes_[to_index(s)];
    auto& p = packets_[ev.packet];
    if (p.out.outcome != Outcome::Pending || ev.token != srt.token || !srt.busy) return;

    result_.metrics.energy_total +=
        energy_cost(sc_.radio, topo_.distance(s, t), sc_.packet_bytes * 8U);
    result_.metrics.node_tx[to_index(s)] += 1;

    if (!nodes_[to_index(t)].alive) {
      if (dmrf()) {
        Event to = ev;
        to.kind = EventKind::TxTimeout;
        to.time = now_ + sc_.ack_timeout;
        to.node = s;
        to.other = t;
        schedule(to);
      } else {
        pop_head(s);
        finish(ev.packet, Outcome::NoRoute);
        try_start(s);
      }
      return;
    }

    if (!fits(t)) {
      if (dmrf()) {
        // Immediate NACK: the receiver announces its congestion to the sender.
        result_.metrics.control_packets += 1;
        srt.busy = false;
        if (ev.jump) jump_failed(s, t, ev.packet);
        apply(s, dmrf_[to_index(s)].set_candidate_state(t, NodeState::Cong));
      } else {
        pop_head(s);
        finish(ev.packet, Outcome::BufferDrop);
      }
      try_start(s);
      return;
    }

    pop_head(s);
    if (ev.jump) {
      if (dmrf()) dmrf_[to_index(s)].on_jump_result(t, true);
      p.jumped = true;
      p.out.jump_hops.push_back(p.pkt.hop_trace.size() - 1);
      result_.metrics.jumps += 1;
    }
    p.pkt.hop_trace.push_back(t);
    p.pkt.rate_trace.push_back(ev.rate);
    if (t == topo_.sink()) {
      if (now_ > p.pkt.deadline) throw std::logic_error("packet delivered after its deadline");
      finish(ev.packet, Outcome::Delivered);
    } else {
      enqueue(t, ev.packet);
      try_start(t);
    }
    try_start(s);
  }

  void jump_failed(NodeId s, NodeId t, std::uint64_t pid) {
    if (dmrf_[to_index(s)].on_jump_result(t, false)) send_jump_fail(pid);
  }

  void on_timeout(const Event& ev) {
    const NodeId s = ev.node;
    const NodeId t = ev.other;
    auto& srt = nodes_[to_index(s)];
    if (packets_[ev.packet].out.outcome != Outcome::Pending || ev.token != srt.token ||
        !srt.busy) {
      return;
    }
    srt.busy = false;
    if (ev.jump) {
      jump_failed(s, t, ev.packet);
    } else {
      apply(s, dmrf_[to_index(s)].record_missed_reply(t));
    }
    try_start(s);
  }

  void on_deadline(const Event& ev) {
    auto& p = packets_[ev.packet];
    if (p.out.outcome != Outcome::Pending) return;
    const NodeId holder = p.pkt.hop_trace.back();
    auto& rt = nodes_[to_index(holder)];
    auto it = std::find(rt.queue.begin(), rt.queue.end(), ev.packet);
    if (it != rt.queue.end()) {
      if (it == rt.queue.begin()) {
        rt.busy = false;
        rt.token += 1;  // orphans the in-flight transmission
      }
      rt.queue.erase(it);
      rt.data_bytes -= sc_.packet_bytes;
    }
    finish(ev.packet, Outcome::Expired);
    check_congestion(holder);
    try_start(holder);
  }

  void on_probe(const Event& ev) {
    const NodeId u = ev.node;
    auto& rt = nodes_[to_index(u)];
    if (!rt.alive) return;
    rt.pending.clear();
    auto probe = [&](NodeId v) {
      if (sc_.count_probes) result_.metrics.control_packets += 1;
      ProbeResult pr;
      pr.candidate = v;
      pr.replied = nodes_[to_index(v)].alive;
      pr.measured_delay = sample_delay(sc_.radio, delay_rng_) * (dmrf() ? plan_scale() : 1.0);
      if (dmrf() && pr.replied) pr.reported_state = dmrf_[to_index(v)].state();
      rt.pending.push_back(pr);
    };
    if (dmrf()) {
      const auto& node = dmrf_[to_index(u)];
      for (auto idx : node.fcs_indices()) probe(node.candidates()[idx].candidate);
      check_congestion(u);
    } else {
      for (const auto& e : rt.fcs) probe(e.candidate);
    }
    Event to;
    to.time = now_ + sc_.params.probe_timeout;
    to.kind = EventKind::ProbeTimeout;
    to.node = u;
    schedule(to);
    Event next;
    next.time = now_ + sc_.params.probe_period;
    next.kind = EventKind::Probe;
    next.node = u;
    schedule(next);
  }

  void on_probe_timeout(const Event& ev) {
    const NodeId u = ev.node;
    auto& rt = nodes_[to_index(u)];
    if (!rt.alive) return;
    if (dmrf()) {
      apply(u, dmrf_[to_index(u)].detect_faulty(rt.pending));
    } else {
      for (const auto& pr : rt.pending) {
        if (!pr.replied) continue;
        for (auto& e : rt.fcs) {
          if (e.candidate == pr.candidate) e.set_link_delay(pr.measured_delay);
        }
      }
    }
    rt.pending.clear();
  }

  void on_feedback(const Event& ev) {
    const NodeId u = ev.node;
    if (!nodes_[to_index(u)].alive || !dmrf() || !ev.feedback) return;
    const auto out = dmrf_[to_index(u)].on_feedback(*ev.feedback, proto_rng_);
    if (out.state_change) apply(u, *out.state_change);
    if (out.forward && out.forward->packet) {
      const auto& trace = packets_[*out.forward->packet].pkt.hop_trace;
      const auto h = static_cast<std::size_t>(out.forward->hop_limit);
      if (h < trace.size()) unicast(trace[h], u, *out.forward);
    }
  }

  void summarize() {
    auto& m = result_.metrics;
    std::vector<Millis> delays;
    for (auto& p : packets_) {
      if (p.out.outcome == Outcome::Delivered) delays.push_back(p.out.finished_at - p.out.created_at);
      result_.packets.push_back(std::move(p.out));
    }
    if (!delays.empty()) {
      double sum = 0.0;
      for (double d : delays) sum += d;
      m.mean_delay = sum / static_cast<double>(delays.size());
      std::sort(delays.begin(), delays.end());
      // Nearest-rank percentile.
      const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(delays.size())));
      m.p95_delay = delays[std::max<std::size_t>(rank, 1) - 1];
    }
    result_.trace_hash = hash_;
  }

  const Topology& topo_;
  const Scenario& sc_;
  std::vector<NodeRuntime> nodes_;
  std::vector<DmrfNode> dmrf_;
  std::vector<std::vector<NodeId>> planar_;
  std::vector<PacketRuntime> packets_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  Rng delay_rng_;
  Rng proto_rng_;
  Rng fault_rng_;
  std::uint64_t seq_ = 0;
  std::uint64_t hash_ = 0xCBF29CE484222325ULL;
  std::size_t finished_ = 0;
  Millis now_ = 0.0;
  RunResult result_;
};

}  // namespace

RunResult run(const Topology& topo, const Scenario& scenario, std::uint64_t seed) {
  validate(scenario);
  if (scenario.radio.max_tx_distance != topo.max_tx_distance()) {
    throw InvalidInput("max_tx_distance: radio and topology disagree");
  }
  Simulator sim(topo, scenario, seed);
  return sim.run();
}

}  // namespace dmrf
