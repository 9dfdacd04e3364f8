#pragma once

// Per-node DMRF routing logic: fault/congestion/void detection, rate-class
// next-hop selection, jump-target sampling and success-ratio learning.

#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "dmrf/model.hpp"
#include "dmrf/topology.hpp"

namespace dmrf {

using Rng = std::mt19937_64;

struct ProtocolParams {
  double theta_jump = 0.2;
  double theta_cong = 0.8;
  Millis cong_horizon = 5.0;
  double cong_hysteresis = 0.1;
  int confidence_step = 25;
  int confidence_threshold = 50;
  Millis probe_period = 10.0;
  Millis probe_timeout = 2.0;
  double omega_floor = 1e-3;
};

struct Thresholds {
  double low = 0.0;
  double high = 0.0;
  double jump = 0.0;
  double omega = 0.0;
};

/// Slack ratio L / T. Throws InvalidInput when T <= 0; returns 0 for L <= 0.
double compute_lambda(Millis remaining, Millis estimated);

/// Band boundaries from local delay information. nullopt when `sink_delay` is
/// not finite (no route to the sink).
std::optional<Thresholds> compute_thresholds(double theta_jump, Millis sink_delay,
                                             Millis max_fcs_delay, Millis max_next_hop_delay,
                                             Millis mean_hop_delay, Millis remaining,
                                             double omega_floor = 1e-3);

/// Band for a positive slack ratio; nullopt means jump mode.
std::optional<RateClass> rate_band(double lambda, const Thresholds& th) noexcept;

/// Never moves between LOW and HIGH in a single hop.
RateClass smooth_rate(RateClass previous, RateClass wanted) noexcept;

/// p_t = suc_t / sum(suc); uniform when every suc is zero.
void jump_probabilities(std::span<CandidateEntry> entries);

/// Samples a candidate proportionally to jump_p, skipping FAULTY ones. Falls
/// back to `sink_in_range` when nothing is left.
std::optional<NodeId> choose_jump_target(std::span<const CandidateEntry> entries, Rng& rng,
                                         std::optional<NodeId> sink_in_range);

enum class DropReason : std::uint8_t { Expired, NoRoute };

struct Forward {
  NodeId next{};
  RateClass rate = RateClass::Low;
};
struct Jump {
  NodeId next{};
};
struct Drop {
  DropReason reason = DropReason::NoRoute;
};
using ForwardDecision = std::variant<Forward, Jump, Drop>;

struct ProbeResult {
  NodeId candidate{};
  bool replied = false;
  Millis measured_delay = 0.0;
  NodeState reported_state = NodeState::Normal;
};

struct StateUpdate {
  NodeId node{};
  NodeState state = NodeState::Normal;
};

/// Outcome of a detection step: candidate states changed, own state before and
/// after, and the upstream notification to send, if any.
struct Detection {
  std::vector<StateUpdate> candidate_updates;
  NodeState before = NodeState::Normal;
  NodeState after = NodeState::Normal;
  std::optional<FeedbackMessage> feedback;

  [[nodiscard]] bool changed() const noexcept { return before != after; }
};

struct FeedbackOutcome {
  /// Copy to pass further upstream (JUMP_FAIL only).
  std::optional<FeedbackMessage> forward;
  /// Own state change caused by the message.
  std::optional<Detection> state_change;
  /// Multiplicative factor applied to the success ratio (JUMP_FAIL only).
  std::optional<double> tau;
};

/// Routing table and state machine of one node.
class DmrfNode {
 public:
  /// `candidates` is the full jump candidate set (ascending id); `fcs` lists
  /// the ids that also belong to the forwarding candidate set.
  DmrfNode(NodeId self, NodeId sink, Millis sink_delay, Millis mean_hop_delay,
           std::vector<CandidateEntry> candidates, std::span<const NodeId> fcs,
           ProtocolParams params);

  [[nodiscard]] NodeId id() const noexcept { return self_; }
  [[nodiscard]] NodeState state() const noexcept { return state_; }
  [[nodiscard]] Millis sink_delay() const noexcept { return sink_delay_; }
  [[nodiscard]] std::span<const CandidateEntry> candidates() const noexcept { return cand_; }
  [[nodiscard]] std::span<const std::size_t> fcs_indices() const noexcept { return fcs_; }
  [[nodiscard]] std::vector<CandidateEntry> fcs() const;
  [[nodiscard]] std::vector<NodeState> fcs_states() const;
  [[nodiscard]] const CandidateEntry* find(NodeId id) const noexcept;
  [[nodiscard]] bool own_congestion() const noexcept { return congested_; }
  [[nodiscard]] const ProtocolParams& params() const noexcept { return params_; }
  [[nodiscard]] std::optional<Thresholds> thresholds(Millis remaining) const;

  /// Probe replies for (a subset of) the FCS.
  Detection detect_faulty(std::span<const ProbeResult> probes);
  /// Buffer-occupancy forecast against theta_cong, with hysteresis on recovery.
  Detection detect_congestion(double used_bytes, double capacity_bytes,
                              double arrival_rate_per_ms, double packet_bytes);
  /// Re-evaluates the VOID condition against the cached FCS states.
  Detection detect_void();

  ForwardDecision select_next_hop(Packet& packet, Millis now, Rng& rng);

  /// Records the outcome of a jump; a failure yields a JUMP_FAIL for the upstream node.
  std::optional<FeedbackMessage> on_jump_result(NodeId target, bool success);

  FeedbackOutcome on_feedback(const FeedbackMessage& msg, Rng& rng);

  /// Sets a candidate's cached state directly (initialization notices, NACKs).
  Detection set_candidate_state(NodeId candidate, NodeState state);
  /// Missed acknowledgement from a hop-by-hop next hop; same bookkeeping as a missed probe.
  Detection record_missed_reply(NodeId candidate);
  void set_link_delay(NodeId candidate, Millis delay);

 private:
  CandidateEntry* entry(NodeId id) noexcept;
  Detection refresh_state(std::vector<StateUpdate> updates);
  [[nodiscard]] NodeState derive_state() const;
  [[nodiscard]] Millis max_fcs_link_delay() const;
  std::optional<NodeId> sink_if_in_range() const;

  NodeId self_;
  NodeId sink_;
  Millis sink_delay_;
  Millis mean_hop_delay_;
  std::vector<CandidateEntry> cand_;
  std::vector<std::size_t> fcs_;
  ProtocolParams params_;
  NodeState state_ = NodeState::Normal;
  bool congested_ = false;
};

/// Builds the routing table of `node`: jump candidates are all nodes with
/// positive progress within max_tx_distance; `sink_delays` comes from delays_to_sink.
DmrfNode make_dmrf_node(const Topology& topo, NodeId node, std::span<const Millis> sink_delays,
                        Millis mean_hop_delay, const ProtocolParams& params);

}  // namespace dmrf
