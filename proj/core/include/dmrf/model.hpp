#pragma once

// Shared vocabulary for the simulator: node identifiers, node states,
// packets, per-candidate routing statistics and feedback messages.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dmrf {

/// Simulation time and durations, in milliseconds.
using Millis = double;

/// Dense node index, stable for the lifetime of a run.
enum class NodeId : std::uint32_t {};

constexpr std::size_t to_index(NodeId id) noexcept { return static_cast<std::size_t>(id); }
constexpr NodeId node_id(std::size_t index) noexcept { return static_cast<NodeId>(index); }

enum class NodeState : std::uint8_t { Normal, Faulty, JFaulty, Cong, JCong, Void };

enum class RateClass : std::uint8_t { Low, Medium, High };

enum class TransmitMode : std::uint8_t { HopByHop, Jump };

enum class FeedbackKind : std::uint8_t { Fault, Cong, Recover, Void, JumpFail };

std::string_view to_string(NodeState s) noexcept;
std::string_view to_string(RateClass r) noexcept;
std::string_view to_string(FeedbackKind k) noexcept;

/// Raised for inputs outside an operation's domain.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Packet {
  std::uint64_t id = 0;
  NodeId source{};
  std::uint32_t size_bits = 0;
  Millis created_at = 0.0;
  Millis deadline = 0.0;
  RateClass rate = RateClass::Low;
  TransmitMode mode = TransmitMode::HopByHop;
  std::vector<NodeId> hop_trace;
  /// Rate class used for each transmission; rate_trace[i] covers hop_trace[i] -> hop_trace[i+1].
  std::vector<RateClass> rate_trace;
  /// Set while a perimeter-routing baseline is recovering around a void:
  /// the distance to the sink at which recovery started.
  std::optional<double> perimeter_anchor;
};

/// Packet with deadline = now + lifetime, rate LOW, hop-by-hop mode.
/// Throws InvalidInput when lifetime <= 0.
Packet make_packet(NodeId source, std::uint32_t size_bits, Millis now, Millis lifetime,
                   std::uint64_t id = 0);

/// deadline - now. Negative once the packet has expired.
constexpr Millis remaining_time(const Packet& p, Millis now) noexcept { return p.deadline - now; }

/// Per-candidate reliability counter. Starts at 100 and only goes down until reset.
struct Confidence {
  static constexpr int kMax = 100;
  int value = kMax;
  int threshold = 50;

  [[nodiscard]] bool faulty() const noexcept { return value < threshold; }
  void decrease(int step) noexcept { value = value - step < 0 ? 0 : value - step; }
  void reset() noexcept { value = kMax; }
};

/// Routing statistics a node keeps about one forwarding or jump candidate.
struct CandidateEntry {
  NodeId candidate{};
  std::uint32_t attempts = 0;   // T_t
  std::uint32_t successes = 0;  // S_t
  double suc = 1.0;             // fresh candidates get the optimistic prior
  double jump_p = 0.0;
  /// Estimated one-hop delay to the candidate.
  Millis link_delay = 0.0;
  /// Estimated time from the candidate to the sink (static, from initialization).
  Millis sink_delay = 0.0;
  /// Estimated delivery time through this candidate: link_delay + sink_delay.
  Millis delay_est = 0.0;
  NodeState cached_state = NodeState::Normal;
  std::uint32_t tx_count = 0;
  Confidence confidence;

  void set_link_delay(Millis d) noexcept {
    link_delay = d;
    delay_est = link_delay + sink_delay;
  }
};

struct FeedbackMessage {
  FeedbackKind kind = FeedbackKind::Fault;
  /// Node that sent this hop of the message.
  NodeId origin{};
  /// Node the message is about.
  NodeId subject{};
  int hop_limit = 0;
  /// Data packet that triggered the message, when there is one.
  std::optional<std::uint64_t> packet;
};

/// Whether a state change respects the FCS-wide conditions for the J-states and VOID.
bool legal_transition(NodeState from, NodeState to, std::span<const NodeState> fcs_states) noexcept;

}  // namespace dmrf
