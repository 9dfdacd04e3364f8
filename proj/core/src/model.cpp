#include "dmrf/model.hpp"

#include <algorithm>

namespace dmrf {

std::string_view to_string(NodeState s) noexcept {
  switch (s) {
    case NodeState::Normal: return "NORMAL";
    case NodeState::Faulty: return "FAULTY";
    case NodeState::JFaulty: return "JFAULTY";
    case NodeState::Cong: return "CONG";
    case NodeState::JCong: return "JCONG";
    case NodeState::Void: return "VOID";
  }
  return "?";
}

std::string_view to_string(RateClass r) noexcept {
  switch (r) {
    case RateClass::Low: return "LOW";
    case RateClass::Medium: return "MEDIUM";
    case RateClass::High: return "HIGH";
  }
  return "?";
}

std::string_view to_string(FeedbackKind k) noexcept {
  switch (k) {
    case FeedbackKind::Fault: return "FAULT";
    case FeedbackKind::Cong: return "CONG";
    case FeedbackKind::Recover: return "RECOVER";
    case FeedbackKind::Void: return "VOID";
    case FeedbackKind::JumpFail: return "JUMP_FAIL";
  }
  return "?";
}

Packet make_packet(NodeId source, std::uint32_t size_bits, Millis now, Millis lifetime,
                   std::uint64_t id) {
  if (!(lifetime > 0.0)) {
    throw InvalidInput("packet lifetime must be positive, got " + std::to_string(lifetime));
  }
  Packet p;
  p.id = id;
  p.source = source;
  p.size_bits = size_bits;
  p.created_at = now;
  p.deadline = now + lifetime;
  p.hop_trace.push_back(source);
  return p;
}

bool legal_transition(NodeState from, NodeState to, std::span<const NodeState> fcs) noexcept {
  if (from == to) return true;
  auto all = [&](auto pred) { return std::all_of(fcs.begin(), fcs.end(), pred); };
  switch (to) {
    case NodeState::JFaulty:
      return !fcs.empty() &&
             all([](NodeState s) { return s == NodeState::Faulty || s == NodeState::JFaulty; });
    case NodeState::JCong:
      return !fcs.empty() &&
             all([](NodeState s) { return s == NodeState::Cong || s == NodeState::JCong; });
    case NodeState::Void:
      return fcs.empty() || all([](NodeState s) { return s == NodeState::Void; });
    case NodeState::Normal:
    case NodeState::Cong:
    case NodeState::Faulty:
      return true;
  }
  return false;
}

}  // namespace dmrf
