#pragma once

// Deterministic discrete-event simulation of one source->sink data stream.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmrf/baselines.hpp"
#include "dmrf/model.hpp"
#include "dmrf/protocol.hpp"
#include "dmrf/topology.hpp"

namespace dmrf {

struct RadioModel {
  double bandwidth = 200.0;  // bits per ms (200 Kb/s)
  Millis mu = 1.28;
  Millis sigma = 0.192;
  double max_tx_distance = 30.0;
  double eps_elec = 50e-9;    // J/bit
  double eps_amp = 100e-12;   // J/bit/m^2
};

/// Radio with mu = packet_bits / bandwidth and sigma = sigma_ratio * mu.
RadioModel make_radio(std::uint32_t packet_bits, double bandwidth_bits_per_ms,
                      double sigma_ratio, double max_tx_distance);

/// Normal(mu, sigma^2), resampled until the draw is at least mu / 10.
Millis sample_delay(const RadioModel& radio, Rng& rng);

/// bits * (eps_elec + eps_amp * d^2). Throws InvalidInput beyond max_tx_distance.
double energy_cost(const RadioModel& radio, double distance_m, std::uint32_t bits);

struct FaultOnset {
  NodeId node{};
  Millis at = 0.0;
};

/// floor(ratio * (N - 2)) distinct nodes other than source and sink, all failing at t = 0.
std::vector<FaultOnset> inject_faults(const Topology& topo, double ratio, Rng& rng);

/// Initial background occupancy in bytes; zero for source and sink.
std::vector<double> preload_buffers(const Topology& topo, double fill_ratio, double capacity_bytes);

enum class ProtocolKind : std::uint8_t { Dmrf, GreedyMinDelay, GreedyMaxRate, Bypass };

std::string_view to_string(ProtocolKind p) noexcept;
std::optional<ProtocolKind> parse_protocol(std::string_view name) noexcept;

struct Scenario {
  ProtocolKind protocol = ProtocolKind::Dmrf;
  RadioModel radio;
  ProtocolParams params;
  double buffer_bytes = 100.0;
  std::uint32_t packet_bytes = 32;
  std::size_t packet_count = 100;
  Millis packet_lifetime = 100.0;
  Millis inject_interval = 5.0;
  double fault_ratio = 0.0;
  double buffer_fill = 0.0;
  /// Service-time multipliers for LOW, MEDIUM, HIGH.
  std::array<double, 3> rate_multipliers{1.5, 1.0, 0.7};
  std::size_t paths_m = 4;
  std::size_t paths_k = 2;
  Millis horizon = 10000.0;
  /// Include FCS probes in control_packets.
  bool count_probes = true;
  /// Window of the exponentially decaying arrival-rate estimate.
  Millis arrival_window = 20.0;
  /// Wait for an acknowledgement before a hop is declared lost.
  Millis ack_timeout = 2.0;
  bool record_trace = false;
};

/// Throws InvalidInput naming the first field outside its domain.
void validate(const Scenario& s);

struct MetricsRecord {
  std::uint64_t injected = 0;
  std::uint64_t delivered = 0;
  std::uint64_t expired = 0;
  std::uint64_t dropped_no_route = 0;
  std::uint64_t buffer_drops = 0;
  std::uint64_t control_packets = 0;
  std::uint64_t jumps = 0;
  Millis mean_delay = 0.0;
  Millis p95_delay = 0.0;
  double energy_total = 0.0;
  std::vector<std::uint64_t> node_tx;

  [[nodiscard]] double success_ratio() const noexcept {
    return injected == 0 ? 0.0 : static_cast<double>(delivered) / static_cast<double>(injected);
  }
  [[nodiscard]] bool conserved() const noexcept {
    return injected == delivered + expired + dropped_no_route + buffer_drops;
  }
};

enum class Outcome : std::uint8_t { Pending, Delivered, Expired, NoRoute, BufferDrop };

std::string_view to_string(Outcome o) noexcept;

struct PacketOutcome {
  std::uint64_t id = 0;
  Outcome outcome = Outcome::Pending;
  Millis created_at = 0.0;
  Millis deadline = 0.0;
  Millis finished_at = 0.0;
  std::vector<NodeId> hop_trace;
  std::vector<RateClass> rate_trace;
  /// Indices i where hop i -> i+1 was a jump.
  std::vector<std::size_t> jump_hops;
};

struct RunResult {
  MetricsRecord metrics;
  std::vector<PacketOutcome> packets;
  std::uint64_t trace_hash = 0;
  /// One JSON object per line, when Scenario::record_trace is set.
  std::string trace;
};

/// Runs one scenario to completion. Identical inputs give identical results.
RunResult run(const Topology& topo, const Scenario& scenario, std::uint64_t seed);

}  // namespace dmrf
