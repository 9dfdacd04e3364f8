#pragma once

// Scenario files, parameter sweeps, CSV results and their summaries.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmrf/engine.hpp"
#include "dmrf/topology.hpp"

namespace dmrf {

/// Configuration problem; `key()` names the offending field.
class ConfigError : public InvalidInput {
 public:
  ConfigError(std::string key, const std::string& message)
      : InvalidInput(key + ": " + message), key_(std::move(key)) {}
  [[nodiscard]] const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

struct ScenarioConfig {
  std::size_t node_count = 400;
  Region region{};
  DeployMode distribution = DeployMode::UniformGrid;
  double comm_radius = 1.5;
  double max_tx_distance = 30.0;
  double bandwidth_kbps = 200.0;  // numerically equal to bits per ms
  double sigma_ratio = 0.15;
  double buffer_bytes = 100.0;
  std::uint32_t packet_bytes = 32;
  std::size_t packet_count = 100;
  /// Fixed lifetime; when unset the lifetime is lifetime_factor times the
  /// source's shortest-path estimate on the deployment before any void.
  std::optional<Millis> packet_lifetime_ms;
  double lifetime_factor = 3.0;
  Millis inject_interval_ms = 5.0;
  ProtocolKind protocol = ProtocolKind::Dmrf;
  double fault_ratio = 0.0;
  double buffer_fill = 0.0;
  Point void_center{10.0, 10.0};
  double void_radius = 0.0;
  std::size_t paths_m = 4;
  std::size_t paths_k = 2;
  ProtocolParams params{};
  std::array<double, 3> rate_multipliers{1.5, 1.0, 0.7};
  double eps_elec = 50e-9;
  double eps_amp = 100e-12;
  bool count_probes = true;
  Millis horizon_ms = 10000.0;
  std::uint64_t seed = 1;
  /// Seeded runs per sweep point.
  std::size_t repetitions = 10;
};

/// The simulation parameters of the reference deployment (400 nodes, 20 m x 20 m,
/// 200 Kb/s, 100 B buffers, 32 B packets, 30 m maximum range).
ScenarioConfig table2();

/// Throws ConfigError naming the first field outside its domain.
void validate(const ScenarioConfig& cfg);

ScenarioConfig parse_config_text(std::string_view text);
ScenarioConfig parse_config(const std::filesystem::path& path);

/// Sets a numeric field by name (the sweepable parameters).
void apply_parameter(ScenarioConfig& cfg, std::string_view name, double value);

struct BuiltScenario {
  Topology topology;
  Scenario scenario;
};

/// Deploys (seeded when random, redrawn while the source cannot reach the
/// sink), carves the void and resolves the lifetime.
BuiltScenario build(const ScenarioConfig& cfg, std::uint64_t seed);

RunResult run_config(const ScenarioConfig& cfg, std::uint64_t seed);

/// splitmix64 finalizer over (base, value index, repetition).
std::uint64_t point_seed(std::uint64_t base, std::uint64_t value_index, std::uint64_t repetition);

struct SweepSpec {
  std::string parameter;
  std::vector<double> values;
  ScenarioConfig base;
  /// Seeded runs per sweep point.
  std::size_t repetitions = 10;
  std::vector<ProtocolKind> protocols;
  std::vector<DeployMode> distributions;
  /// Keep the deployment spacing fixed when sweeping node_count.
  bool scale_region = false;
};

std::vector<std::string> preset_names();
/// Figure presets fig5..fig9 and the node-count scaling sweep "scale".
SweepSpec make_preset(std::string_view name, const ScenarioConfig& base);
void validate(const SweepSpec& spec);

struct SweepRow {
  std::string parameter;
  double value = 0.0;
  DeployMode distribution = DeployMode::UniformGrid;
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  ProtocolKind protocol = ProtocolKind::Dmrf;
  MetricsRecord metrics;
};

/// One run of a sweep: its resolved configuration and the row metadata
/// (metrics left empty).
struct SweepPoint {
  ScenarioConfig config;
  SweepRow row;
};

/// Points in output order: (value, repetition, distribution, protocol).
std::vector<SweepPoint> expand(const SweepSpec& spec);

/// Worker count from DMRF_WORKERS, else the hardware concurrency.
std::size_t default_workers();

/// Rows ordered by (value, repetition, distribution, protocol) whatever the worker count.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, std::size_t workers = default_workers());

std::vector<std::string> csv_header();
void write_csv(std::ostream& out, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_csv(std::istream& in);

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;
};

struct SummaryLine {
  std::string parameter;
  double value = 0.0;
  DeployMode distribution = DeployMode::UniformGrid;
  ProtocolKind protocol = ProtocolKind::Dmrf;
  std::size_t runs = 0;
  Stat success_ratio;
  Stat delivered;
  Stat mean_delay;
  Stat control_packets;
  Stat energy_total;
};

struct Flag {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Summary {
  std::vector<SummaryLine> lines;
  std::vector<Flag> flags;
};

Summary summarize(const std::vector<SweepRow>& rows);
void print_summary(std::ostream& out, const Summary& s);

std::string_view to_string(DeployMode m) noexcept;
std::optional<DeployMode> parse_distribution(std::string_view s) noexcept;

}  // namespace dmrf
