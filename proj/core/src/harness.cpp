#include "dmrf/harness.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace dmrf {

std::string_view to_string(DeployMode m) noexcept {
  return m == DeployMode::UniformGrid ? "uniform" : "random";
}

std::optional<DeployMode> parse_distribution(std::string_view s) noexcept {
  if (s == "uniform") return DeployMode::UniformGrid;
  if (s == "random") return DeployMode::Random;
  return std::nullopt;
}

ScenarioConfig table2() { return ScenarioConfig{}; }

void validate(const ScenarioConfig& c) {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, what);
  };
  require(c.node_count >= 2, "node_count", "must be at least 2");
  require(c.region.width > 0.0 && c.region.height > 0.0, "region", "dimensions must be positive");
  require(c.comm_radius > 0.0, "comm_radius", "must be positive");
  require(c.max_tx_distance >= c.comm_radius, "max_tx_distance", "must be at least comm_radius");
  require(c.bandwidth_kbps > 0.0, "bandwidth_kbps", "must be positive");
  require(c.sigma_ratio >= 0.0, "sigma_ratio", "must be non-negative");
  require(c.buffer_bytes > 0.0, "buffer_bytes", "must be positive");
  require(c.packet_bytes > 0, "packet_bytes", "must be positive");
  require(static_cast<double>(c.packet_bytes) <= c.buffer_bytes, "packet_bytes",
          "must not exceed buffer_bytes");
  require(!c.packet_lifetime_ms || *c.packet_lifetime_ms > 0.0, "packet_lifetime_ms",
          "must be positive");
  require(c.lifetime_factor > 0.0, "lifetime_factor", "must be positive");
  require(c.inject_interval_ms > 0.0, "inject_interval_ms", "must be positive");
  require(c.fault_ratio >= 0.0 && c.fault_ratio <= 1.0, "fault_ratio", "must lie in [0,1]");
  require(c.buffer_fill >= 0.0 && c.buffer_fill <= 1.0, "buffer_fill", "must lie in [0,1]");
  require(c.void_radius >= 0.0, "void_radius", "must be non-negative");
  require(c.paths_m >= 1, "M", "must be at least 1");
  require(c.paths_k >= 1 && c.paths_k <= c.paths_m, "k", "must lie in [1, M]");
  require(c.params.theta_jump > 0.0 && c.params.theta_jump < 1.0, "theta_jump",
          "must lie in (0,1)");
  require(c.params.theta_cong > 0.0 && c.params.theta_cong <= 1.0, "theta_cong",
          "must lie in (0,1]");
  require(c.params.cong_horizon > 0.0, "congestion_horizon_ms", "must be positive");
  require(c.params.cong_hysteresis >= 0.0 && c.params.cong_hysteresis < c.params.theta_cong,
          "congestion_hysteresis", "must lie in [0, theta_cong)");
  require(c.params.probe_period > 0.0, "probe_period_ms", "must be positive");
  require(c.params.probe_timeout > 0.0 && c.params.probe_timeout < c.params.probe_period,
          "probe_timeout_ms", "must be positive and shorter than probe_period_ms");
  require(c.params.confidence_step > 0 && c.params.confidence_step <= Confidence::kMax,
          "confidence_step", "must lie in (0,100]");
  require(c.params.confidence_threshold > 0 &&
              c.params.confidence_threshold <= Confidence::kMax,
          "confidence_threshold", "must lie in (0,100]");
  for (double m : c.rate_multipliers) {
    require(m > 0.0, "rate_multipliers", "entries must be positive");
  }
  require(c.eps_elec >= 0.0, "eps_elec", "must be non-negative");
  require(c.eps_amp >= 0.0, "eps_amp", "must be non-negative");
  require(c.horizon_ms > 0.0, "horizon_ms", "must be positive");
  require(c.repetitions >= 1, "repetitions", "must be at least 1");
}

namespace {

template <typename T>
T scalar(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw ConfigError(key, "expected a scalar value");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(key, "cannot interpret '" + n.Scalar() + "'");
  }
}

double number(const YAML::Node& n, const std::string& key) {
  const double v = scalar<double>(n, key);
  if (!std::isfinite(v)) throw ConfigError(key, "must be finite");
  return v;
}

std::uint64_t count(const YAML::Node& n, const std::string& key) {
  // Parse signed first so "-1" is reported instead of wrapping around.
  const auto v = scalar<long long>(n, key);
  if (v < 0) throw ConfigError(key, "must be non-negative");
  return static_cast<std::uint64_t>(v);
}

std::uint64_t seed_value(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw ConfigError(key, "expected a scalar value");
  const std::string& s = n.Scalar();
  if (s.empty() || s[0] == '-') throw ConfigError(key, "must be a non-negative integer");
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used, 0);
    if (used != s.size()) throw ConfigError(key, "must be a non-negative integer");
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError(key, "must be a non-negative integer");
  }
}

void expect_map(const YAML::Node& n, const std::string& key) {
  if (!n.IsMap()) throw ConfigError(key, "expected a mapping");
}

/// Visits every key of a mapping, rejecting the ones the handler does not know.
template <typename F>
void each_key(const YAML::Node& map, const std::string& prefix, F&& handle) {
  for (const auto& kv : map) {
    const std::string name = kv.first.as<std::string>();
    const std::string key = prefix.empty() ? name : prefix + "." + name;
    if (!handle(name, key, kv.second)) throw ConfigError(key, "unknown key");
  }
}

void apply_yaml(ScenarioConfig& c, const YAML::Node& root) {
  each_key(root, "", [&](const std::string& name, const std::string& key, const YAML::Node& v) {
    if (name == "preset") {
      const auto p = scalar<std::string>(v, key);
      if (p != "table2") throw ConfigError(key, "unknown preset '" + p + "'");
    } else if (name == "node_count") {
      c.node_count = count(v, key);
    } else if (name == "region") {
      expect_map(v, key);
      each_key(v, key, [&](const std::string& n2, const std::string& k2, const YAML::Node& v2) {
        if (n2 == "width") c.region.width = number(v2, k2);
        else if (n2 == "height") c.region.height = number(v2, k2);
        else return false;
        return true;
      });
    } else if (name == "distribution") {
      const auto s = scalar<std::string>(v, key);
      const auto d = parse_distribution(s);
      if (!d) throw ConfigError(key, "expected 'uniform' or 'random', got '" + s + "'");
      c.distribution = *d;
    } else if (name == "comm_radius") {
      c.comm_radius = number(v, key);
    } else if (name == "max_tx_distance") {
      c.max_tx_distance = number(v, key);
    } else if (name == "bandwidth_kbps") {
      c.bandwidth_kbps = number(v, key);
    } else if (name == "sigma_ratio") {
      c.sigma_ratio = number(v, key);
    } else if (name == "buffer_bytes") {
      c.buffer_bytes = number(v, key);
    } else if (name == "packet_bytes") {
      const auto b = count(v, key);
      if (b > 1U << 20U) throw ConfigError(key, "unreasonably large");
      c.packet_bytes = static_cast<std::uint32_t>(b);
    } else if (name == "packet_count") {
      c.packet_count = count(v, key);
    } else if (name == "packet_lifetime_ms") {
      c.packet_lifetime_ms = number(v, key);
    } else if (name == "lifetime_factor") {
      c.lifetime_factor = number(v, key);
    } else if (name == "inject_interval_ms") {
      c.inject_interval_ms = number(v, key);
    } else if (name == "protocol") {
      const auto s = scalar<std::string>(v, key);
      const auto p = parse_protocol(s);
      if (!p) throw ConfigError(key, "unknown protocol '" + s + "'");
      c.protocol = *p;
    } else if (name == "fault_ratio") {
      c.fault_ratio = number(v, key);
    } else if (name == "buffer_fill") {
      c.buffer_fill = number(v, key);
    } else if (name == "void_center") {
      if (!v.IsSequence() || v.size() != 2) throw ConfigError(key, "expected [x, y]");
      c.void_center = {number(v[0], key), number(v[1], key)};
    } else if (name == "void_radius") {
      c.void_radius = number(v, key);
    } else if (name == "M") {
      c.paths_m = count(v, key);
    } else if (name == "k") {
      c.paths_k = count(v, key);
    } else if (name == "theta_jump") {
      c.params.theta_jump = number(v, key);
    } else if (name == "theta_cong") {
      c.params.theta_cong = number(v, key);
    } else if (name == "congestion_horizon_ms") {
      c.params.cong_horizon = number(v, key);
    } else if (name == "congestion_hysteresis") {
      c.params.cong_hysteresis = number(v, key);
    } else if (name == "probe") {
      expect_map(v, key);
      each_key(v, key, [&](const std::string& n2, const std::string& k2, const YAML::Node& v2) {
        if (n2 == "period_ms") c.params.probe_period = number(v2, k2);
        else if (n2 == "timeout_ms") c.params.probe_timeout = number(v2, k2);
        else if (n2 == "confidence_step") c.params.confidence_step = static_cast<int>(count(v2, k2));
        else if (n2 == "confidence_threshold")
          c.params.confidence_threshold = static_cast<int>(count(v2, k2));
        else if (n2 == "count") c.count_probes = scalar<bool>(v2, k2);
        else return false;
        return true;
      });
    } else if (name == "rate_multipliers") {
      expect_map(v, key);
      each_key(v, key, [&](const std::string& n2, const std::string& k2, const YAML::Node& v2) {
        if (n2 == "low") c.rate_multipliers[0] = number(v2, k2);
        else if (n2 == "medium") c.rate_multipliers[1] = number(v2, k2);
        else if (n2 == "high") c.rate_multipliers[2] = number(v2, k2);
        else return false;
        return true;
      });
    } else if (name == "energy") {
      expect_map(v, key);
      each_key(v, key, [&](const std::string& n2, const std::string& k2, const YAML::Node& v2) {
        if (n2 == "eps_elec") c.eps_elec = number(v2, k2);
        else if (n2 == "eps_amp") c.eps_amp = number(v2, k2);
        else return false;
        return true;
      });
    } else if (name == "horizon_ms") {
      c.horizon_ms = number(v, key);
    } else if (name == "seed") {
      c.seed = seed_value(v, key);
    } else if (name == "repetitions") {
      c.repetitions = count(v, key);
    } else {
      return false;
    }
    return true;
  });
}

}  // namespace

ScenarioConfig parse_config_text(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError("config", std::string("malformed YAML: ") + e.what());
  }
  if (!root || root.IsNull()) throw ConfigError("config", "empty document");
  if (!root.IsMap()) throw ConfigError("config", "top level must be a mapping");
  ScenarioConfig cfg = table2();
  apply_yaml(cfg, root);
  validate(cfg);
  return cfg;
}

ScenarioConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_parameter(ScenarioConfig& cfg, std::string_view name, double value) {
  if (name == "fault_ratio") cfg.fault_ratio = value;
  else if (name == "buffer_fill") cfg.buffer_fill = value;
  else if (name == "void_radius") cfg.void_radius = value;
  else if (name == "node_count") cfg.node_count = static_cast<std::size_t>(std::llround(value));
  else if (name == "packet_lifetime_ms") cfg.packet_lifetime_ms = value;
  else if (name == "lifetime_factor") cfg.lifetime_factor = value;
  else if (name == "theta_jump") cfg.params.theta_jump = value;
  else if (name == "theta_cong") cfg.params.theta_cong = value;
  else if (name == "inject_interval_ms") cfg.inject_interval_ms = value;
  else if (name == "packet_count") cfg.packet_count = static_cast<std::size_t>(std::llround(value));
  else throw ConfigError(std::string(name), "not a sweepable parameter");
}

constexpr std::uint64_t kMaxRedraws = 100;

BuiltScenario build(const ScenarioConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Topology intact = deploy(cfg.node_count, cfg.region, cfg.distribution, seed, cfg.comm_radius,
                           cfg.max_tx_distance);
  // A random layout that strands the source is redrawn; the sweep should
  // measure routing, not partitioned deployments.
  for (std::uint64_t attempt = 1;
       cfg.distribution == DeployMode::Random && attempt <= kMaxRedraws &&
       !std::isfinite(shortest_delay(intact, intact.source(), 1.0));
       ++attempt) {
    intact = deploy(cfg.node_count, cfg.region, cfg.distribution, point_seed(seed, 0, attempt),
                    cfg.comm_radius, cfg.max_tx_distance);
  }
  Scenario s;
  s.protocol = cfg.protocol;
  s.radio = make_radio(cfg.packet_bytes * 8U, cfg.bandwidth_kbps, cfg.sigma_ratio,
                       cfg.max_tx_distance);
  s.radio.eps_elec = cfg.eps_elec;
  s.radio.eps_amp = cfg.eps_amp;
  s.params = cfg.params;
  s.buffer_bytes = cfg.buffer_bytes;
  s.packet_bytes = cfg.packet_bytes;
  s.packet_count = cfg.packet_count;
  s.inject_interval = cfg.inject_interval_ms;
  s.fault_ratio = cfg.fault_ratio;
  s.buffer_fill = cfg.buffer_fill;
  s.rate_multipliers = cfg.rate_multipliers;
  s.paths_m = cfg.paths_m;
  s.paths_k = cfg.paths_k;
  s.horizon = cfg.horizon_ms;
  s.count_probes = cfg.count_probes;
  if (cfg.packet_lifetime_ms) {
    s.packet_lifetime = *cfg.packet_lifetime_ms;
  } else {
    const Millis t = shortest_delay(intact, intact.source(), s.radio.mu);
    if (!std::isfinite(t)) {
      throw ConfigError("lifetime_factor", "source cannot reach the sink; set packet_lifetime_ms");
    }
    s.packet_lifetime = cfg.lifetime_factor * t;
  }
  if (cfg.void_radius > 0.0) {
    return {carve_void(intact, cfg.void_center, cfg.void_radius), s};
  }
  return {std::move(intact), s};
}

RunResult run_config(const ScenarioConfig& cfg, std::uint64_t seed) {
  const auto built = build(cfg, seed);
  return run(built.topology, built.scenario, seed);
}

std::uint64_t point_seed(std::uint64_t base, std::uint64_t value_index, std::uint64_t repetition) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30U)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27U)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31U);
  };
  return mix(mix(mix(base) ^ value_index) ^ repetition);
}

std::vector<std::string> preset_names() { return {"fig5", "fig6", "fig7", "fig8", "fig9", "scale"}; }

SweepSpec make_preset(std::string_view name, const ScenarioConfig& base) {
  SweepSpec s;
  s.base = base;
  s.repetitions = base.repetitions;
  s.distributions = {DeployMode::UniformGrid};
  const std::vector<ProtocolKind> all{ProtocolKind::Dmrf, ProtocolKind::GreedyMinDelay,
                                      ProtocolKind::GreedyMaxRate, ProtocolKind::Bypass};
  if (name == "fig5") {
    s.parameter = "fault_ratio";
    s.values = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    s.protocols = {ProtocolKind::Dmrf, ProtocolKind::GreedyMinDelay, ProtocolKind::GreedyMaxRate};
    s.distributions = {DeployMode::UniformGrid, DeployMode::Random};
  } else if (name == "fig6") {
    s.parameter = "buffer_fill";
    s.values = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    s.protocols = {ProtocolKind::Dmrf, ProtocolKind::GreedyMinDelay, ProtocolKind::GreedyMaxRate};
    s.distributions = {DeployMode::UniformGrid, DeployMode::Random};
  } else if (name == "fig7" || name == "fig8" || name == "fig9") {
    s.parameter = "void_radius";
    s.values = {0, 1, 2, 3, 4, 5, 6, 7, 8};
    s.protocols = all;
  } else if (name == "scale") {
    s.parameter = "node_count";
    s.values = {100, 200, 400};
    s.protocols = {ProtocolKind::Dmrf};
    s.scale_region = true;
  } else {
    throw ConfigError("preset", "unknown preset '" + std::string(name) + "'");
  }
  return s;
}

void validate(const SweepSpec& spec) {
  if (spec.values.empty()) throw ConfigError("values", "sweep needs at least one value");
  if (spec.repetitions < 1) throw ConfigError("repetitions", "must be at least 1");
  if (spec.protocols.empty()) throw ConfigError("protocol", "sweep needs at least one protocol");
  if (spec.distributions.empty()) {
    throw ConfigError("distribution", "sweep needs at least one distribution");
  }
  ScenarioConfig probe = spec.base;
  for (double v : spec.values) {
    apply_parameter(probe, spec.parameter, v);
    validate(probe);
  }
}

std::size_t default_workers() {
  if (const char* env = std::getenv("DMRF_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

std::vector<SweepPoint> expand(const SweepSpec& spec) {
  validate(spec);
  std::vector<SweepPoint> points;
  for (std::size_t vi = 0; vi < spec.values.size(); ++vi) {
    const double value = spec.values[vi];
    ScenarioConfig cfg = spec.base;
    apply_parameter(cfg, spec.parameter, value);
    if (spec.scale_region && spec.parameter == "node_count") {
      // Scale by lattice intervals, not sqrt(N), so the grid spacing (and
      // with it the neighbor degree) matches the base deployment exactly.
      auto intervals = [](double count) { return std::ceil(std::sqrt(count)) - 1.0; };
      const double f = intervals(value) / intervals(static_cast<double>(spec.base.node_count));
      cfg.region.width = spec.base.region.width * f;
      cfg.region.height = spec.base.region.height * f;
    }
    for (std::size_t r = 0; r < spec.repetitions; ++r) {
      const std::uint64_t seed = point_seed(spec.base.seed, vi, r);
      for (auto d : spec.distributions) {
        for (auto p : spec.protocols) {
          SweepPoint pt;
          pt.config = cfg;
          pt.config.distribution = d;
          pt.config.protocol = p;
          pt.row.parameter = spec.parameter;
          pt.row.value = value;
          pt.row.distribution = d;
          pt.row.repetition = r;
          pt.row.seed = seed;
          pt.row.protocol = p;
          points.push_back(std::move(pt));
        }
      }
    }
  }
  return points;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, std::size_t workers) {
  const auto tasks = expand(spec);
  std::vector<SweepRow> rows(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  std::string error;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || failed.load()) return;
      const SweepPoint& t = tasks[i];
      try {
        rows[i] = t.row;
        rows[i].metrics = run_config(t.config, t.row.seed).metrics;
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mu);
        if (!failed.exchange(true)) {
          std::ostringstream os;
          os << t.row.parameter << "=" << t.row.value << " repetition " << t.row.repetition
             << " " << to_string(t.row.distribution) << " " << to_string(t.row.protocol)
             << " (seed " << t.row.seed << "): " << e.what();
          error = os.str();
        }
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, tasks.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failed) throw std::runtime_error("sweep point failed: " + error);
  return rows;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Splits one RFC 4180 record; returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string cur;
  bool quoted = false;
  bool after_quote = false;
  for (;;) {
    const int ch = in.get();
    if (ch == std::char_traits<char>::eof()) {
      if (quoted) throw InvalidInput("csv: unterminated quoted field");
      fields.push_back(cur);
      return true;
    }
    const char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get();
          cur += '"';
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        cur += c;
      }
      continue;
    }
    if (c == '"' && cur.empty() && !after_quote) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
      after_quote = false;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && in.peek() == '\n') in.get();
      fields.push_back(cur);
      return true;
    } else {
      if (after_quote) throw InvalidInput("csv: text after closing quote");
      cur += c;
    }
  }
}

double parse_number(const std::string& s, const char* column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw InvalidInput(std::string("csv: bad number in column ") + column + ": '" + s + "'");
  }
}

std::uint64_t parse_uint(const std::string& s, const char* column) {
  if (s.empty() || s[0] == '-') {
    throw InvalidInput(std::string("csv: bad integer in column ") + column + ": '" + s + "'");
  }
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw InvalidInput(std::string("csv: bad integer in column ") + column + ": '" + s + "'");
  }
}

}  // namespace

std::vector<std::string> csv_header() {
  return {"parameter",     "value",         "distribution",     "repetition",
          "seed",          "protocol",      "injected",         "delivered",
          "expired",       "dropped_no_route", "buffer_drops",  "control_packets",
          "jumps",         "mean_delay",    "p95_delay",        "energy_total",
          "node_tx"};
}

void write_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  const auto header = csv_header();
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    std::string tx;
    for (std::size_t i = 0; i < m.node_tx.size(); ++i) {
      if (i) tx += ';';
      tx += std::to_string(m.node_tx[i]);
    }
    const std::vector<std::string> fields{
        r.parameter,
        fmt_double(r.value),
        std::string(to_string(r.distribution)),
        std::to_string(r.repetition),
        std::to_string(r.seed),
        std::string(to_string(r.protocol)),
        std::to_string(m.injected),
        std::to_string(m.delivered),
        std::to_string(m.expired),
        std::to_string(m.dropped_no_route),
        std::to_string(m.buffer_drops),
        std::to_string(m.control_packets),
        std::to_string(m.jumps),
        fmt_double(m.mean_delay),
        fmt_double(m.p95_delay),
        fmt_double(m.energy_total),
        tx};
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << quote(fields[i]);
    out << "\n";
  }
}

std::vector<SweepRow> read_csv(std::istream& in) {
  std::vector<std::string> f;
  if (!read_record(in, f)) throw InvalidInput("csv: empty input");
  if (f != csv_header()) throw InvalidInput("csv: unexpected header");
  std::vector<SweepRow> rows;
  while (read_record(in, f)) {
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != csv_header().size()) {
      throw InvalidInput("csv: row " + std::to_string(rows.size() + 1) + " has " +
                         std::to_string(f.size()) + " fields");
    }
    SweepRow r;
    r.parameter = f[0];
    r.value = parse_number(f[1], "value");
    const auto d = parse_distribution(f[2]);
    if (!d) throw InvalidInput("csv: bad distribution '" + f[2] + "'");
    r.distribution = *d;
    r.repetition = parse_uint(f[3], "repetition");
    r.seed = parse_uint(f[4], "seed");
    const auto p = parse_protocol(f[5]);
    if (!p) throw InvalidInput("csv: bad protocol '" + f[5] + "'");
    r.protocol = *p;
    auto& m = r.metrics;
    m.injected = parse_uint(f[6], "injected");
    m.delivered = parse_uint(f[7], "delivered");
    m.expired = parse_uint(f[8], "expired");
    m.dropped_no_route = parse_uint(f[9], "dropped_no_route");
    m.buffer_drops = parse_uint(f[10], "buffer_drops");
    m.control_packets = parse_uint(f[11], "control_packets");
    m.jumps = parse_uint(f[12], "jumps");
    m.mean_delay = parse_number(f[13], "mean_delay");
    m.p95_delay = parse_number(f[14], "p95_delay");
    m.energy_total = parse_number(f[15], "energy_total");
    if (!f[16].empty()) {
      std::stringstream ss(f[16]);
      std::string item;
      while (std::getline(ss, item, ';')) m.node_tx.push_back(parse_uint(item, "node_tx"));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

Stat stat_of(const std::vector<double>& xs) {
  // Welford's update: identical samples give an exact mean and zero spread.
  Stat s;
  double m2 = 0.0;
  double k = 0.0;
  for (double x : xs) {
    k += 1.0;
    const double delta = x - s.mean;
    s.mean += delta / k;
    m2 += delta * (x - s.mean);
  }
  if (xs.size() > 1) s.stddev = std::sqrt(m2 / (k - 1.0));
  return s;
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

const SummaryLine* find_line(const std::vector<SummaryLine>& lines, double value, DeployMode d,
                             ProtocolKind p) {
  for (const auto& l : lines) {
    if (l.value == value && l.distribution == d && l.protocol == p) return &l;
  }
  return nullptr;
}

void void_flags(const Summary& s, std::vector<Flag>& flags) {
  const auto d = DeployMode::UniformGrid;
  if (const auto* l = find_line(s.lines, 7.0, d, ProtocolKind::Dmrf)) {
    flags.push_back({"DMRF success ratio >= 0.90 at void radius 7",
                     l->success_ratio.mean >= 0.90, "mean " + fixed(l->success_ratio.mean)});
  }
  for (auto p : {ProtocolKind::GreedyMinDelay, ProtocolKind::GreedyMaxRate}) {
    bool any = false;
    bool ok = true;
    std::string detail;
    for (const auto& l : s.lines) {
      if (l.protocol != p || l.distribution != d || l.value < 7.0) continue;
      any = true;
      ok = ok && l.success_ratio.mean <= 0.05;
      detail += "r" + fixed(l.value, 0) + "=" + fixed(l.success_ratio.mean) + " ";
    }
    if (any) {
      flags.push_back({std::string(to_string(p)) + " success ratio <= 0.05 at void radius >= 7",
                       ok, detail});
    }
  }
  if (const auto* base = find_line(s.lines, 0.0, d, ProtocolKind::Dmrf)) {
    double worst = 0.0;
    bool any = false;
    for (const auto& l : s.lines) {
      if (l.protocol != ProtocolKind::Dmrf || l.distribution != d || l.value > 7.0) continue;
      if (l.delivered.mean <= 0.0 || base->mean_delay.mean <= 0.0) continue;
      any = true;
      worst = std::max(worst, std::abs(l.mean_delay.mean / base->mean_delay.mean - 1.0));
    }
    if (any) {
      flags.push_back({"DMRF mean delay changes < 25% over void radius 0..7", worst < 0.25,
                       "max relative change " + fixed(worst)});
    }
  }
  const auto* b0 = find_line(s.lines, 0.0, d, ProtocolKind::Bypass);
  const auto* b7 = find_line(s.lines, 7.0, d, ProtocolKind::Bypass);
  if (b0 != nullptr && b7 != nullptr && b0->mean_delay.mean > 0.0) {
    const double growth = b7->mean_delay.mean / b0->mean_delay.mean - 1.0;
    flags.push_back({"BYPASS mean delay at void radius 7 exceeds radius 0 by > 50%", growth > 0.5,
                     "growth " + fixed(growth)});
  }
}

void fill_flags(const Summary& s, std::vector<Flag>& flags) {
  for (auto d : {DeployMode::UniformGrid, DeployMode::Random}) {
    bool any = false;
    bool ok = true;
    std::string detail;
    for (const auto& l : s.lines) {
      if (l.protocol != ProtocolKind::Dmrf || l.distribution != d) continue;
      const auto* g = find_line(s.lines, l.value, d, ProtocolKind::GreedyMinDelay);
      if (g == nullptr) continue;
      any = true;
      const bool point_ok = l.value >= 0.6 - 1e-9 ? l.delivered.mean > g->delivered.mean
                                                  : l.delivered.mean >= g->delivered.mean;
      ok = ok && point_ok;
      detail += fixed(l.value, 1) + ":" + fixed(l.delivered.mean, 1) + "/" +
                fixed(g->delivered.mean, 1) + " ";
    }
    if (any) {
      flags.push_back({"DMRF delivered >= GREEDY_MIN_DELAY at every fill, > at fill >= 0.6 (" +
                           std::string(to_string(d)) + ")",
                       ok, detail});
    }
  }
}

void scale_flags(const Summary& s, std::vector<Flag>& flags) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& l : s.lines) {
    if (l.protocol != ProtocolKind::Dmrf) continue;
    xs.push_back(l.value);
    ys.push_back(l.control_packets.mean);
  }
  if (xs.size() < 2) return;
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / n;
    my += ys[i] / n;
  }
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double r2 = (sxx > 0.0 && syy > 0.0) ? sxy * sxy / (sxx * syy) : 1.0;
  flags.push_back({"DMRF control packets linear in node count (R^2 >= 0.9)", r2 >= 0.9,
                   "R^2 " + fixed(r2, 4)});
  const auto lo = std::min_element(xs.begin(), xs.end()) - xs.begin();
  const auto hi = std::max_element(xs.begin(), xs.end()) - xs.begin();
  if (ys[lo] > 0.0 && xs[hi] / xs[lo] >= 3.99 && xs[hi] / xs[lo] <= 4.01) {
    const double ratio = ys[hi] / ys[lo];
    flags.push_back({"DMRF control packets ratio largest/smallest N <= 5", ratio <= 5.0,
                     "ratio " + fixed(ratio)});
  }
}

}  // namespace

Summary summarize(const std::vector<SweepRow>& rows) {
  Summary s;
  struct Acc {
    std::vector<double> success, delivered, delay, control, energy;
    std::size_t runs = 0;
  };
  using Key = std::tuple<std::string, double, int, int>;
  std::map<Key, Acc> groups;
  bool conserved = true;
  for (const auto& r : rows) {
    auto& a = groups[Key{r.parameter, r.value, static_cast<int>(r.distribution),
                         static_cast<int>(r.protocol)}];
    a.runs += 1;
    a.success.push_back(r.metrics.success_ratio());
    a.delivered.push_back(static_cast<double>(r.metrics.delivered));
    if (r.metrics.delivered > 0) a.delay.push_back(r.metrics.mean_delay);
    a.control.push_back(static_cast<double>(r.metrics.control_packets));
    a.energy.push_back(r.metrics.energy_total);
    conserved = conserved && r.metrics.conserved();
  }
  for (const auto& [k, a] : groups) {
    SummaryLine l;
    l.parameter = std::get<0>(k);
    l.value = std::get<1>(k);
    l.distribution = static_cast<DeployMode>(std::get<2>(k));
    l.protocol = static_cast<ProtocolKind>(std::get<3>(k));
    l.runs = a.runs;
    l.success_ratio = stat_of(a.success);
    l.delivered = stat_of(a.delivered);
    l.mean_delay = stat_of(a.delay);
    l.control_packets = stat_of(a.control);
    l.energy_total = stat_of(a.energy);
    s.lines.push_back(std::move(l));
  }
  if (!rows.empty()) {
    s.flags.push_back({"every run conserves packets", conserved, ""});
    std::set<std::string> params;
    for (const auto& r : rows) params.insert(r.parameter);
    if (params.size() == 1) {
      const std::string& p = *params.begin();
      if (p == "void_radius") void_flags(s, s.flags);
      if (p == "buffer_fill") fill_flags(s, s.flags);
      if (p == "node_count") scale_flags(s, s.flags);
    }
  }
  return s;
}

void print_summary(std::ostream& out, const Summary& s) {
  out << "parameter,value,distribution,protocol,runs,success_mean,success_sd,delivered_mean,"
         "delivered_sd,delay_mean,delay_sd,control_mean,control_sd,energy_mean,energy_sd\n";
  for (const auto& l : s.lines) {
    out << l.parameter << ',' << fmt_double(l.value) << ',' << to_string(l.distribution) << ','
        << to_string(l.protocol) << ',' << l.runs << ',' << fixed(l.success_ratio.mean, 4) << ','
        << fixed(l.success_ratio.stddev, 4) << ',' << fixed(l.delivered.mean, 2) << ','
        << fixed(l.delivered.stddev, 2) << ',' << fixed(l.mean_delay.mean, 3) << ','
        << fixed(l.mean_delay.stddev, 3) << ',' << fixed(l.control_packets.mean, 1) << ','
        << fixed(l.control_packets.stddev, 1) << ',' << fmt_double(l.energy_total.mean) << ','
        << fmt_double(l.energy_total.stddev) << '\n';
  }
  for (const auto& f : s.flags) {
    out << (f.pass ? "PASS " : "FAIL ") << f.name;
    if (!f.detail.empty()) out << "  [" << f.detail << "]";
    out << '\n';
  }
}

}  // namespace dmrf
