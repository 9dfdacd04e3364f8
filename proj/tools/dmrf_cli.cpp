#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include "dmrf/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

/// Opens `path` for writing, or returns stdout when the path is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::binary);
    if (!file_) throw std::runtime_error("cannot write '" + path + "'");
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

dmrf::SweepRow single_row(const dmrf::ScenarioConfig& cfg, std::uint64_t seed,
                          const dmrf::MetricsRecord& m) {
  dmrf::SweepRow row;
  row.parameter = "none";
  row.distribution = cfg.distribution;
  row.seed = seed;
  row.protocol = cfg.protocol;
  row.metrics = m;
  return row;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deadline-aware multipath routing simulator"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::string in;
  std::string preset;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run one scenario and print a one-row CSV");
  run->add_option("--config", config, "Scenario YAML file")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out, "CSV output path (default stdout)");

  auto* sweep = app.add_subcommand("sweep", "Run a figure preset sweep");
  sweep->add_option("--config", config, "Base scenario YAML file")->required();
  sweep->add_option("--preset", preset, "fig5|fig6|fig7|fig8|fig9|scale")
      ->required()
      ->check(CLI::IsMember(dmrf::preset_names()));
  sweep->add_option("--out", out, "CSV output path (default stdout)");

  auto* summarize = app.add_subcommand("summarize", "Aggregate a sweep CSV");
  summarize->add_option("--in", in, "Sweep CSV")->required();

  auto* trace = app.add_subcommand("trace", "Run one scenario and write its event trace");
  trace->add_option("--config", config, "Scenario YAML file")->required();
  trace->add_option("--seed", seed, "Override the scenario seed");
  trace->add_option("--out", out, "Trace output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (*run || *trace) {
      const auto cfg = dmrf::parse_config(config);
      const std::uint64_t s = seed.value_or(cfg.seed);
      auto built = dmrf::build(cfg, s);
      built.scenario.record_trace = static_cast<bool>(*trace);
      const auto result = dmrf::run(built.topology, built.scenario, s);
      Output o(out);
      if (*trace) {
        o.stream() << result.trace;
      } else {
        dmrf::write_csv(o.stream(), {single_row(cfg, s, result.metrics)});
      }
    } else if (*sweep) {
      const auto cfg = dmrf::parse_config(config);
      auto spec = dmrf::make_preset(preset, cfg);
      const auto rows = dmrf::run_sweep(spec);
      Output o(out);
      dmrf::write_csv(o.stream(), rows);
    } else if (*summarize) {
      std::ifstream f(in, std::ios::binary);
      if (!f) throw dmrf::InvalidInput("cannot open '" + in + "'");
      const auto summary = dmrf::summarize(dmrf::read_csv(f));
      dmrf::print_summary(std::cout, summary);
      for (const auto& flag : summary.flags) {
        if (!flag.pass) return kRuntime;
      }
    }
  } catch (const dmrf::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
