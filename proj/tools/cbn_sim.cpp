// Command-line driver: run a built-in or configured scenario, write the trace,
// summary and optional plots, or run the throughput benchmark.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cbn/scenario.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Event-driven simulator for a two-node silicon neuron array with AER scan feedback"};

  std::string config_path;
  std::string scenario;
  std::string duration;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool bench = false;
  bool plot = false;

  app.add_option("--config", config_path, "YAML scenario file")->check(CLI::ExistingFile);
  app.add_option("--scenario", scenario, "Built-in scenario; overrides the config's base")
      ->check(CLI::IsMember({"fig3a", "fig3b", "fig3c", "fig3d", "custom"}));
  app.add_option("--duration", duration, "Model time to simulate, e.g. 50ms");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "RNG seed for stimulus jitter and mismatch");
  app.add_option("--threads", threads, "0 runs the serial reference engine, N > 0 uses N OpenMP threads");
  app.add_flag("--bench", bench, "Report throughput instead of writing a trace");
  app.add_flag("--plot", plot, "Write one SVG per traced neuron");
  CLI11_PARSE(app, argc, argv);

  try {
    cbn::ScenarioConfig cfg;
    if (!config_path.empty()) {
      cfg = cbn::load_config_file(config_path);
      if (!scenario.empty() && scenario != cfg.name) {
        // The named scenario provides the stimulus program and controller; the
        // file's electrical and scan settings are kept.
        auto base = cbn::builtin_scenario(scenario);
        base.biases = cfg.biases;
        base.scan_period = cfg.scan_period;
        base.slot_duration = cfg.slot_duration;
        base.scan_buses = cfg.scan_buses;
        base.mismatch = cfg.mismatch;
        base.seed = cfg.seed;
        base.execution = cfg.execution;
        base.threads = cfg.threads;
        cfg = base;
      }
    } else {
      cfg = cbn::builtin_scenario(scenario.empty() ? "fig3a" : scenario);
    }
    if (!duration.empty()) cfg.duration = cbn::parse_time(duration);
    if (seed) cfg.seed = *seed;
    if (threads) {
      cfg.execution = *threads == 0 ? cbn::Execution::serial : cbn::Execution::parallel;
      cfg.threads = *threads;
    }
    cfg.validate();

    fs::create_directories(out_dir);
    if (bench) {
      auto report = cbn::benchmark(cfg);
      auto j = report.to_json();
      j["config"] = cbn::to_json(cfg);
      std::ofstream(fs::path(out_dir) / "bench.json") << j.dump(2) << '\n';
      std::cout << report.to_json().dump(2) << '\n';
      return 0;
    }

    auto result = cbn::run_scenario(cfg);
    cbn::write_trace(result.trace, fs::path(out_dir) / "trace.csv");
    std::ofstream(fs::path(out_dir) / "summary.json") << result.summary_json().dump(2) << '\n';
    if (plot) cbn::write_plots(result.trace, cfg.biases, fs::path(out_dir) / "plots");

    std::cout << "scenario " << cfg.name << ": " << result.summary.n_neurons << " neuron(s), "
              << cbn::format_time(cfg.duration) << " model time, " << result.summary.counts.crossings_up
              << " output spike(s), " << result.summary.counts.resets << " reset(s), "
              << result.summary.wall_seconds << " s wall" << std::endl;
    for (const auto& n : result.summary.neurons) {
      if (n.neuron_id >= 8) break;
      std::printf("  neuron %u: spikes at", n.neuron_id);
      for (auto t : n.spikes) std::printf(" %.4f", cbn::to_seconds(t) * 1e3);
      std::printf(" ms\n");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
