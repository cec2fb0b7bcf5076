#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cbn/controller.hpp"
#include "cbn/engine.hpp"
#include "cbn/neuron.hpp"
#include "cbn/time.hpp"

namespace cbn {

using IdRanges = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

struct ControllerOverride {
  IdRanges neurons;
  ControllerMode mode;
};

struct TraceOptions {
  IdRanges neurons;
  Picoseconds stride{1'000'000};
};

// Relative standard deviation of the multiplicative Gaussian factor per parameter.
struct MismatchConfig {
  double i_n0 = 0.0;
  double i_p0 = 0.0;
  double c_syn = 0.0;
  double c_mem = 0.0;
  double i_s = 0.0;
  std::optional<std::uint64_t> seed;  // falls back to ScenarioConfig::seed

  bool any() const { return i_n0 > 0 || i_p0 > 0 || c_syn > 0 || c_mem > 0 || i_s > 0; }
};

struct ScenarioConfig {
  std::string name = "custom";
  BiasConfig biases;
  Picoseconds scan_period{1'000'000'000};
  Picoseconds slot_duration{32'000};
  std::uint32_t scan_buses = 1;
  std::uint32_t n_neurons = 1;
  ControllerMode controller = Passive{};
  std::vector<ControllerOverride> controller_overrides;
  Picoseconds feedback_latency{0};
  std::vector<StimulusTrain> stimulus;
  Picoseconds duration{10'000'000'000};
  TraceOptions trace;
  MismatchConfig mismatch;
  std::uint64_t seed = 1;
  Execution execution = Execution::parallel;
  int threads = 0;

  // Throws ConfigError naming the violated invariant.
  void validate() const;
  ControllerMode mode_of(std::uint32_t neuron_id) const;
  bool traced(std::uint32_t neuron_id) const;
};

// Spacing between the four pulses of the built-in inhibition scenario.
inline constexpr Picoseconds kFig3dSpacing{50'000'000};

// fig3a, fig3b, fig3c, fig3d or custom. Throws ConfigError for other names.
ScenarioConfig builtin_scenario(std::string_view name);

// Parses a YAML document (JSON is accepted too). A `scenario:` key selects the
// built-in base; remaining keys override it. Errors carry the line number.
ScenarioConfig load_config(std::string_view text);
ScenarioConfig load_config_file(const std::filesystem::path& path);

nlohmann::json to_json(const ScenarioConfig& cfg);

std::vector<BiasConfig> apply_mismatch(const ScenarioConfig& cfg);

struct NeuronSummary {
  std::uint32_t neuron_id = 0;
  std::vector<Picoseconds> spikes;
  std::vector<CrossingRecord> crossings;
  std::vector<Picoseconds> active_samples;
  std::vector<ResetRecord> resets;
  NeuronState final_state;
  EventCounts counts;
};

struct RunSummary {
  std::string scenario;
  Picoseconds duration{0};
  std::uint32_t n_neurons = 0;
  std::vector<NeuronSummary> neurons;  // empty when per-event records are off
  EventCounts counts;
  std::size_t peak_queue_depth = 0;
  double wall_seconds = 0.0;
  double throughput = 0.0;  // neurons * model seconds per wall second
};

struct RunResult {
  std::vector<TraceRow> trace;
  RunSummary summary;
  nlohmann::json config;  // fully resolved, reloadable with load_config

  nlohmann::json summary_json() const;
};

struct RunOptions {
  bool record_events = true;
};

// Simulates the half-open window [0, duration): breakpoints at exactly
// `duration` belong to the next window, so a run of N whole scan periods
// samples each neuron N times. Final states are taken at `duration`.
RunResult run_scenario(const ScenarioConfig& cfg, RunOptions opts = {});

struct BenchReport {
  std::uint32_t n_neurons = 0;
  double model_seconds = 0.0;
  double wall_seconds = 0.0;
  double throughput = 0.0;
  EventCounts counts;
  std::size_t peak_queue_depth = 0;
  std::string execution;
  int threads = 1;

  nlohmann::json to_json() const;
};

BenchReport benchmark(const ScenarioConfig& cfg);

// Benchmark workload: n neurons, one excitatory pulse per ms with jitter shared
// across neurons, tonic reset, no tracing.
ScenarioConfig benchmark_scenario(std::uint32_t n_neurons, Picoseconds duration);

void write_trace(const std::vector<TraceRow>& rows, std::ostream& out);
void write_trace(const std::vector<TraceRow>& rows, const std::filesystem::path& path);
std::vector<TraceRow> read_trace(std::istream& in);

// One SVG per traced neuron: voltages on top, input and reset pulses, then output spikes.
std::vector<std::filesystem::path> write_plots(const std::vector<TraceRow>& rows, const BiasConfig& biases,
                                               const std::filesystem::path& dir);

}  // namespace cbn
