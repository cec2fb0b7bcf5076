#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "cbn/scenario.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cbn {

namespace {

using nlohmann::json;

json counts_json(const EventCounts& c) {
  return {{"scheduled", c.scheduled},
          {"excitatory", c.excitatory},
          {"inhibitory", c.inhibitory},
          {"resets", c.resets},
          {"pulse_ends", c.pulse_ends},
          {"scans", c.scans},
          {"active_samples", c.active_samples},
          {"crossings_up", c.crossings_up},
          {"crossings_down", c.crossings_down},
          {"intervals", c.intervals},
          {"trace_rows", c.trace_rows},
          {"total_events", c.applied() + c.pulse_ends + c.scans}};
}

int effective_threads(const ScenarioConfig& cfg) {
  if (cfg.execution == Execution::serial) return 1;
#ifdef _OPENMP
  return cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#else
  return 1;
#endif
}

struct Built {
  std::vector<NeuronSetup> setups;
  EngineOptions opts;
};

Built build(const ScenarioConfig& cfg, bool record_events) {
  cfg.validate();
  Built b;
  auto biases = apply_mismatch(cfg);
  b.setups.resize(cfg.n_neurons);
  for (std::uint32_t i = 0; i < cfg.n_neurons; ++i) {
    b.setups[i].bias = biases[i];
    b.setups[i].mode = cfg.mode_of(i);
    b.setups[i].traced = cfg.traced(i);
  }
  b.opts.execution = cfg.execution;
  b.opts.threads = cfg.threads;
  b.opts.feedback_latency = cfg.feedback_latency;
  b.opts.trace_stride = cfg.trace.stride;
  b.opts.record_events = record_events;
  b.opts.seed = cfg.seed;
  return b;
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg, RunOptions ro) {
  RunResult out;
  try {
    auto [setups, opts] = build(cfg, ro.record_events);
    auto t0 = std::chrono::steady_clock::now();
    Simulation sim(std::move(setups), make_buses(cfg.n_neurons, cfg.scan_buses, cfg.scan_period, cfg.slot_duration),
                   cfg.stimulus, opts);
    sim.run_until(cfg.duration - Picoseconds{1});
    auto wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    auto& s = out.summary;
    s.scenario = cfg.name;
    s.duration = cfg.duration;
    s.n_neurons = cfg.n_neurons;
    s.counts = sim.counts();
    s.peak_queue_depth = sim.peak_queue_depth();
    s.wall_seconds = wall;
    s.throughput = wall > 0 ? cfg.n_neurons * to_seconds(cfg.duration) / wall : 0.0;
    if (ro.record_events) {
      s.neurons.reserve(cfg.n_neurons);
      for (std::uint32_t i = 0; i < cfg.n_neurons; ++i) {
        const auto& u = sim.unit(i);
        const auto& r = u.record();
        NeuronSummary ns;
        ns.neuron_id = i;
        ns.spikes = r.spike_times();
        ns.crossings = r.crossings;
        ns.active_samples = r.active_samples;
        ns.resets = r.resets;
        ns.final_state = u.state_at(cfg.duration);
        ns.counts = r.counts;
        s.neurons.push_back(std::move(ns));
      }
    }
    for (std::uint32_t i = 0; i < cfg.n_neurons; ++i) {
      const auto& rows = sim.unit(i).record().trace;
      out.trace.insert(out.trace.end(), rows.begin(), rows.end());
    }
    std::stable_sort(out.trace.begin(), out.trace.end(),
                     [](const TraceRow& a, const TraceRow& b) { return a.time < b.time; });
  } catch (const std::exception& e) {
    throw std::runtime_error("scenario '" + cfg.name + "': " + e.what());
  }
  out.config = to_json(cfg);
  return out;
}

nlohmann::json RunResult::summary_json() const {
  json j;
  const auto& s = summary;
  j["scenario"] = s.scenario;
  j["duration_ps"] = s.duration.count();
  j["n_neurons"] = s.n_neurons;
  j["counts"] = counts_json(s.counts);
  j["peak_queue_depth"] = s.peak_queue_depth;
  j["wall_seconds"] = s.wall_seconds;
  j["throughput_neuron_s_per_s"] = s.throughput;
  j["neurons"] = json::array();
  for (const auto& n : s.neurons) {
    json jn;
    jn["neuron_id"] = n.neuron_id;
    jn["spike_times_ps"] = json::array();
    for (auto t : n.spikes) jn["spike_times_ps"].push_back(t.count());
    jn["active_sample_times_ps"] = json::array();
    for (auto t : n.active_samples) jn["active_sample_times_ps"].push_back(t.count());
    jn["resets"] = json::array();
    for (const auto& r : n.resets) jn["resets"].push_back({{"time_ps", r.time.count()}, {"duration_ps", r.duration.count()}});
    jn["final_state"] = {{"v_syn", n.final_state.v_syn}, {"v_mem", n.final_state.v_mem}};
    jn["spike_count"] = n.spikes.size();
    j["neurons"].push_back(jn);
  }
  j["config"] = config;
  return j;
}

ScenarioConfig benchmark_scenario(std::uint32_t n_neurons, Picoseconds duration) {
  ScenarioConfig c = builtin_scenario("custom");
  c.name = "benchmark";
  c.n_neurons = n_neurons;
  c.duration = duration;
  c.scan_buses = std::max<std::uint32_t>(
      1, static_cast<std::uint32_t>((n_neurons + ScanSchedule::max_slots(c.scan_period, c.slot_duration) - 1) /
                                    ScanSchedule::max_slots(c.scan_period, c.slot_duration)));
  c.controller = Tonic{Picoseconds{24'000}};
  StimulusTrain t;
  t.kind = SpikeKind::excitatory;
  t.neurons = {{0, n_neurons - 1}};
  t.start = Picoseconds{500'000'000};
  t.interval = Picoseconds{1'000'000'000};
  t.duration = Picoseconds{24'000};
  t.jitter = Picoseconds{400'000'000};
  c.stimulus = {t};
  c.trace.neurons.clear();
  return c;
}

nlohmann::json BenchReport::to_json() const {
  return {{"n_neurons", n_neurons},
          {"model_seconds", model_seconds},
          {"wall_seconds", wall_seconds},
          {"throughput_neuron_s_per_s", throughput},
          {"counts", counts_json(counts)},
          {"peak_queue_depth", peak_queue_depth},
          {"execution", execution},
          {"threads", threads}};
}

BenchReport benchmark(const ScenarioConfig& cfg) {
  auto res = run_scenario(cfg, RunOptions{false});
  BenchReport r;
  r.n_neurons = cfg.n_neurons;
  r.model_seconds = to_seconds(cfg.duration);
  r.wall_seconds = res.summary.wall_seconds;
  r.throughput = res.summary.throughput;
  r.counts = res.summary.counts;
  r.peak_queue_depth = res.summary.peak_queue_depth;
  r.execution = cfg.execution == Execution::serial ? "serial" : "openmp";
  r.threads = effective_threads(cfg);
  return r;
}

}  // namespace cbn
