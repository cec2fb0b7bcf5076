#include <cmath>
#include <numeric>
#include <sstream>

#include "cbn/errors.hpp"
#include "cbn/scenario.hpp"
#include "doctest.h"

using namespace cbn;

namespace {

constexpr Picoseconds kNs{1'000};
constexpr Picoseconds kMs{1'000'000'000};

std::string csv(const std::vector<TraceRow>& rows) {
  std::ostringstream out;
  write_trace(rows, out);
  return out.str();
}

}  // namespace

TEST_CASE("an empty config yields the defaults") {
  auto c = load_config("");
  CHECK(c.n_neurons == 1);
  CHECK(c.biases == BiasConfig{});
  CHECK(c.scan_period == kMs);
  CHECK(c.slot_duration == 32 * kNs);
  CHECK(std::holds_alternative<Passive>(c.controller));
  CHECK(c.stimulus.empty());
}

TEST_CASE("configs override a built-in base") {
  auto c = load_config(R"(
scenario: fig3c
duration: 20ms
n_neurons: 4
biases:
  c_mem: 20e-15
controller: {mode: adaptation, rst_init: 2ns, rst_increment: 4ns, rst_max: 30ns, decay_after_inactive: 3}
controller_overrides:
  - {neurons: [3], mode: passive}
stimulus:
  - {kind: exc, neurons: {from: 0, to: 3}, start: 0.5ms, interval: 1ms, duration: 24ns}
  - {kind: inh, neurons: [1, 2], start: 2ms, interval: 5ms, count: 2, duration: 10ns}
trace: {neurons: all, stride: 10us}
)");
  CHECK(c.name == "fig3c");
  CHECK(c.duration == 20 * kMs);
  CHECK(c.biases.c_mem == 20e-15);
  CHECK(std::get<Adaptation>(c.controller) == Adaptation{2 * kNs, 4 * kNs, 30 * kNs, 3});
  CHECK(std::holds_alternative<Passive>(c.mode_of(3)));
  CHECK(std::holds_alternative<Adaptation>(c.mode_of(2)));
  REQUIRE(c.stimulus.size() == 2);
  CHECK(c.stimulus[1].kind == SpikeKind::inhibitory);
  CHECK(c.stimulus[1].count == 2u);
  CHECK(c.traced(0));
  CHECK(c.traced(3));
  CHECK(c.trace.stride == Picoseconds{10'000'000});
}

TEST_CASE("config errors name the problem and the line") {
  CHECK_THROWS_WITH_AS(load_config("biases:\n  c_syn: -1e-15\n"), doctest::Contains("c_syn > 0"), ConfigError);
  CHECK_THROWS_WITH_AS(load_config("n_neurons: 40000\n"), doctest::Contains("31250"), ConfigError);
  CHECK_NOTHROW(load_config("n_neurons: 40000\nscan: {buses: 2}\n"));
  CHECK_THROWS_WITH_AS(load_config("seed: 1\n\nbogus: 3\n"), doctest::Contains("line 3"), ConfigError);
  CHECK_THROWS_WITH_AS(load_config("duration: 10\ncontroller: {mode: chaotic}\n"), doctest::Contains("line 2"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(load_config("duration: ten ms\n"), doctest::Contains("line 1"), ConfigError);
  CHECK_THROWS_AS(load_config("scenario: fig9\n"), ConfigError);
  CHECK_THROWS_AS(load_config("n_neurons: 2\ntrace: {neurons: [5]}\n"), ConfigError);
  CHECK_THROWS_AS(load_config("biases:\n  lambda_n: 0\n  lambda_p: 0\n"), ConfigError);
}

TEST_CASE("the JSON echo reloads to the same config") {
  for (auto name : {"fig3a", "fig3b", "fig3c", "fig3d", "custom"}) {
    auto c = builtin_scenario(name);
    c.mismatch.c_syn = 0.03;
    c.mismatch.seed = 99;
    c.feedback_latency = 100 * kNs;
    auto j = to_json(c);
    auto back = load_config(j.dump());
    CHECK(to_json(back) == j);
    CHECK(back.biases == c.biases);
    CHECK(back.duration == c.duration);
  }
}

TEST_CASE("mismatch") {
  auto base = builtin_scenario("custom");
  base.n_neurons = 10'000;
  base.scan_buses = 1;
  auto plain = apply_mismatch(base);
  for (const auto& b : plain) REQUIRE(b == base.biases);

  auto m = base;
  m.mismatch.c_syn = 0.05;
  m.mismatch.i_n0 = 0.05;
  auto a = apply_mismatch(m);
  auto b = apply_mismatch(m);
  CHECK(a == b);

  for (auto field : {&BiasConfig::c_syn, &BiasConfig::i_n0}) {
    double sum = 0, sq = 0;
    for (const auto& x : a) {
      double f = x.*field / base.biases.*field;
      sum += f;
      sq += f * f;
    }
    double mean = sum / a.size();
    double sd = std::sqrt(sq / a.size() - mean * mean);
    CHECK(std::abs(mean - 1.0) <= 0.01);
    CHECK(std::abs(sd - 0.05) <= 0.005);
  }
  for (const auto& x : a) CHECK(x.c_mem == base.biases.c_mem);

  auto other = m;
  other.seed = 2;
  CHECK(apply_mismatch(other) != a);
}

TEST_CASE("trace CSV round-trips") {
  CHECK(csv({}) == "time_ps,neuron_id,v_syn,v_mem,exc,inh,rst,aer_active,spike\n");
  auto r = run_scenario(builtin_scenario("fig3a"));
  REQUIRE(!r.trace.empty());
  std::istringstream in(csv(r.trace));
  auto back = read_trace(in);
  REQUIRE(back.size() == r.trace.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    REQUIRE(back[i].time == r.trace[i].time);
    REQUIRE(back[i].spike == r.trace[i].spike);
    REQUIRE(back[i].rst == r.trace[i].rst);
    REQUIRE(std::abs(back[i].v_mem - r.trace[i].v_mem) <= 1e-8);
  }
  std::istringstream bad("time_ps,neuron_id\n");
  CHECK_THROWS(read_trace(bad));
}

TEST_CASE("repeated runs write byte-identical traces") {
  auto c = builtin_scenario("fig3c");
  c.duration = 12 * kMs;
  auto a = run_scenario(c);
  c.execution = Execution::serial;
  auto b = run_scenario(c);
  CHECK(csv(a.trace) == csv(b.trace));
}

TEST_CASE("trace flags agree with the event records") {
  auto c = builtin_scenario("fig3c");
  c.duration = 20 * kMs;
  c.trace.stride = Picoseconds{0};
  auto r = run_scenario(c);
  const auto& n = r.summary.neurons.at(0);
  std::size_t spike_rows = 0, active_rows = 0;
  for (const auto& row : r.trace) {
    spike_rows += row.spike;
    active_rows += row.aer_active;
    bool in_reset = false;
    for (const auto& rs : n.resets) in_reset |= row.time >= rs.time && row.time < rs.time + rs.duration;
    REQUIRE(row.rst == in_reset);
  }
  CHECK(spike_rows == n.spikes.size());
  CHECK(active_rows == n.active_samples.size());
  CHECK(n.resets.size() == n.active_samples.size());
}

TEST_CASE("built-in scenarios") {
  auto a = run_scenario(builtin_scenario("fig3a"));
  const auto& na = a.summary.neurons.at(0);
  CHECK(na.spikes.size() == 1);
  CHECK(na.resets.size() == 1);
  CHECK(na.final_state.v_mem < 0.6);

  auto d = run_scenario(builtin_scenario("fig3d"));
  CHECK(d.summary.neurons.at(0).spikes.empty());
  CHECK(d.summary.counts.resets == 0);

  auto cc = run_scenario(builtin_scenario("fig3c"));
  const auto& nc = cc.summary.neurons.at(0);
  std::vector<std::int64_t> durations;
  for (const auto& rs : nc.resets) durations.push_back(rs.duration.count() / 1'000);
  REQUIRE(durations.size() >= 3);
  for (std::size_t i = 0; i < durations.size(); ++i) CHECK(durations[i] == std::min<std::int64_t>(3 + 3 * i, 32));

  auto j = a.summary_json();
  CHECK(j["neurons"][0]["spike_count"] == 1);
  CHECK(j["config"]["scenario"] == "fig3a");
}

TEST_CASE("benchmark workload counts scale with the array") {
  auto small = benchmark(benchmark_scenario(100, 20 * kMs));
  auto big = benchmark(benchmark_scenario(300, 20 * kMs));
  CHECK(small.counts.excitatory == 100 * 20);
  CHECK(big.counts.excitatory == 3 * small.counts.excitatory);
  CHECK(big.counts.scans == 3 * small.counts.scans);
  CHECK(big.counts.resets == 3 * small.counts.resets);
  CHECK(small.peak_queue_depth <= 2);
}
