#include <cmath>
#include <random>

#include "cbn/errors.hpp"
#include "cbn/neuron.hpp"
#include "doctest.h"
#include "program.hpp"
#include "reference.hpp"

using namespace cbn;
using cbn::testing::Pulse;

namespace {

constexpr Picoseconds kNs{1'000};
constexpr Picoseconds kUs{1'000'000};
constexpr Picoseconds kMs{1'000'000'000};

BiasConfig lambda_cfg(double ln, double lp) {
  BiasConfig c;
  c.lambda_n = ln;
  c.lambda_p = lp;
  return c;
}

}  // namespace

TEST_CASE("leak_current_n") {
  BiasConfig c;
  CHECK(leak_current_n(0.0, c) == doctest::Approx(2e-12).epsilon(1e-12));
  auto flat = lambda_cfg(0.0, 0.1);
  CHECK(leak_current_n(0.7, flat) == doctest::Approx(2e-12).epsilon(1e-12));
  CHECK(leak_current_n(1.0, lambda_cfg(0.1, 0.1)) == doctest::Approx(2.2e-12).epsilon(1e-12));
  double prev = 0;
  for (double v = 0; v <= c.vdd; v += 0.01) {
    double i = leak_current_n(v, c);
    CHECK(i > 0);
    CHECK(i >= prev);
    prev = i;
  }
}

TEST_CASE("leak_current_p") {
  BiasConfig c;
  CHECK(leak_current_p(c.vdd, c) == doctest::Approx(2e-12).epsilon(1e-12));
  CHECK(leak_current_p(0.3, lambda_cfg(0.1, 0.0)) == doctest::Approx(2e-12).epsilon(1e-12));
  CHECK(leak_current_p(0.2, lambda_cfg(0.1, 0.1)) == doctest::Approx(2.2e-12).epsilon(1e-12));
  double prev = 1;
  for (double v = 0; v <= c.vdd; v += 0.01) {
    double i = leak_current_p(v, c);
    CHECK(i > 0);
    CHECK(i <= prev);
    prev = i;
  }
}

TEST_CASE("shift_current law, onset and ceiling") {
  BiasConfig c;
  CHECK(shift_current(0.4, 0.4, c) == 0.0);
  CHECK(shift_current(0.2 + c.v_on, 0.2, c) == 0.0);
  // e - 1
  CHECK(shift_current(0.2 + c.v_on + c.v_slope, 0.2, c) == doctest::Approx(1.718281828459045 * c.i_s).epsilon(1e-12));
  CHECK(shift_current(c.vdd, 0.0, c) == c.shift_ceiling());
  CHECK(c.shift_ceiling() == doctest::Approx(5.5e-6));

  double prev = 0;
  for (double dv = -0.5; dv <= 1.2; dv += 0.001) {
    double vs = dv < 0 ? -dv : 0.0;
    double vm = dv < 0 ? 0.0 : dv;
    double i = shift_current(vm, vs, c);
    CHECK(std::isfinite(i));
    CHECK(i >= prev);
    prev = i;
  }

  BiasConfig off = c;
  off.diode_coupling = false;
  CHECK(shift_current(1.0, 0.0, off) == 0.0);
}

TEST_CASE("currents compose the scalar laws with the sign convention") {
  BiasConfig c;
  NeuronState s{0.2, 0.9};
  DriveInput d{100e-9, 30e-9, 10e-9};
  auto b = currents(s, d, c);
  CHECK(b.i_n == leak_current_n(0.2, c));
  CHECK(b.i_p == leak_current_p(0.9, c));
  CHECK(b.i_shift == shift_current(0.9, 0.2, c));
  CHECK(b.i_syn_net == doctest::Approx(100e-9 - 30e-9 + b.i_shift - b.i_n));
  CHECK(b.i_mem_net == doctest::Approx(b.i_p - b.i_shift - 10e-9));

  auto ss = steady_state(c);
  auto rest = currents(ss, {}, c);
  CHECK(std::abs(rest.i_syn_net) <= 1e-6 * c.i_n0);
  CHECK(std::abs(rest.i_mem_net) <= 1e-6 * c.i_n0);

  auto top = currents({c.vdd, 0.1}, {550e-9, 0, 0}, c);
  CHECK(top.i_syn_net <= 0.0);
  auto bottom = currents({0.0, 0.0}, {0, 550e-9, 550e-9}, c);
  CHECK(bottom.i_syn_net >= 0.0);
  CHECK(bottom.i_mem_net >= 0.0);
}

TEST_CASE("detect_threshold") {
  BiasConfig c;
  CHECK(detect_threshold(0.59, 0.61, c) == Crossing::upward);
  CHECK(detect_threshold(0.61, 0.59, c) == Crossing::downward);
  CHECK_FALSE(detect_threshold(0.30, 0.59, c).has_value());
  CHECK(detect_threshold(0.59, 0.6, c) == Crossing::upward);
  CHECK_FALSE(detect_threshold(0.6, 0.7, c).has_value());
}

TEST_CASE("step_exact_linear ramps") {
  BiasConfig c;
  c.i_n0 = 0.0;  // leaks zeroed for the pure-ramp examples
  c.i_p0 = 0.0;
  auto s = step_exact_linear({0.1, 0.12}, {550e-9, 0, 0}, 24 * kNs, c);
  CHECK(s.v_syn - 0.1 == doctest::Approx(0.600).epsilon(1e-12));
  CHECK(s.v_mem == 0.12);

  auto r = step_exact_linear({0.98, 1.0}, {0, 0, 550e-9}, 24 * kNs, c);
  CHECK(r.v_mem - 1.0 == doctest::Approx(-0.733333333333).epsilon(1e-10));
  CHECK(r.v_syn == 0.98);

  BiasConfig d;
  NeuronState x{0.3, 0.31};
  CHECK(step_exact_linear(x, {550e-9, 0, 0}, Picoseconds{0}, d) == x);
}

TEST_CASE("step_exact_linear rejects regime violations") {
  BiasConfig c;
  // Level shifter already conducting.
  CHECK_THROWS_AS(step_exact_linear({0.1, 0.5}, {}, kUs, c), RegimeError);
  // Rail reached inside the interval.
  CHECK_THROWS_AS(step_exact_linear({0.9, 0.2}, {550e-9, 0, 0}, 24 * kNs, c), RegimeError);
  // Diode turns on: the synapse decays below the membrane.
  CHECK_THROWS_AS(step_exact_linear({0.2, 0.2}, {0, 550e-9, 0}, 24 * kNs, c), RegimeError);
}

TEST_CASE("step keeps the fixed point") {
  BiasConfig c;
  auto ss = steady_state(c);
  auto r = step(ss, {}, 10 * kMs, c);
  CHECK(std::abs(r.state.v_syn - ss.v_syn) < 1e-6);
  CHECK(std::abs(r.state.v_mem - ss.v_mem) < 1e-6);
  CHECK_FALSE(r.crossing().has_value());
}

TEST_CASE("single excitatory pulse from rest matches the 1 ps reference") {
  BiasConfig c;
  auto ss = steady_state(c);
  DriveInput d{550e-9, 0, 0};
  auto got = step(ss, d, 24 * kNs, c).state;
  auto ref = oracle::reference_advance(ss, d, 24'000, c);
  CHECK(std::abs(got.v_syn - ref.v_syn) < 1e-5);
  CHECK(std::abs(got.v_mem - ref.v_mem) < 1e-5);
  double rise = got.v_syn - ss.v_syn;
  CHECK(std::abs(rise - 0.6) < 1e-3);
}

TEST_CASE("step reports threshold crossings with their times") {
  BiasConfig c;
  // Diode off, v_mem charging through I_p.
  auto r = step({1.0, 0.59}, {}, kMs, c);
  REQUIRE(r.up.has_value());
  CHECK(r.crossing() == Crossing::upward);
  double rate = leak_current_p(0.595, c) / c.c_mem;
  CHECK(r.up->offset == doctest::Approx(0.01 / rate).epsilon(1e-2));

  auto d = step({0.3, 0.7}, {0, 0, 550e-9}, 24 * kNs, c);
  CHECK(d.crossing() == Crossing::downward);
}

TEST_CASE("steady_state") {
  BiasConfig c;
  auto ss = steady_state(c);
  CHECK(ss.v_syn >= 0.0);
  CHECK(ss.v_mem <= c.vdd);
  double in = leak_current_n(ss.v_syn, c);
  CHECK(std::abs(leak_current_p(ss.v_mem, c) - in) / in <= 1e-6);
  CHECK(std::abs(shift_current(ss.v_mem, ss.v_syn, c) - in) / in <= 1e-6);

  // Brute-force relaxation oracle: 100 ms of fixed 10 ns RK4 from a distant state.
  auto relaxed = oracle::reference_advance({0.5, 0.5}, {}, 100'000'000'000, c, 10'000);
  CHECK(std::abs(relaxed.v_syn - ss.v_syn) < 1e-3);
  CHECK(std::abs(relaxed.v_mem - ss.v_mem) < 1e-3);

  BiasConfig flat = lambda_cfg(0.0, 0.0);
  CHECK_THROWS_AS(steady_state(flat), ConfigError);

  BiasConfig twice = c;
  twice.i_n0 *= 2;
  twice.i_p0 *= 2;
  auto s2 = steady_state(twice);
  CHECK(s2.v_mem - s2.v_syn > ss.v_mem - ss.v_syn);
}

TEST_CASE("convergence from the rail corners") {
  BiasConfig c;
  auto ss = steady_state(c);
  for (NeuronState corner : {NeuronState{0, 0}, NeuronState{0, c.vdd}, NeuronState{c.vdd, 0}, NeuronState{c.vdd, c.vdd}}) {
    auto r = step(corner, {}, 200 * kMs, c).state;
    CHECK(std::abs(r.v_syn - ss.v_syn) <= 1e-3);
    CHECK(std::abs(r.v_mem - ss.v_mem) <= 1e-3);
  }
}

TEST_CASE("linear regime agrees with the closed form to 1 nV") {
  BiasConfig c = lambda_cfg(0.0, 0.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int i = 0; i < 400; ++i) {
    NeuronState s{0.3 + 0.6 * u(rng), 0.05 + 0.2 * u(rng)};
    DriveInput d{u(rng) < 0.5 ? 550e-9 * u(rng) : 0.0, u(rng) < 0.3 ? 100e-9 * u(rng) : 0.0,
                 u(rng) < 0.3 ? 100e-9 * u(rng) : 0.0};
    Picoseconds dt{static_cast<std::int64_t>(1 + u(rng) * 5e6)};
    NeuronState exact;
    try {
      exact = step_exact_linear(s, d, dt, c);
    } catch (const RegimeError&) {
      continue;  // the closed form only applies when nothing switches
    }
    auto got = step(s, d, dt, c).state;
    CHECK(std::abs(got.v_syn - exact.v_syn) <= 1e-9);
    CHECK(std::abs(got.v_mem - exact.v_mem) <= 1e-9);
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("superposition with the level shifter disabled and lambda_n = 0") {
  BiasConfig c = lambda_cfg(0.0, 0.05);
  c.diode_coupling = false;
  // Weak pulses keep every trajectory clear of the rails, where clamping breaks linearity.
  c.i_pulse_exc = c.i_pulse_inh = c.i_pulse_rst = 50e-9;
  NeuronState start{0.6, 0.3};
  auto t_end = 3 * kMs;
  std::vector<Pulse> a{{100 * kUs, 24 * kNs, SpikeKind::excitatory}, {900 * kUs, 10 * kNs, SpikeKind::inhibitory},
                       {1700 * kUs, 24 * kNs, SpikeKind::excitatory}};
  std::vector<Pulse> b{{400 * kUs, 16 * kNs, SpikeKind::inhibitory}, {1200 * kUs, 8 * kNs, SpikeKind::excitatory},
                       {1700 * kUs + 10 * kNs, 20 * kNs, SpikeKind::inhibitory}};
  std::vector<Pulse> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());

  for (auto t : {500 * kUs, 1500 * kUs, t_end}) {
    auto base = testing::run_program(start, {}, t, c).v_syn;
    auto ra = testing::run_program(start, a, t, c).v_syn - base;
    auto rb = testing::run_program(start, b, t, c).v_syn - base;
    auto rab = testing::run_program(start, ab, t, c).v_syn - base;
    CHECK(std::abs(rab - (ra + rb)) <= 1e-6);
  }

  c.lambda_n = 0.5;  // still affine, so superposition of deviations holds too
  auto base = testing::run_program(start, {}, t_end, c).v_syn;
  auto ra = testing::run_program(start, a, t_end, c).v_syn - base;
  auto rb = testing::run_program(start, b, t_end, c).v_syn - base;
  auto rab = testing::run_program(start, ab, t_end, c).v_syn - base;
  CHECK(std::abs(rab - (ra + rb)) <= 1e-6);
}

TEST_CASE("random piecewise-constant drives agree with the 1 ps reference") {
  BiasConfig c;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    // 20 us windows with dense random pulses (edges >= 1 ns apart by construction).
    std::vector<Pulse> pulses;
    std::uniform_int_distribution<std::int64_t> start_ns(0, 19'000);
    std::uniform_int_distribution<std::int64_t> width_ns(1, 40);
    std::uniform_int_distribution<int> kind(0, 2);
    for (int i = 0; i < 12; ++i)
      pulses.push_back({start_ns(rng) * kNs, width_ns(rng) * kNs, static_cast<SpikeKind>(kind(rng))});
    NeuronState s0 = trial == 0 ? steady_state(c) : NeuronState{0.3 * trial, 0.5};
    NeuronState got = s0, ref = s0;
    double worst = 0;
    for (const auto& seg : testing::segments(pulses, 20 * kUs, c)) {
      got = step(got, seg.drive, seg.t1 - seg.t0, c).state;
      ref = oracle::reference_advance(ref, seg.drive, (seg.t1 - seg.t0).count(), c);
      worst = std::max({worst, std::abs(got.v_syn - ref.v_syn), std::abs(got.v_mem - ref.v_mem)});
    }
    INFO("trial " << trial << " worst " << worst);
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("rail bounds hold under saturating drive") {
  BiasConfig c;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  NeuronState s = steady_state(c);
  for (int i = 0; i < 2000; ++i) {
    DriveInput d{u(rng) < 0.5 ? 3 * 550e-9 : 0.0, u(rng) < 0.3 ? 2 * 550e-9 : 0.0, u(rng) < 0.3 ? 550e-9 : 0.0};
    s = step(s, d, Picoseconds{static_cast<std::int64_t>(u(rng) * 2e5)}, c).state;
    REQUIRE(s.v_syn >= 0.0);
    REQUIRE(s.v_syn <= c.vdd);
    REQUIRE(s.v_mem >= 0.0);
    REQUIRE(s.v_mem <= c.vdd);
  }
}

TEST_CASE("step is deterministic and rejects non-finite input") {
  BiasConfig c;
  NeuronState s{0.4, 0.55};
  DriveInput d{0, 0, 0};
  auto a = step(s, d, 3 * kMs, c);
  auto b = step(s, d, 3 * kMs, c);
  CHECK(a.state == b.state);
  CHECK_THROWS_AS(step({std::nan(""), 0.1}, d, kUs, c), ModelError);
}

TEST_CASE("bias validation names the invariant") {
  BiasConfig c;
  c.c_syn = -1e-15;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("c_syn > 0"), ConfigError);
  BiasConfig t;
  t.v_threshold = 1.5;
  CHECK_THROWS_AS(t.validate(), ConfigError);
}
