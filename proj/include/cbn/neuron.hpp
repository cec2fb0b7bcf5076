#pragma once

#include <optional>

#include "cbn/time.hpp"

namespace cbn {

struct BiasConfig {
  double vdd = 1.2;
  double i_n0 = 2e-12;
  double lambda_n = 2.5;
  double i_p0 = 2e-12;
  double lambda_p = 0.05;
  double i_pulse_exc = 550e-9;
  double i_pulse_inh = 550e-9;
  double i_pulse_rst = 550e-9;
  double c_syn = 22e-15;
  double c_mem = 18e-15;
  // Level shifter: I = i_s * (exp((dV - v_on) / v_slope) - 1) above onset.
  double i_s = 10e-12;
  double v_on = 0.05;
  double v_slope = 0.03;
  double v_threshold = 0.6;
  // Switching the level shifter off decouples the nodes (used for linearity checks).
  bool diode_coupling = true;

  // The exponential saturates here instead of overflowing.
  double shift_ceiling() const { return 10.0 * i_pulse_exc; }

  // Throws ConfigError naming the first violated invariant.
  void validate() const;

  bool operator==(const BiasConfig&) const = default;
};

struct NeuronState {
  double v_syn = 0.0;
  double v_mem = 0.0;

  bool operator==(const NeuronState&) const = default;
};

struct DriveInput {
  double i_exc = 0.0;
  double i_inh = 0.0;
  double i_rst = 0.0;

  bool operator==(const DriveInput&) const = default;
};

struct CurrentBreakdown {
  double i_exc = 0.0;
  double i_inh = 0.0;
  double i_n = 0.0;
  double i_p = 0.0;
  double i_shift = 0.0;
  double i_rst = 0.0;
  double i_syn_net = 0.0;
  double i_mem_net = 0.0;
};

enum class Crossing { upward, downward };

struct ThresholdCrossing {
  Crossing direction;
  double offset;  // seconds after the start of the step
};

// Over one constant-drive interval v_mem changes direction at most once
// (the coupled pair is a cooperative system), so it can cross the threshold
// at most once in each direction.
struct StepResult {
  NeuronState state;
  std::optional<ThresholdCrossing> up;
  std::optional<ThresholdCrossing> down;

  std::optional<Crossing> crossing() const;
};

double leak_current_n(double v_syn, const BiasConfig& cfg);
double leak_current_p(double v_mem, const BiasConfig& cfg);
double shift_current(double v_mem, double v_syn, const BiasConfig& cfg);
CurrentBreakdown currents(const NeuronState& state, const DriveInput& drive, const BiasConfig& cfg);

// Closed form for the diode-off regime. Throws RegimeError if the level shifter
// conducts or a node reaches a rail during dt.
NeuronState step_exact_linear(const NeuronState& state, const DriveInput& drive, Picoseconds dt,
                              const BiasConfig& cfg);

StepResult step(const NeuronState& state, const DriveInput& drive, Picoseconds dt, const BiasConfig& cfg);

NeuronState steady_state(const BiasConfig& cfg);

std::optional<Crossing> detect_threshold(double v_before, double v_after, const BiasConfig& cfg);

}  // namespace cbn
