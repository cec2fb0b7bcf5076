#pragma once

#include <cstdint>
#include <optional>
#include <variant>

#include "cbn/aer.hpp"
#include "cbn/event_queue.hpp"
#include "cbn/time.hpp"

namespace cbn {

struct Passive {
  bool operator==(const Passive&) const = default;
};

struct Tonic {
  Picoseconds rst_duration{24'000};
  bool operator==(const Tonic&) const = default;
};

struct Burst {
  std::uint32_t spikes_per_burst = 5;
  Picoseconds rst_duration{24'000};
  bool operator==(const Burst&) const = default;
};

struct Adaptation {
  Picoseconds rst_init{3'000};
  Picoseconds rst_increment{3'000};
  Picoseconds rst_max{32'000};
  // Return to rst_init after this many consecutive inactive samples; 0 disables decay.
  std::uint32_t decay_after_inactive = 0;
  bool operator==(const Adaptation&) const = default;
};

using ControllerMode = std::variant<Passive, Tonic, Burst, Adaptation>;

// Throws ConfigError naming the violated invariant.
void validate(const ControllerMode& mode);
const char* mode_name(const ControllerMode& mode);

struct ControllerState {
  ControllerMode mode = Passive{};
  std::uint32_t consecutive_active = 0;
  std::uint32_t consecutive_inactive = 0;
  Picoseconds current_rst{0};

  static ControllerState initial(const ControllerMode& mode);
};

struct ResetCommand {
  std::uint32_t neuron_id = 0;
  Picoseconds issue_time{0};
  Picoseconds duration{0};
};

struct ControllerStep {
  ControllerState state;
  std::optional<ResetCommand> command;
};

ControllerStep on_sample(ControllerState state, const AerSample& s);

SpikeEvent command_to_event(const ResetCommand& c, Picoseconds latency);

}  // namespace cbn
