#pragma once

#include <cstdint>
#include <vector>

#include "cbn/neuron.hpp"
#include "cbn/time.hpp"

namespace cbn {

class ScanSchedule {
 public:
  static constexpr Picoseconds kDefaultPeriod{1'000'000'000};
  static constexpr Picoseconds kDefaultSlot{32'000};

  // Identity slot map. Throws ConfigError when the slots do not fit in one period.
  explicit ScanSchedule(std::uint32_t n_neurons, Picoseconds period = kDefaultPeriod,
                        Picoseconds slot_duration = kDefaultSlot);
  // Custom slot map; must be a bijection onto [0, n_neurons).
  ScanSchedule(std::vector<std::uint32_t> slot_of_neuron, Picoseconds period, Picoseconds slot_duration);

  static std::uint64_t max_slots(Picoseconds period, Picoseconds slot_duration) {
    return static_cast<std::uint64_t>(period.count() / slot_duration.count());
  }

  Picoseconds period() const { return period_; }
  Picoseconds slot_duration() const { return slot_; }
  std::uint32_t n_neurons() const { return static_cast<std::uint32_t>(slot_of_.size()); }
  std::uint32_t slot_of(std::uint32_t neuron_id) const;

  // k * period + slot * slot_duration. Throws std::out_of_range for a bad id.
  Picoseconds slot_time(std::uint32_t neuron_id, std::int64_t k) const;
  // First slot instant of this neuron at or after t.
  Picoseconds next_slot_at_or_after(std::uint32_t neuron_id, Picoseconds t) const;

 private:
  void check_budget() const;

  std::vector<std::uint32_t> slot_of_;
  Picoseconds period_;
  Picoseconds slot_;
};

struct AerSample {
  Picoseconds time{0};
  std::uint32_t neuron_id = 0;
  std::uint32_t address = 0;
  bool active = false;
};

// Dense binary addresses of width ceil(log2(n)).
class AddressCodec {
 public:
  explicit AddressCodec(std::uint32_t n_neurons);
  unsigned width() const { return width_; }
  std::uint32_t encode(std::uint32_t neuron_id) const;
  std::uint32_t decode(std::uint32_t address) const;

 private:
  std::uint32_t n_;
  unsigned width_;
};

// Level sampling of the active-low output; active iff v_mem >= v_threshold.
AerSample sample(const NeuronState& state, Picoseconds t, std::uint32_t neuron_id, const AddressCodec& codec,
                 const BiasConfig& cfg);

}  // namespace cbn
