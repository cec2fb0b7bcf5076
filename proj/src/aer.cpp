#include "cbn/aer.hpp"

#include <bit>
#include <stdexcept>
#include <string>

#include "cbn/errors.hpp"

namespace cbn {

ScanSchedule::ScanSchedule(std::uint32_t n_neurons, Picoseconds period, Picoseconds slot_duration)
    : period_(period), slot_(slot_duration) {
  slot_of_.resize(n_neurons);
  for (std::uint32_t i = 0; i < n_neurons; ++i) slot_of_[i] = i;
  check_budget();
}

ScanSchedule::ScanSchedule(std::vector<std::uint32_t> slot_of_neuron, Picoseconds period,
                           Picoseconds slot_duration)
    : slot_of_(std::move(slot_of_neuron)), period_(period), slot_(slot_duration) {
  check_budget();
  std::vector<bool> taken(slot_of_.size(), false);
  for (auto s : slot_of_) {
    if (s >= slot_of_.size() || taken[s]) throw ConfigError("scan slot map is not a bijection onto [0, n_neurons)");
    taken[s] = true;
  }
}

void ScanSchedule::check_budget() const {
  if (period_.count() <= 0) throw ConfigError("scan period must be > 0");
  if (slot_.count() <= 0) throw ConfigError("scan slot duration must be > 0");
  auto cap = max_slots(period_, slot_);
  if (slot_of_.size() > cap)
    throw ConfigError(std::to_string(slot_of_.size()) + " neurons do not fit on one scan bus: n_neurons * " +
                      format_time(slot_) + " must not exceed the " + format_time(period_) + " period (max " +
                      std::to_string(cap) + " slots)");
}

std::uint32_t ScanSchedule::slot_of(std::uint32_t neuron_id) const {
  if (neuron_id >= slot_of_.size())
    throw std::out_of_range("neuron " + std::to_string(neuron_id) + " is not on this scan bus");
  return slot_of_[neuron_id];
}

Picoseconds ScanSchedule::slot_time(std::uint32_t neuron_id, std::int64_t k) const {
  return k * period_ + static_cast<std::int64_t>(slot_of(neuron_id)) * slot_;
}

Picoseconds ScanSchedule::next_slot_at_or_after(std::uint32_t neuron_id, Picoseconds t) const {
  Picoseconds offset = static_cast<std::int64_t>(slot_of(neuron_id)) * slot_;
  if (t <= offset) return offset;
  std::int64_t k = (t - offset + period_ - Picoseconds{1}) / period_;
  return k * period_ + offset;
}

AddressCodec::AddressCodec(std::uint32_t n_neurons)
    : n_(n_neurons), width_(n_neurons <= 1 ? 0u : static_cast<unsigned>(std::bit_width(n_neurons - 1))) {}

std::uint32_t AddressCodec::encode(std::uint32_t neuron_id) const {
  if (neuron_id >= n_) throw std::out_of_range("neuron id " + std::to_string(neuron_id) + " out of range");
  return neuron_id;
}

std::uint32_t AddressCodec::decode(std::uint32_t address) const {
  if (address >= n_) throw std::out_of_range("AER address " + std::to_string(address) + " out of range");
  return address;
}

AerSample sample(const NeuronState& state, Picoseconds t, std::uint32_t neuron_id, const AddressCodec& codec,
                 const BiasConfig& cfg) {
  return {t, neuron_id, codec.encode(neuron_id), state.v_mem >= cfg.v_threshold};
}

}  // namespace cbn
