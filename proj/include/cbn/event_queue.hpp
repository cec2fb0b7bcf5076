#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cbn/neuron.hpp"
#include "cbn/time.hpp"

namespace cbn {

// Declaration order is the tie-break rank at equal (time, neuron).
enum class SpikeKind : std::uint8_t { reset, inhibitory, excitatory };

const char* to_string(SpikeKind kind);
SpikeKind spike_kind_from_string(std::string_view name);

struct SpikeEvent {
  Picoseconds time{0};
  std::uint32_t neuron_id = 0;
  SpikeKind kind = SpikeKind::excitatory;
  Picoseconds duration{0};
  std::uint64_t seq = 0;      // assigned by EventQueue::schedule
  std::uint32_t source = 0;   // 0 = external, otherwise 1 + stimulus train index
};

struct PulseWindow {
  Picoseconds start{0};
  Picoseconds end{0};
  SpikeKind kind = SpikeKind::excitatory;
  double amplitude = 0.0;
};

class EventQueue {
 public:
  // Throws ScheduleError if e.time precedes now() or e.duration is not positive.
  void schedule(SpikeEvent e);

  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  const SpikeEvent& top() const { return heap_.front(); }
  // Pops the earliest event and moves now() up to its time.
  SpikeEvent pop();

  Picoseconds now() const { return now_; }
  void advance_to(Picoseconds t);

 private:
  std::vector<SpikeEvent> heap_;
  Picoseconds now_{0};
  std::uint64_t next_seq_ = 0;
};

// Strict weak order used by the queue: (time, neuron_id, kind, seq).
bool event_before(const SpikeEvent& a, const SpikeEvent& b);

DriveInput active_drive(Picoseconds t, std::span<const PulseWindow> windows);

}  // namespace cbn
