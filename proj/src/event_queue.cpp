#include "cbn/event_queue.hpp"

#include <algorithm>
#include <string>
#include <tuple>

#include "cbn/errors.hpp"

namespace cbn {

namespace {

// std heap functions build a max-heap, so invert the order.
struct Later {
  bool operator()(const SpikeEvent& a, const SpikeEvent& b) const { return event_before(b, a); }
};

}  // namespace

const char* to_string(SpikeKind kind) {
  switch (kind) {
    case SpikeKind::reset: return "reset";
    case SpikeKind::inhibitory: return "inhibitory";
    case SpikeKind::excitatory: return "excitatory";
  }
  return "?";
}

SpikeKind spike_kind_from_string(std::string_view name) {
  if (name == "excitatory" || name == "exc") return SpikeKind::excitatory;
  if (name == "inhibitory" || name == "inh") return SpikeKind::inhibitory;
  if (name == "reset" || name == "rst") return SpikeKind::reset;
  throw ConfigError("unknown spike kind '" + std::string(name) + "'");
}

bool event_before(const SpikeEvent& a, const SpikeEvent& b) {
  return std::tuple(a.time, a.neuron_id, a.kind, a.seq) < std::tuple(b.time, b.neuron_id, b.kind, b.seq);
}

void EventQueue::schedule(SpikeEvent e) {
  if (e.time < now_)
    throw ScheduleError("event at " + format_time(e.time) + " for neuron " + std::to_string(e.neuron_id) +
                        " is in the past (now " + format_time(now_) + ")");
  if (e.duration.count() <= 0)
    throw ScheduleError("event at " + format_time(e.time) + " has non-positive duration");
  e.seq = next_seq_++;
  heap_.push_back(e);
  std::push_heap(heap_.begin(), heap_.end(), Later{});
}

SpikeEvent EventQueue::pop() {
  std::pop_heap(heap_.begin(), heap_.end(), Later{});
  SpikeEvent e = heap_.back();
  heap_.pop_back();
  now_ = std::max(now_, e.time);
  return e;
}

void EventQueue::advance_to(Picoseconds t) { now_ = std::max(now_, t); }

DriveInput active_drive(Picoseconds t, std::span<const PulseWindow> windows) {
  DriveInput d;
  for (const auto& w : windows) {
    if (w.start > t || t >= w.end) continue;
    switch (w.kind) {
      case SpikeKind::excitatory: d.i_exc += w.amplitude; break;
      case SpikeKind::inhibitory: d.i_inh += w.amplitude; break;
      case SpikeKind::reset: d.i_rst += w.amplitude; break;
    }
  }
  return d;
}

}  // namespace cbn
