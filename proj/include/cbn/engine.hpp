#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "cbn/aer.hpp"
#include "cbn/controller.hpp"
#include "cbn/event_queue.hpp"
#include "cbn/neuron.hpp"
#include "cbn/time.hpp"

namespace cbn {

// Periodic pulse program. Every targeted neuron sees the same event times; the
// optional jitter offsets event k by a keyed uniform draw in [0, jitter).
struct StimulusTrain {
  SpikeKind kind = SpikeKind::excitatory;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> neurons;  // inclusive id ranges
  Picoseconds start{0};
  Picoseconds interval{1'000'000'000};
  std::optional<std::uint64_t> count;  // unbounded when empty
  Picoseconds duration{24'000};
  Picoseconds jitter{0};
};

Picoseconds train_event_time(const StimulusTrain& train, std::size_t train_index, std::uint64_t k,
                             std::uint64_t seed);

struct NeuronSetup {
  BiasConfig bias;
  ControllerMode mode = Passive{};
  bool traced = false;
  std::optional<NeuronState> initial;  // steady state when empty
};

// One scan line serving neurons [first_neuron, first_neuron + schedule.n_neurons()).
struct ScanBus {
  std::uint32_t first_neuron = 0;
  ScanSchedule schedule;
};

// Splits n neurons over the fewest buses that respect the slot budget.
std::vector<ScanBus> make_buses(std::uint32_t n_neurons, std::uint32_t n_buses, Picoseconds period,
                                Picoseconds slot_duration);

enum class Execution { serial, parallel };

struct EngineOptions {
  Execution execution = Execution::serial;
  int threads = 0;  // parallel only; 0 = OpenMP default
  Picoseconds feedback_latency{0};
  Picoseconds trace_stride{1'000'000};  // 0 = breakpoint rows only
  bool record_events = true;            // per-event records (counters are always kept)
  std::uint64_t seed = 0;
};

struct CrossingRecord {
  Picoseconds time{0};
  Crossing direction = Crossing::upward;
};

struct ResetRecord {
  Picoseconds time{0};
  Picoseconds duration{0};
};

struct TraceRow {
  Picoseconds time{0};
  std::uint32_t neuron_id = 0;
  double v_syn = 0.0;
  double v_mem = 0.0;
  bool exc = false;
  bool inh = false;
  bool rst = false;
  bool aer_active = false;
  bool spike = false;

  bool operator==(const TraceRow&) const = default;
};

struct EventCounts {
  std::uint64_t scheduled = 0;  // spike events entering a queue, including resets
  std::uint64_t excitatory = 0;
  std::uint64_t inhibitory = 0;
  std::uint64_t resets = 0;
  std::uint64_t pulse_ends = 0;
  std::uint64_t scans = 0;
  std::uint64_t active_samples = 0;
  std::uint64_t crossings_up = 0;
  std::uint64_t crossings_down = 0;
  std::uint64_t intervals = 0;  // calls into the integrator
  std::uint64_t trace_rows = 0;

  std::uint64_t applied() const { return excitatory + inhibitory + resets; }
  EventCounts& operator+=(const EventCounts& o);
  bool operator==(const EventCounts&) const = default;
};

struct NeuronRecord {
  std::vector<CrossingRecord> crossings;
  std::vector<Picoseconds> active_samples;
  std::vector<ResetRecord> resets;
  std::vector<TraceRow> trace;
  EventCounts counts;
  std::size_t peak_queue_depth = 0;

  std::vector<Picoseconds> spike_times() const;
};

class NeuronUnit {
 public:
  static constexpr Picoseconds kNever{std::numeric_limits<std::int64_t>::max()};

  NeuronUnit(std::uint32_t id, const NeuronSetup& setup, const ScanSchedule* bus, std::uint32_t slot_index,
             const AddressCodec* codec, const std::vector<StimulusTrain>* trains,
             std::vector<std::size_t> train_ids, const EngineOptions* opts);

  struct Next {
    Picoseconds time = kNever;
    int rank = 0;
  };
  Next next() const;
  // Applies the earliest pending event. Errors are rethrown with neuron and time context.
  void process_next();
  void schedule(const SpikeEvent& e);

  std::uint32_t id() const { return id_; }
  Picoseconds state_time() const { return t_state_; }
  NeuronState state_at(Picoseconds t) const;
  const NeuronRecord& record() const { return rec_; }
  const BiasConfig& bias() const { return cfg_; }
  const ControllerState& controller() const { return ctrl_; }
  std::size_t pending() const { return queue_.size(); }

 private:
  void advance(Picoseconds t);
  void apply(Picoseconds t, int rank);
  void push_train_event(std::size_t cursor);
  void refresh_drive(Picoseconds t);
  void write_row(Picoseconds t, bool active_sample);

  std::uint32_t id_;
  BiasConfig cfg_;
  ControllerState ctrl_;
  const ScanSchedule* bus_;
  std::uint32_t slot_index_;
  const AddressCodec* codec_;
  const std::vector<StimulusTrain>* trains_;
  const EngineOptions* opts_;
  bool traced_;

  NeuronState state_;
  Picoseconds t_state_{0};
  DriveInput drive_;
  std::vector<PulseWindow> windows_;
  EventQueue queue_;
  struct Cursor {
    std::size_t train;
    std::uint64_t k;
  };
  std::vector<Cursor> cursors_;
  Picoseconds next_scan_{0};
  Picoseconds next_trace_{0};
  bool spike_since_row_ = false;
  NeuronRecord rec_;
};

class Simulation {
 public:
  Simulation(std::vector<NeuronSetup> neurons, std::vector<ScanBus> buses, std::vector<StimulusTrain> trains,
             EngineOptions opts);
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  // Throws ScheduleError for past events or unknown neurons.
  void schedule(SpikeEvent e);
  // Processes every breakpoint with time <= t_end.
  void run_until(Picoseconds t_end);

  Picoseconds now() const { return now_; }
  std::size_t size() const { return units_.size(); }
  NeuronState state(std::uint32_t neuron_id) const;
  const NeuronUnit& unit(std::uint32_t neuron_id) const { return units_.at(neuron_id); }
  const std::vector<ScanBus>& buses() const { return buses_; }
  const EngineOptions& options() const { return opts_; }
  EventCounts counts() const;
  std::size_t peak_queue_depth() const;

 private:
  void run_serial(Picoseconds t_end);
  void run_parallel(Picoseconds t_end);

  EngineOptions opts_;
  std::vector<StimulusTrain> trains_;
  std::vector<ScanBus> buses_;
  std::vector<AddressCodec> codecs_;
  std::vector<NeuronUnit> units_;
  Picoseconds now_{0};
};

}  // namespace cbn
