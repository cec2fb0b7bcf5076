#include "cbn/engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <queue>
#include <stdexcept>
#include <string>

#include "cbn/errors.hpp"
#include "cbn/random.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cbn {

namespace {

// Tie-break rank of internal actions at one instant. Pulse ends come first so a
// back-to-back pulse is not double counted; spike kinds keep their queue order.
constexpr int kRankPulseEnd = 0;
constexpr int kRankSpike = 1;  // + SpikeKind
constexpr int kRankScan = 4;
constexpr int kRankTrace = 5;

const char* rank_name(int rank) {
  switch (rank) {
    case kRankPulseEnd: return "pulse end";
    case kRankSpike + 0: return "reset pulse start";
    case kRankSpike + 1: return "inhibitory pulse start";
    case kRankSpike + 2: return "excitatory pulse start";
    case kRankScan: return "scan slot";
    case kRankTrace: return "trace tick";
  }
  return "event";
}

double amplitude(SpikeKind kind, const BiasConfig& cfg) {
  switch (kind) {
    case SpikeKind::excitatory: return cfg.i_pulse_exc;
    case SpikeKind::inhibitory: return cfg.i_pulse_inh;
    case SpikeKind::reset: return cfg.i_pulse_rst;
  }
  return 0.0;
}

}  // namespace

Picoseconds train_event_time(const StimulusTrain& train, std::size_t train_index, std::uint64_t k,
                             std::uint64_t seed) {
  Picoseconds t = train.start + static_cast<std::int64_t>(k) * train.interval;
  if (train.jitter.count() > 0) {
    double u = to_unit(hash_key(seed, 0x57494d55ULL, train_index, k));
    t += Picoseconds{static_cast<std::int64_t>(u * static_cast<double>(train.jitter.count()))};
  }
  return t;
}

std::vector<ScanBus> make_buses(std::uint32_t n_neurons, std::uint32_t n_buses, Picoseconds period,
                                Picoseconds slot_duration) {
  if (n_buses == 0) throw ConfigError("at least one scan bus is required");
  std::vector<ScanBus> buses;
  if (n_neurons == 0) {
    buses.push_back({0, ScanSchedule(0, period, slot_duration)});
    return buses;
  }
  std::uint32_t per_bus = (n_neurons + n_buses - 1) / n_buses;
  for (std::uint32_t first = 0; first < n_neurons; first += per_bus)
    buses.push_back({first, ScanSchedule(std::min(per_bus, n_neurons - first), period, slot_duration)});
  return buses;
}

EventCounts& EventCounts::operator+=(const EventCounts& o) {
  scheduled += o.scheduled;
  excitatory += o.excitatory;
  inhibitory += o.inhibitory;
  resets += o.resets;
  pulse_ends += o.pulse_ends;
  scans += o.scans;
  active_samples += o.active_samples;
  crossings_up += o.crossings_up;
  crossings_down += o.crossings_down;
  intervals += o.intervals;
  trace_rows += o.trace_rows;
  return *this;
}

std::vector<Picoseconds> NeuronRecord::spike_times() const {
  std::vector<Picoseconds> out;
  for (const auto& c : crossings)
    if (c.direction == Crossing::upward) out.push_back(c.time);
  return out;
}

NeuronUnit::NeuronUnit(std::uint32_t id, const NeuronSetup& setup, const ScanSchedule* bus,
                       std::uint32_t slot_index, const AddressCodec* codec, const std::vector<StimulusTrain>* trains,
                       std::vector<std::size_t> train_ids, const EngineOptions* opts)
    : id_(id),
      cfg_(setup.bias),
      ctrl_(ControllerState::initial(setup.mode)),
      bus_(bus),
      slot_index_(slot_index),
      codec_(codec),
      trains_(trains),
      opts_(opts),
      traced_(setup.traced) {
  state_ = setup.initial ? *setup.initial : steady_state(cfg_);
  next_scan_ = bus_->slot_time(slot_index_, 0);
  next_trace_ = traced_ ? Picoseconds{0} : kNever;
  for (auto t : train_ids) {
    cursors_.push_back({t, 0});
    push_train_event(cursors_.size() - 1);
  }
}

void NeuronUnit::push_train_event(std::size_t cursor) {
  auto& c = cursors_[cursor];
  const auto& train = (*trains_)[c.train];
  if (train.count && c.k >= *train.count) return;
  SpikeEvent e;
  e.time = train_event_time(train, c.train, c.k, opts_->seed);
  e.neuron_id = id_;
  e.kind = train.kind;
  e.duration = train.duration;
  e.source = static_cast<std::uint32_t>(cursor + 1);
  ++c.k;
  schedule(e);
}

void NeuronUnit::schedule(const SpikeEvent& e) {
  queue_.schedule(e);
  ++rec_.counts.scheduled;
  rec_.peak_queue_depth = std::max(rec_.peak_queue_depth, queue_.size());
}

NeuronUnit::Next NeuronUnit::next() const {
  Next n;
  auto take = [&](Picoseconds t, int rank) {
    if (t < n.time || (t == n.time && rank < n.rank)) n = {t, rank};
  };
  for (const auto& w : windows_) take(w.end, kRankPulseEnd);
  if (!queue_.empty()) take(queue_.top().time, kRankSpike + static_cast<int>(queue_.top().kind));
  take(next_scan_, kRankScan);
  take(next_trace_, kRankTrace);
  return n;
}

NeuronState NeuronUnit::state_at(Picoseconds t) const {
  if (t <= t_state_) return state_;
  return step(state_, drive_, t - t_state_, cfg_).state;
}

void NeuronUnit::advance(Picoseconds t) {
  if (t <= t_state_) return;
  StepResult r = step(state_, drive_, t - t_state_, cfg_);
  ++rec_.counts.intervals;
  auto stamp = [&](const ThresholdCrossing& c) {
    auto off = static_cast<std::int64_t>(std::llround(c.offset * 1e12));
    off = std::clamp<std::int64_t>(off, 1, (t - t_state_).count());
    return t_state_ + Picoseconds{off};
  };
  std::array<CrossingRecord, 2> found{};
  std::size_t n_found = 0;
  if (r.up) found[n_found++] = {stamp(*r.up), Crossing::upward};
  if (r.down) found[n_found++] = {stamp(*r.down), Crossing::downward};
  if (n_found == 2 && r.down->offset < r.up->offset) std::swap(found[0], found[1]);
  for (std::size_t i = 0; i < n_found; ++i) {
    const auto& c = found[i];
    if (c.direction == Crossing::upward) {
      ++rec_.counts.crossings_up;
      spike_since_row_ = true;
    } else {
      ++rec_.counts.crossings_down;
    }
    if (opts_->record_events) rec_.crossings.push_back(c);
  }
  state_ = r.state;
  t_state_ = t;
}

void NeuronUnit::refresh_drive(Picoseconds t) { drive_ = active_drive(t, windows_); }

void NeuronUnit::write_row(Picoseconds t, bool active_sample) {
  auto& rows = rec_.trace;
  if (rows.empty() || rows.back().time != t) {
    rows.push_back({t, id_, state_.v_syn, state_.v_mem});
    ++rec_.counts.trace_rows;
  }
  auto& row = rows.back();
  row.exc = drive_.i_exc > 0.0;
  row.inh = drive_.i_inh > 0.0;
  row.rst = drive_.i_rst > 0.0;
  row.aer_active = row.aer_active || active_sample;
  row.spike = row.spike || spike_since_row_;
  spike_since_row_ = false;
}

void NeuronUnit::process_next() {
  Next n = next();
  try {
    advance(n.time);
    apply(n.time, n.rank);
  } catch (const std::exception& ex) {
    throw std::runtime_error("neuron " + std::to_string(id_) + " at " + format_time(n.time) + " (" +
                             rank_name(n.rank) + "): " + ex.what());
  }
}

void NeuronUnit::apply(Picoseconds t, int rank) {
  bool active_sample = false;
  if (rank == kRankPulseEnd) {
    auto ended = std::remove_if(windows_.begin(), windows_.end(), [&](const PulseWindow& w) { return w.end == t; });
    rec_.counts.pulse_ends += static_cast<std::uint64_t>(windows_.end() - ended);
    windows_.erase(ended, windows_.end());
    refresh_drive(t);
  } else if (rank == kRankScan) {
    AerSample s{t, id_, codec_->encode(slot_index_), state_.v_mem >= cfg_.v_threshold};
    ++rec_.counts.scans;
    if (s.active) {
      ++rec_.counts.active_samples;
      if (opts_->record_events) rec_.active_samples.push_back(t);
      active_sample = true;
    }
    auto [next_ctrl, cmd] = on_sample(ctrl_, s);
    ctrl_ = next_ctrl;
    if (cmd) {
      if (opts_->record_events) rec_.resets.push_back({cmd->issue_time + opts_->feedback_latency, cmd->duration});
      schedule(command_to_event(*cmd, opts_->feedback_latency));
    }
    next_scan_ += bus_->period();
  } else if (rank == kRankTrace) {
    next_trace_ = opts_->trace_stride.count() > 0 ? next_trace_ + opts_->trace_stride : kNever;
  } else {
    SpikeEvent e = queue_.pop();
    windows_.push_back({t, t + e.duration, e.kind, amplitude(e.kind, cfg_)});
    switch (e.kind) {
      case SpikeKind::excitatory: ++rec_.counts.excitatory; break;
      case SpikeKind::inhibitory: ++rec_.counts.inhibitory; break;
      case SpikeKind::reset: ++rec_.counts.resets; break;
    }
    if (e.source > 0) push_train_event(e.source - 1);
    refresh_drive(t);
  }
  if (traced_) write_row(t, active_sample);
}

Simulation::Simulation(std::vector<NeuronSetup> neurons, std::vector<ScanBus> buses,
                       std::vector<StimulusTrain> trains, EngineOptions opts)
    : opts_(opts), trains_(std::move(trains)), buses_(std::move(buses)) {
  const auto n = static_cast<std::uint32_t>(neurons.size());
  std::vector<int> bus_of(n, -1);
  for (std::size_t b = 0; b < buses_.size(); ++b) {
    const auto& bus = buses_[b];
    for (std::uint32_t i = 0; i < bus.schedule.n_neurons(); ++i) {
      std::uint32_t id = bus.first_neuron + i;
      if (id >= n || bus_of[id] != -1) throw ConfigError("scan buses must partition the neuron array");
      bus_of[id] = static_cast<int>(b);
    }
  }
  for (std::uint32_t id = 0; id < n; ++id)
    if (bus_of[id] < 0) throw ConfigError("neuron " + std::to_string(id) + " is not on any scan bus");
  for (const auto& bus : buses_) codecs_.emplace_back(bus.schedule.n_neurons());

  std::vector<std::vector<std::size_t>> trains_of(n);
  for (std::size_t t = 0; t < trains_.size(); ++t) {
    const auto& tr = trains_[t];
    if (tr.duration.count() <= 0) throw ConfigError("stimulus duration must be > 0");
    if (tr.interval.count() <= 0) throw ConfigError("stimulus interval must be > 0");
    if (tr.start.count() < 0) throw ConfigError("stimulus start must be >= 0");
    if (tr.jitter.count() < 0 || tr.jitter >= tr.interval) throw ConfigError("stimulus jitter must be in [0, interval)");
    for (auto [lo, hi] : tr.neurons) {
      if (lo > hi || hi >= n) throw ConfigError("stimulus references neuron ids outside the array");
      for (std::uint32_t id = lo; id <= hi; ++id) trains_of[id].push_back(t);
    }
  }
  for (auto& ids : trains_of) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }

  units_.reserve(n);
  for (std::uint32_t id = 0; id < n; ++id) {
    neurons[id].bias.validate();
    validate(neurons[id].mode);
    auto b = static_cast<std::size_t>(bus_of[id]);
    try {
      units_.emplace_back(id, neurons[id], &buses_[b].schedule, id - buses_[b].first_neuron, &codecs_[b], &trains_,
                          std::move(trains_of[id]), &opts_);
    } catch (const NoSteadyStateError& e) {
      throw NoSteadyStateError("neuron " + std::to_string(id) + ": " + e.what());
    }
  }
}

void Simulation::schedule(SpikeEvent e) {
  if (e.neuron_id >= units_.size())
    throw ScheduleError("event targets unknown neuron " + std::to_string(e.neuron_id));
  if (e.time < now_)
    throw ScheduleError("event at " + format_time(e.time) + " is in the past (now " + format_time(now_) + ")");
  e.source = 0;
  units_[e.neuron_id].schedule(e);
}

void Simulation::run_until(Picoseconds t_end) {
  if (t_end < now_) throw ScheduleError("run_until target precedes the current time");
  if (opts_.execution == Execution::parallel)
    run_parallel(t_end);
  else
    run_serial(t_end);
  now_ = t_end;
}

// Reference path: one global queue of neurons keyed by their next breakpoint,
// which yields the (time, neuron_id, rank, seq) order exactly.
void Simulation::run_serial(Picoseconds t_end) {
  using Key = std::pair<Picoseconds, std::uint32_t>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
  for (auto& u : units_) {
    auto t = u.next().time;
    if (t <= t_end) ready.push({t, u.id()});
  }
  while (!ready.empty()) {
    auto [t, id] = ready.top();
    ready.pop();
    auto& u = units_[id];
    u.process_next();
    auto nt = u.next().time;
    if (nt <= t_end) ready.push({nt, id});
  }
}

// Neurons only interact through their own controller loop, so each one can run
// its whole timeline independently; the per-neuron event order is identical to
// the serial path, hence so are the results.
void Simulation::run_parallel(Picoseconds t_end) {
  const auto n = static_cast<std::int64_t>(units_.size());
  std::vector<std::exception_ptr> errors(units_.size());
#ifdef _OPENMP
  int threads = opts_.threads > 0 ? opts_.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
#endif
  for (std::int64_t i = 0; i < n; ++i) {
    auto& u = units_[static_cast<std::size_t>(i)];
    try {
      while (u.next().time <= t_end) u.process_next();
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

NeuronState Simulation::state(std::uint32_t neuron_id) const { return units_.at(neuron_id).state_at(now_); }

EventCounts Simulation::counts() const {
  EventCounts total;
  for (const auto& u : units_) total += u.record().counts;
  return total;
}

std::size_t Simulation::peak_queue_depth() const {
  std::size_t peak = 0;
  for (const auto& u : units_) peak = std::max(peak, u.record().peak_queue_depth);
  return peak;
}

}  // namespace cbn
