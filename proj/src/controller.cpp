#include "cbn/controller.hpp"

#include <algorithm>

#include "cbn/errors.hpp"

namespace cbn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

void validate(const ControllerMode& mode) {
  std::visit(overloaded{
                 [](const Passive&) {},
                 [](const Tonic& m) {
                   if (m.rst_duration.count() <= 0) throw ConfigError("tonic rst_duration must be > 0");
                 },
                 [](const Burst& m) {
                   if (m.spikes_per_burst < 1) throw ConfigError("burst spikes_per_burst must be >= 1");
                   if (m.rst_duration.count() <= 0) throw ConfigError("burst rst_duration must be > 0");
                 },
                 [](const Adaptation& m) {
                   if (m.rst_init.count() <= 0) throw ConfigError("adaptation rst_init must be > 0");
                   if (m.rst_increment.count() < 0) throw ConfigError("adaptation rst_increment must be >= 0");
                   if (m.rst_max < m.rst_init) throw ConfigError("adaptation requires rst_init <= rst_max");
                 },
             },
             mode);
}

const char* mode_name(const ControllerMode& mode) {
  return std::visit(overloaded{
                        [](const Passive&) { return "passive"; },
                        [](const Tonic&) { return "tonic"; },
                        [](const Burst&) { return "burst"; },
                        [](const Adaptation&) { return "adaptation"; },
                    },
                    mode);
}

ControllerState ControllerState::initial(const ControllerMode& mode) {
  ControllerState s;
  s.mode = mode;
  if (auto* a = std::get_if<Adaptation>(&mode)) s.current_rst = a->rst_init;
  return s;
}

ControllerStep on_sample(ControllerState st, const AerSample& s) {
  std::optional<ResetCommand> cmd;
  auto emit = [&](Picoseconds d) { cmd = ResetCommand{s.neuron_id, s.time, d}; };

  std::visit(overloaded{
                 [&](const Passive&) {},
                 [&](const Tonic& m) {
                   if (s.active) emit(m.rst_duration);
                   st.consecutive_active = 0;
                 },
                 [&](const Burst& m) {
                   if (!s.active) {
                     st.consecutive_active = 0;
                     return;
                   }
                   if (++st.consecutive_active >= m.spikes_per_burst) {
                     emit(m.rst_duration);
                     st.consecutive_active = 0;
                   }
                 },
                 [&](const Adaptation& m) {
                   if (s.active) {
                     st.consecutive_inactive = 0;
                     emit(st.current_rst);
                     st.current_rst = std::min(st.current_rst + m.rst_increment, m.rst_max);
                     return;
                   }
                   ++st.consecutive_inactive;
                   if (m.decay_after_inactive > 0 && st.consecutive_inactive >= m.decay_after_inactive)
                     st.current_rst = m.rst_init;
                 },
             },
             st.mode);
  return {st, cmd};
}

SpikeEvent command_to_event(const ResetCommand& c, Picoseconds latency) {
  SpikeEvent e;
  e.time = c.issue_time + latency;
  e.neuron_id = c.neuron_id;
  e.kind = SpikeKind::reset;
  e.duration = c.duration;
  return e;
}

}  // namespace cbn
