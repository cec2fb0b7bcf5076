#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <yaml-cpp/yaml.h>

#include "cbn/errors.hpp"
#include "cbn/random.hpp"
#include "cbn/scenario.hpp"

namespace cbn {

namespace {

using nlohmann::json;

constexpr Picoseconds kMs{1'000'000'000};
constexpr Picoseconds kNs{1'000};

[[noreturn]] void fail_at(const YAML::Node& node, const std::string& msg) {
  auto mark = node.Mark();
  if (mark.is_null()) throw ConfigError("config: " + msg);
  throw ConfigError("config line " + std::to_string(mark.line + 1) + ": " + msg);
}

template <class T>
T scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) fail_at(node, "'" + key + "' must be a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail_at(node, "'" + key + "' has an invalid value '" + node.Scalar() + "'");
  }
}

Picoseconds time_of(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) fail_at(node, "'" + key + "' must be a time such as 24ns or 1ms");
  try {
    return parse_time(node.Scalar());
  } catch (const std::invalid_argument& e) {
    fail_at(node, "'" + key + "': " + e.what());
  }
}

// Rejects keys outside `allowed` so that typos do not silently fall back to defaults.
void check_keys(const YAML::Node& map, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!map.IsMap()) fail_at(map, where + " must be a mapping");
  for (const auto& kv : map) {
    auto key = kv.first.Scalar();
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) fail_at(kv.first, "unknown key '" + key + "' in " + where);
  }
}

std::uint32_t id_of(const YAML::Node& node) { return scalar<std::uint32_t>(node, "neuron id"); }

IdRanges ranges_of(const YAML::Node& node, std::uint32_t n_neurons) {
  IdRanges out;
  auto add_range = [&](const YAML::Node& r) {
    check_keys(r, {"from", "to"}, "neuron range");
    if (!r["from"] || !r["to"]) fail_at(r, "neuron range needs 'from' and 'to'");
    out.emplace_back(id_of(r["from"]), id_of(r["to"]));
  };
  if (node.IsScalar() && node.Scalar() == "all") {
    if (n_neurons > 0) out.emplace_back(0, n_neurons - 1);
  } else if (node.IsScalar()) {
    auto id = id_of(node);
    out.emplace_back(id, id);
  } else if (node.IsMap()) {
    add_range(node);
  } else if (node.IsSequence()) {
    for (const auto& item : node) {
      if (item.IsMap()) {
        add_range(item);
      } else {
        auto id = id_of(item);
        out.emplace_back(id, id);
      }
    }
  } else {
    fail_at(node, "neurons must be 'all', an id, a list, or {from, to}");
  }
  return out;
}

ControllerMode mode_of_node(const YAML::Node& node, std::initializer_list<std::string_view> extra_keys = {}) {
  std::vector<std::string_view> allowed{"mode", "rst_duration", "spikes_per_burst", "rst_init", "rst_increment",
                                        "rst_max", "decay_after_inactive"};
  allowed.insert(allowed.end(), extra_keys.begin(), extra_keys.end());
  if (!node.IsMap()) fail_at(node, "controller must be a mapping");
  for (const auto& kv : node) {
    bool ok = false;
    for (auto a : allowed) ok = ok || kv.first.Scalar() == a;
    if (!ok) fail_at(kv.first, "unknown key '" + kv.first.Scalar() + "' in controller");
  }
  if (!node["mode"]) fail_at(node, "controller needs a 'mode'");
  auto name = scalar<std::string>(node["mode"], "mode");
  ControllerMode mode;
  if (name == "passive") {
    mode = Passive{};
  } else if (name == "tonic") {
    Tonic m;
    if (node["rst_duration"]) m.rst_duration = time_of(node["rst_duration"], "rst_duration");
    mode = m;
  } else if (name == "burst") {
    Burst m;
    if (node["spikes_per_burst"]) m.spikes_per_burst = scalar<std::uint32_t>(node["spikes_per_burst"], "spikes_per_burst");
    if (node["rst_duration"]) m.rst_duration = time_of(node["rst_duration"], "rst_duration");
    mode = m;
  } else if (name == "adaptation") {
    Adaptation m;
    if (node["rst_init"]) m.rst_init = time_of(node["rst_init"], "rst_init");
    if (node["rst_increment"]) m.rst_increment = time_of(node["rst_increment"], "rst_increment");
    if (node["rst_max"]) m.rst_max = time_of(node["rst_max"], "rst_max");
    if (node["decay_after_inactive"])
      m.decay_after_inactive = scalar<std::uint32_t>(node["decay_after_inactive"], "decay_after_inactive");
    mode = m;
  } else {
    fail_at(node["mode"], "unknown controller mode '" + name + "' (passive, tonic, burst, adaptation)");
  }
  try {
    validate(mode);
  } catch (const ConfigError& e) {
    fail_at(node, e.what());
  }
  return mode;
}

void read_biases(const YAML::Node& node, BiasConfig& b) {
  check_keys(node,
             {"vdd", "i_n0", "lambda_n", "i_p0", "lambda_p", "i_pulse_exc", "i_pulse_inh", "i_pulse_rst", "c_syn",
              "c_mem", "i_s", "v_on", "v_slope", "v_threshold", "diode_coupling"},
             "biases");
  auto num = [&](const char* key, double& field) {
    if (node[key]) field = scalar<double>(node[key], key);
  };
  num("vdd", b.vdd);
  num("i_n0", b.i_n0);
  num("lambda_n", b.lambda_n);
  num("i_p0", b.i_p0);
  num("lambda_p", b.lambda_p);
  num("i_pulse_exc", b.i_pulse_exc);
  num("i_pulse_inh", b.i_pulse_inh);
  num("i_pulse_rst", b.i_pulse_rst);
  num("c_syn", b.c_syn);
  num("c_mem", b.c_mem);
  num("i_s", b.i_s);
  num("v_on", b.v_on);
  num("v_slope", b.v_slope);
  num("v_threshold", b.v_threshold);
  if (node["diode_coupling"]) b.diode_coupling = scalar<bool>(node["diode_coupling"], "diode_coupling");
  try {
    b.validate();
  } catch (const ConfigError& e) {
    fail_at(node, e.what());
  }
}

StimulusTrain read_train(const YAML::Node& node, std::uint32_t n_neurons) {
  check_keys(node, {"kind", "neurons", "start", "interval", "count", "duration", "jitter"}, "stimulus entry");
  StimulusTrain t;
  if (!node["kind"]) fail_at(node, "stimulus entry needs a 'kind'");
  try {
    t.kind = spike_kind_from_string(scalar<std::string>(node["kind"], "kind"));
  } catch (const ConfigError& e) {
    fail_at(node["kind"], e.what());
  }
  t.neurons = node["neurons"] ? ranges_of(node["neurons"], n_neurons) : IdRanges{{0, n_neurons - 1}};
  if (node["start"]) t.start = time_of(node["start"], "start");
  if (node["interval"]) t.interval = time_of(node["interval"], "interval");
  if (node["duration"]) t.duration = time_of(node["duration"], "duration");
  if (node["jitter"]) t.jitter = time_of(node["jitter"], "jitter");
  if (node["count"] && !node["count"].IsNull()) t.count = scalar<std::uint64_t>(node["count"], "count");
  return t;
}

void read_mismatch(const YAML::Node& node, MismatchConfig& m) {
  check_keys(node, {"sigma", "seed"}, "mismatch");
  if (node["seed"]) m.seed = scalar<std::uint64_t>(node["seed"], "mismatch.seed");
  if (!node["sigma"]) return;
  const auto& s = node["sigma"];
  if (s.IsScalar()) {
    double v = scalar<double>(s, "mismatch.sigma");
    m.i_n0 = m.i_p0 = m.c_syn = m.c_mem = m.i_s = v;
    return;
  }
  check_keys(s, {"i_n0", "i_p0", "c_syn", "c_mem", "i_s"}, "mismatch.sigma");
  auto num = [&](const char* key, double& field) {
    if (s[key]) field = scalar<double>(s[key], key);
  };
  num("i_n0", m.i_n0);
  num("i_p0", m.i_p0);
  num("c_syn", m.c_syn);
  num("c_mem", m.c_mem);
  num("i_s", m.i_s);
}

json ranges_json(const IdRanges& r) {
  json out = json::array();
  for (auto [lo, hi] : r) {
    if (lo == hi)
      out.push_back(lo);
    else
      out.push_back({{"from", lo}, {"to", hi}});
  }
  return out;
}

json mode_json(const ControllerMode& mode) {
  json j;
  j["mode"] = mode_name(mode);
  if (auto* m = std::get_if<Tonic>(&mode)) j["rst_duration"] = format_time(m->rst_duration);
  if (auto* m = std::get_if<Burst>(&mode)) {
    j["spikes_per_burst"] = m->spikes_per_burst;
    j["rst_duration"] = format_time(m->rst_duration);
  }
  if (auto* m = std::get_if<Adaptation>(&mode)) {
    j["rst_init"] = format_time(m->rst_init);
    j["rst_increment"] = format_time(m->rst_increment);
    j["rst_max"] = format_time(m->rst_max);
    j["decay_after_inactive"] = m->decay_after_inactive;
  }
  return j;
}

bool in_ranges(const IdRanges& r, std::uint32_t id) {
  for (auto [lo, hi] : r)
    if (lo <= id && id <= hi) return true;
  return false;
}

}  // namespace

ControllerMode ScenarioConfig::mode_of(std::uint32_t neuron_id) const {
  ControllerMode mode = controller;
  for (const auto& o : controller_overrides)
    if (in_ranges(o.neurons, neuron_id)) mode = o.mode;
  return mode;
}

bool ScenarioConfig::traced(std::uint32_t neuron_id) const { return in_ranges(trace.neurons, neuron_id); }

void ScenarioConfig::validate() const {
  biases.validate();
  if (n_neurons == 0) throw ConfigError("n_neurons must be >= 1");
  if (duration.count() <= 0) throw ConfigError("duration must be > 0");
  if (scan_period.count() <= 0 || slot_duration.count() <= 0)
    throw ConfigError("scan period and slot duration must be > 0");
  if (scan_buses == 0) throw ConfigError("scan.buses must be >= 1");
  auto cap = ScanSchedule::max_slots(scan_period, slot_duration);
  auto per_bus = (static_cast<std::uint64_t>(n_neurons) + scan_buses - 1) / scan_buses;
  if (per_bus > cap)
    throw ConfigError("n_neurons = " + std::to_string(n_neurons) + " exceeds the slot budget of " +
                      std::to_string(scan_buses) + " scan bus(es): each bus holds at most " + std::to_string(cap) +
                      " neurons (" + format_time(scan_period) + " / " + format_time(slot_duration) + ")");
  if (feedback_latency.count() < 0) throw ConfigError("feedback_latency must be >= 0");
  if (trace.stride.count() < 0) throw ConfigError("trace.stride must be >= 0");
  cbn::validate(controller);
  auto check_ids = [&](const IdRanges& r, const char* what) {
    for (auto [lo, hi] : r)
      if (lo > hi || hi >= n_neurons)
        throw ConfigError(std::string(what) + " references neuron ids outside [0, n_neurons)");
  };
  for (const auto& o : controller_overrides) {
    cbn::validate(o.mode);
    check_ids(o.neurons, "controller_overrides");
  }
  for (const auto& s : stimulus) {
    check_ids(s.neurons, "stimulus");
    if (s.duration.count() <= 0) throw ConfigError("stimulus duration must be > 0");
    if (s.interval.count() <= 0) throw ConfigError("stimulus interval must be > 0");
    if (s.start.count() < 0) throw ConfigError("stimulus start must be >= 0");
    if (s.jitter.count() < 0 || s.jitter >= s.interval) throw ConfigError("stimulus jitter must be in [0, interval)");
  }
  check_ids(trace.neurons, "trace");
  for (double s : {mismatch.i_n0, mismatch.i_p0, mismatch.c_syn, mismatch.c_mem, mismatch.i_s})
    if (!(s >= 0.0)) throw ConfigError("mismatch sigma must be >= 0");
  steady_state(biases);
}

ScenarioConfig builtin_scenario(std::string_view name) {
  ScenarioConfig c;
  c.name = std::string(name);
  c.trace.neurons = {{0, 0}};
  auto train = [](SpikeKind kind, Picoseconds start, Picoseconds interval, std::optional<std::uint64_t> count,
                  Picoseconds duration) {
    StimulusTrain t;
    t.kind = kind;
    t.neurons = {{0, 0}};
    t.start = start;
    t.interval = interval;
    t.count = count;
    t.duration = duration;
    return t;
  };
  // Inputs start half a period after the neuron's scan slot.
  const Picoseconds onset = kMs / 2;
  if (name == "fig3a") {
    c.controller = Tonic{24 * kNs};
    c.stimulus = {train(SpikeKind::excitatory, onset, kMs, 4, 24 * kNs)};
    c.duration = 10 * kMs;
  } else if (name == "fig3b") {
    c.controller = Burst{5, 24 * kNs};
    c.stimulus = {train(SpikeKind::excitatory, onset, kMs, 4, 32 * kNs)};
    c.duration = 10 * kMs;
  } else if (name == "fig3c") {
    c.controller = Adaptation{3 * kNs, 3 * kNs, 32 * kNs, 0};
    c.stimulus = {train(SpikeKind::excitatory, onset, kMs, std::nullopt, 24 * kNs)};
    c.duration = 50 * kMs;
  } else if (name == "fig3d") {
    c.controller = Passive{};
    c.stimulus = {train(SpikeKind::excitatory, onset, 2 * kFig3dSpacing, 2, 24 * kNs),
                  train(SpikeKind::inhibitory, onset + kFig3dSpacing, 2 * kFig3dSpacing, 2, 24 * kNs)};
    c.duration = onset + 3 * kFig3dSpacing + 10 * kMs;
  } else if (name == "custom") {
    c.trace.neurons.clear();
  } else {
    throw ConfigError("unknown scenario '" + std::string(name) + "' (fig3a, fig3b, fig3c, fig3d, custom)");
  }
  return c;
}

ScenarioConfig load_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError("config parse error at line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (root.IsNull()) return builtin_scenario("custom");
  check_keys(root,
             {"scenario", "duration", "seed", "n_neurons", "execution", "threads", "biases", "scan", "controller",
              "controller_overrides", "feedback_latency", "stimulus", "trace", "mismatch"},
             "config");

  ScenarioConfig c = builtin_scenario("custom");
  if (root["scenario"]) {
    try {
      c = builtin_scenario(scalar<std::string>(root["scenario"], "scenario"));
    } catch (const ConfigError& e) {
      fail_at(root["scenario"], e.what());
    }
  }
  if (root["n_neurons"]) {
    c.n_neurons = scalar<std::uint32_t>(root["n_neurons"], "n_neurons");
    if (c.n_neurons == 0) fail_at(root["n_neurons"], "n_neurons must be >= 1");
  }
  if (root["duration"]) c.duration = time_of(root["duration"], "duration");
  if (root["seed"]) c.seed = scalar<std::uint64_t>(root["seed"], "seed");
  if (root["execution"]) {
    auto e = scalar<std::string>(root["execution"], "execution");
    if (e == "serial")
      c.execution = Execution::serial;
    else if (e == "parallel")
      c.execution = Execution::parallel;
    else
      fail_at(root["execution"], "execution must be 'serial' or 'parallel'");
  }
  if (root["threads"]) c.threads = scalar<int>(root["threads"], "threads");
  if (root["biases"]) read_biases(root["biases"], c.biases);
  if (const auto& scan = root["scan"]) {
    check_keys(scan, {"period", "slot_duration", "buses"}, "scan");
    if (scan["period"]) c.scan_period = time_of(scan["period"], "scan.period");
    if (scan["slot_duration"]) c.slot_duration = time_of(scan["slot_duration"], "scan.slot_duration");
    if (scan["buses"]) c.scan_buses = scalar<std::uint32_t>(scan["buses"], "scan.buses");
  }
  if (root["controller"]) c.controller = mode_of_node(root["controller"]);
  if (const auto& ov = root["controller_overrides"]) {
    if (!ov.IsSequence()) fail_at(ov, "controller_overrides must be a list");
    c.controller_overrides.clear();
    for (const auto& item : ov) {
      if (!item.IsMap() || !item["neurons"]) fail_at(item, "each controller override needs 'neurons'");
      c.controller_overrides.push_back({ranges_of(item["neurons"], c.n_neurons), mode_of_node(item, {"neurons"})});
    }
  }
  if (root["feedback_latency"]) c.feedback_latency = time_of(root["feedback_latency"], "feedback_latency");
  if (const auto& st = root["stimulus"]) {
    if (!st.IsSequence() && !st.IsNull()) fail_at(st, "stimulus must be a list");
    c.stimulus.clear();
    for (const auto& item : st) c.stimulus.push_back(read_train(item, c.n_neurons));
  }
  if (const auto& tr = root["trace"]) {
    check_keys(tr, {"neurons", "stride"}, "trace");
    if (tr["neurons"]) c.trace.neurons = tr["neurons"].IsNull() ? IdRanges{} : ranges_of(tr["neurons"], c.n_neurons);
    if (tr["stride"]) c.trace.stride = time_of(tr["stride"], "trace.stride");
  }
  if (root["mismatch"]) read_mismatch(root["mismatch"], c.mismatch);

  c.validate();
  return c;
}

ScenarioConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return load_config(buf.str());
}

json to_json(const ScenarioConfig& c) {
  json j;
  j["scenario"] = c.name;
  j["duration"] = format_time(c.duration);
  j["seed"] = c.seed;
  j["n_neurons"] = c.n_neurons;
  j["execution"] = c.execution == Execution::serial ? "serial" : "parallel";
  j["threads"] = c.threads;
  const auto& b = c.biases;
  j["biases"] = {{"vdd", b.vdd},
                 {"i_n0", b.i_n0},
                 {"lambda_n", b.lambda_n},
                 {"i_p0", b.i_p0},
                 {"lambda_p", b.lambda_p},
                 {"i_pulse_exc", b.i_pulse_exc},
                 {"i_pulse_inh", b.i_pulse_inh},
                 {"i_pulse_rst", b.i_pulse_rst},
                 {"c_syn", b.c_syn},
                 {"c_mem", b.c_mem},
                 {"i_s", b.i_s},
                 {"v_on", b.v_on},
                 {"v_slope", b.v_slope},
                 {"v_threshold", b.v_threshold},
                 {"diode_coupling", b.diode_coupling}};
  j["scan"] = {{"period", format_time(c.scan_period)},
               {"slot_duration", format_time(c.slot_duration)},
               {"buses", c.scan_buses}};
  j["controller"] = mode_json(c.controller);
  j["controller_overrides"] = json::array();
  for (const auto& o : c.controller_overrides) {
    auto m = mode_json(o.mode);
    m["neurons"] = ranges_json(o.neurons);
    j["controller_overrides"].push_back(m);
  }
  j["feedback_latency"] = format_time(c.feedback_latency);
  j["stimulus"] = json::array();
  for (const auto& s : c.stimulus) {
    json t = {{"kind", to_string(s.kind)},
              {"neurons", ranges_json(s.neurons)},
              {"start", format_time(s.start)},
              {"interval", format_time(s.interval)},
              {"duration", format_time(s.duration)},
              {"jitter", format_time(s.jitter)}};
    if (s.count) t["count"] = *s.count;
    j["stimulus"].push_back(t);
  }
  j["trace"] = {{"neurons", ranges_json(c.trace.neurons)}, {"stride", format_time(c.trace.stride)}};
  json mm = {{"sigma",
              {{"i_n0", c.mismatch.i_n0},
               {"i_p0", c.mismatch.i_p0},
               {"c_syn", c.mismatch.c_syn},
               {"c_mem", c.mismatch.c_mem},
               {"i_s", c.mismatch.i_s}}}};
  if (c.mismatch.seed) mm["seed"] = *c.mismatch.seed;
  j["mismatch"] = mm;
  return j;
}

std::vector<BiasConfig> apply_mismatch(const ScenarioConfig& cfg) {
  std::vector<BiasConfig> out(cfg.n_neurons, cfg.biases);
  if (!cfg.mismatch.any()) return out;
  const std::uint64_t seed = cfg.mismatch.seed.value_or(cfg.seed);
  struct Param {
    double sigma;
    double BiasConfig::*field;
  };
  const Param params[] = {{cfg.mismatch.i_n0, &BiasConfig::i_n0},
                          {cfg.mismatch.i_p0, &BiasConfig::i_p0},
                          {cfg.mismatch.c_syn, &BiasConfig::c_syn},
                          {cfg.mismatch.c_mem, &BiasConfig::c_mem},
                          {cfg.mismatch.i_s, &BiasConfig::i_s}};
  for (std::uint32_t n = 0; n < cfg.n_neurons; ++n) {
    for (std::uint64_t p = 0; p < std::size(params); ++p) {
      if (params[p].sigma == 0.0) continue;
      // Truncated well below zero so a parameter can never change sign.
      double factor = std::max(0.1, 1.0 + params[p].sigma * keyed_normal(seed, n, p));
      out[n].*params[p].field *= factor;
    }
  }
  return out;
}

}  // namespace cbn
