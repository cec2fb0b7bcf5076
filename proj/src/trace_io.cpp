#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "cbn/scenario.hpp"

namespace cbn {

namespace {

constexpr const char* kHeader = "time_ps,neuron_id,v_syn,v_mem,exc,inh,rst,aer_active,spike";

std::string fmt_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

bool parse_flag(const std::string& s, std::size_t line) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw std::runtime_error("trace line " + std::to_string(line) + ": flag must be 0 or 1, got '" + s + "'");
}

}  // namespace

void write_trace(const std::vector<TraceRow>& rows, std::ostream& out) {
  out << kHeader << '\n';
  std::string line;
  for (const auto& r : rows) {
    line.clear();
    line += std::to_string(r.time.count());
    line += ',';
    line += std::to_string(r.neuron_id);
    line += ',';
    line += fmt_g9(r.v_syn);
    line += ',';
    line += fmt_g9(r.v_mem);
    for (bool f : {r.exc, r.inh, r.rst, r.aer_active, r.spike}) {
      line += ',';
      line += f ? '1' : '0';
    }
    line += '\n';
    out << line;
  }
  if (!out) throw std::runtime_error("failed writing trace");
}

void write_trace(const std::vector<TraceRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_trace(rows, out);
}

std::vector<TraceRow> read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw std::runtime_error("trace: missing or unexpected header");
  std::vector<TraceRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw std::runtime_error("trace line " + std::to_string(n) + ": expected 9 fields");
    TraceRow r;
    try {
      r.time = Picoseconds{std::stoll(f[0])};
      r.neuron_id = static_cast<std::uint32_t>(std::stoul(f[1]));
      r.v_syn = std::stod(f[2]);
      r.v_mem = std::stod(f[3]);
    } catch (const std::logic_error&) {
      throw std::runtime_error("trace line " + std::to_string(n) + ": malformed number");
    }
    r.exc = parse_flag(f[4], n);
    r.inh = parse_flag(f[5], n);
    r.rst = parse_flag(f[6], n);
    r.aer_active = parse_flag(f[7], n);
    r.spike = parse_flag(f[8], n);
    rows.push_back(r);
  }
  return rows;
}

std::vector<std::filesystem::path> write_plots(const std::vector<TraceRow>& rows, const BiasConfig& biases,
                                               const std::filesystem::path& dir) {
  std::map<std::uint32_t, std::vector<const TraceRow*>> by_neuron;
  for (const auto& r : rows) by_neuron[r.neuron_id].push_back(&r);
  std::filesystem::create_directories(dir);

  constexpr double W = 900, left = 60, right = 20, plot_w = W - left - right;
  constexpr double v_top = 20, v_h = 260, pulse_top = 300, pulse_h = 60, spike_top = 380, spike_h = 40;
  constexpr double H = spike_top + spike_h + 40;

  std::vector<std::filesystem::path> written;
  for (const auto& [id, pts] : by_neuron) {
    double t0 = static_cast<double>(pts.front()->time.count());
    double t1 = std::max(t0 + 1.0, static_cast<double>(pts.back()->time.count()));
    auto x = [&](Picoseconds t) { return left + plot_w * (static_cast<double>(t.count()) - t0) / (t1 - t0); };
    auto y = [&](double v) { return v_top + v_h * (1.0 - v / biases.vdd); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << left << "\" y=\"14\">neuron " << id << "</text>\n";
    svg << "<line x1=\"" << left << "\" x2=\"" << W - right << "\" y1=\"" << y(biases.v_threshold) << "\" y2=\""
        << y(biases.v_threshold) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    for (auto [name, colour, pick] :
         {std::tuple{"V_syn", "green", 0}, std::tuple{"V_mem", "#d0309c", 1}}) {
      svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1\" points=\"";
      for (const auto* r : pts) svg << x(r->time) << ',' << y(pick == 0 ? r->v_syn : r->v_mem) << ' ';
      svg << "\"/>\n";
      svg << "<text x=\"" << W - right - 60 << "\" y=\"" << v_top + 14 * (pick + 1) << "\" fill=\"" << colour
          << "\">" << name << "</text>\n";
    }
    // Pulse lanes: excitatory, inhibitory, reset.
    const char* lane_colour[] = {"#c03030", "#e08020", "#606060"};
    for (int lane = 0; lane < 3; ++lane) {
      double ly = pulse_top + lane * (pulse_h / 3);
      for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        bool on = lane == 0 ? pts[i]->exc : lane == 1 ? pts[i]->inh : pts[i]->rst;
        if (!on) continue;
        double xa = x(pts[i]->time), xb = std::max(xa + 1.0, x(pts[i + 1]->time));
        svg << "<rect x=\"" << xa << "\" y=\"" << ly << "\" width=\"" << xb - xa << "\" height=\"" << pulse_h / 3 - 4
            << "\" fill=\"" << lane_colour[lane] << "\"/>\n";
      }
    }
    for (const auto* r : pts) {
      if (r->spike)
        svg << "<line x1=\"" << x(r->time) << "\" x2=\"" << x(r->time) << "\" y1=\"" << spike_top << "\" y2=\""
            << spike_top + spike_h / 2 << "\" stroke=\"blue\"/>\n";
      if (r->aer_active)
        svg << "<circle cx=\"" << x(r->time) << "\" cy=\"" << spike_top + spike_h * 0.8 << "\" r=\"2\" fill=\"navy\"/>\n";
    }
    svg << "<text x=\"" << left << "\" y=\"" << H - 10 << "\">" << format_time(pts.front()->time) << "</text>\n";
    svg << "<text x=\"" << W - right - 60 << "\" y=\"" << H - 10 << "\">" << format_time(pts.back()->time)
        << "</text>\n</svg>\n";

    auto path = dir / ("neuron_" + std::to_string(id) + ".svg");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << svg.str();
    written.push_back(path);
  }
  return written;
}

}  // namespace cbn
