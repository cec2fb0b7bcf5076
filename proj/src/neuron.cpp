#include "cbn/neuron.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "cbn/errors.hpp"

namespace cbn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Error control for the coupled (level shifter conducting) regime.
constexpr double kAtol = 1e-10;
constexpr double kRtol = 1e-9;
constexpr double kMinStep = 1e-18;

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(std::string("bias invariant violated: ") + what);
}

// dX/dt = r - k*X, the shape of both node equations while the level shifter is off.
struct Affine {
  double r;
  double k;
  bool pinned;  // sitting on a rail and pushed outward: stays there
};

double clamp_rail(double v, double vdd) { return std::min(std::max(v, 0.0), vdd); }

// (1 - e^-x) / x, well conditioned near 0.
double phi(double x) { return x == 0.0 ? 1.0 : -std::expm1(-x) / x; }

Affine make_affine(double r, double k, double x0, double vdd) {
  double slope = r - k * x0;
  bool pinned = (x0 <= 0.0 && slope < 0.0) || (x0 >= vdd && slope > 0.0);
  return {r, k, pinned};
}

Affine syn_affine(const NeuronState& s, const DriveInput& d, const BiasConfig& c) {
  return make_affine((d.i_exc - d.i_inh - c.i_n0) / c.c_syn, c.i_n0 * c.lambda_n / c.c_syn, s.v_syn, c.vdd);
}

Affine mem_affine(const NeuronState& s, const DriveInput& d, const BiasConfig& c) {
  return make_affine((c.i_p0 * (1.0 + c.lambda_p * c.vdd) - d.i_rst) / c.c_mem, c.i_p0 * c.lambda_p / c.c_mem,
                     s.v_mem, c.vdd);
}

double affine_value(const Affine& n, double x0, double t) {
  if (n.pinned) return x0;
  return x0 + (n.r - n.k * x0) * t * phi(n.k * t);
}

double affine_slope(const Affine& n, double x0, double t) {
  if (n.pinned) return 0.0;
  return (n.r - n.k * x0) * std::exp(-n.k * t);
}

// First time the affine trajectory reaches `level`, or +inf.
double affine_hit(const Affine& n, double x0, double level) {
  if (n.pinned) return kInf;
  double a = n.r - n.k * x0;
  double dl = level - x0;
  if (dl == 0.0) return 0.0;
  if (a == 0.0 || (dl > 0.0) != (a > 0.0)) return kInf;
  if (n.k == 0.0) return dl / a;
  double q = dl * n.k / a;
  if (q >= 1.0) return kInf;
  return -std::log1p(-q) / n.k;
}

double rail_hit(const Affine& n, double x0, double vdd) {
  if (n.pinned) return kInf;
  double a = n.r - n.k * x0;
  if (a > 0.0) return affine_hit(n, x0, vdd);
  if (a < 0.0) return affine_hit(n, x0, 0.0);
  return kInf;
}

struct OffSegment {
  Affine syn;
  Affine mem;
  NeuronState s0;
  double v_on;

  double gap(double t) const {
    return affine_value(mem, s0.v_mem, t) - affine_value(syn, s0.v_syn, t) - v_on;
  }
  double gap_slope(double t) const { return affine_slope(mem, s0.v_mem, t) - affine_slope(syn, s0.v_syn, t); }
};

// Smallest t in (0, horizon] at which the diode turns on, i.e. the gap becomes
// positive; +inf if it stays off. The gap is a difference of two exponentials
// and so has at most one interior extremum.
double onset_time(const OffSegment& seg, double horizon) {
  std::array<double, 3> knots{0.0, horizon, horizon};
  int n_knots = 2;
  double as = seg.syn.pinned ? 0.0 : seg.syn.r - seg.syn.k * seg.s0.v_syn;
  double am = seg.mem.pinned ? 0.0 : seg.mem.r - seg.mem.k * seg.s0.v_mem;
  double ks = seg.syn.pinned ? 0.0 : seg.syn.k;
  double km = seg.mem.pinned ? 0.0 : seg.mem.k;
  if (am != 0.0 && as != 0.0 && (am > 0.0) == (as > 0.0) && ks != km) {
    double t_ext = std::log(as / am) / (ks - km);
    if (t_ext > 0.0 && t_ext < horizon) {
      knots[1] = t_ext;
      knots[2] = horizon;
      n_knots = 3;
    }
  }
  for (int i = 1; i < n_knots; ++i) {
    double lo = knots[i - 1];
    double hi = knots[i];
    if (seg.gap(hi) <= 0.0) continue;
    // gap(lo) <= 0 holds: at i == 1 by the caller's regime, later by the previous iteration.
    for (int it = 0; it < 200 && hi - lo > 1e-18 * std::max(1.0, hi); ++it) {
      double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (seg.gap(mid) > 0.0)
        hi = mid;
      else
        lo = mid;
    }
    return hi;
  }
  return kInf;
}

struct Deriv {
  double syn;
  double mem;
};

Deriv rhs(double vs, double vm, const DriveInput& d, const BiasConfig& c) {
  CurrentBreakdown cb = currents({vs, vm}, d, c);
  return {cb.i_syn_net / c.c_syn, cb.i_mem_net / c.c_mem};
}

double gap_of(double vs, double vm, const BiasConfig& c) { return vm - vs - c.v_on; }

void check_finite(const NeuronState& s) {
  if (!std::isfinite(s.v_syn) || !std::isfinite(s.v_mem))
    throw ModelError("non-finite neuron state (v_syn=" + std::to_string(s.v_syn) +
                     ", v_mem=" + std::to_string(s.v_mem) + ")");
}

void note_crossing(StepResult& res, std::optional<Crossing> dir, double when) {
  if (!dir) return;
  auto& slot = *dir == Crossing::upward ? res.up : res.down;
  if (!slot) slot = ThresholdCrossing{*dir, when};
}

// Dormand-Prince 5(4) tableau.
namespace dp {
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
}  // namespace dp

struct Trial {
  double vs;
  double vm;
  Deriv f1;
  double err;
};

Trial dp_trial(double vs, double vm, const Deriv& k1, double h, const DriveInput& d, const BiasConfig& c) {
  using namespace dp;
  Deriv k2 = rhs(vs + h * a21 * k1.syn, vm + h * a21 * k1.mem, d, c);
  Deriv k3 = rhs(vs + h * (a31 * k1.syn + a32 * k2.syn), vm + h * (a31 * k1.mem + a32 * k2.mem), d, c);
  Deriv k4 = rhs(vs + h * (a41 * k1.syn + a42 * k2.syn + a43 * k3.syn),
                 vm + h * (a41 * k1.mem + a42 * k2.mem + a43 * k3.mem), d, c);
  Deriv k5 = rhs(vs + h * (a51 * k1.syn + a52 * k2.syn + a53 * k3.syn + a54 * k4.syn),
                 vm + h * (a51 * k1.mem + a52 * k2.mem + a53 * k3.mem + a54 * k4.mem), d, c);
  Deriv k6 = rhs(vs + h * (a61 * k1.syn + a62 * k2.syn + a63 * k3.syn + a64 * k4.syn + a65 * k5.syn),
                 vm + h * (a61 * k1.mem + a62 * k2.mem + a63 * k3.mem + a64 * k4.mem + a65 * k5.mem), d, c);
  double ys = vs + h * (b1 * k1.syn + b3 * k3.syn + b4 * k4.syn + b5 * k5.syn + b6 * k6.syn);
  double ym = vm + h * (b1 * k1.mem + b3 * k3.mem + b4 * k4.mem + b5 * k5.mem + b6 * k6.mem);
  Deriv k7 = rhs(ys, ym, d, c);
  double es = h * (e1 * k1.syn + e3 * k3.syn + e4 * k4.syn + e5 * k5.syn + e6 * k6.syn + e7 * k7.syn);
  double em = h * (e1 * k1.mem + e3 * k3.mem + e4 * k4.mem + e5 * k5.mem + e6 * k6.mem + e7 * k7.mem);
  double ss = kAtol + kRtol * std::max(std::abs(vs), std::abs(ys));
  double sm = kAtol + kRtol * std::max(std::abs(vm), std::abs(ym));
  return {ys, ym, k7, std::max(std::abs(es) / ss, std::abs(em) / sm)};
}

// Cubic Hermite interpolant over one accepted step, used to place events.
struct Hermite {
  double y0s, y0m, y1s, y1m;
  Deriv f0, f1;
  double h;

  NeuronState at(double th) const {
    double th2 = th * th, th3 = th2 * th;
    double h00 = 2 * th3 - 3 * th2 + 1, h10 = th3 - 2 * th2 + th, h01 = -2 * th3 + 3 * th2, h11 = th3 - th2;
    return {h00 * y0s + h10 * h * f0.syn + h01 * y1s + h11 * h * f1.syn,
            h00 * y0m + h10 * h * f0.mem + h01 * y1m + h11 * h * f1.mem};
  }
};

// Bisects fn over theta in [0, 1] given fn(0) and fn(1) of opposite sign; returns
// the right end of the final bracket.
template <class Fn>
double locate(Fn fn) {
  double lo = 0.0, hi = 1.0;
  bool neg_lo = fn(lo) < 0.0;
  for (int i = 0; i < 60; ++i) {
    double mid = 0.5 * (lo + hi);
    if ((fn(mid) < 0.0) == neg_lo)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

double initial_step(double vs, double vm, const Deriv& f0, double remaining, const DriveInput& d,
                    const BiasConfig& c) {
  auto norm = [](double a, double b, double sa, double sb) { return std::max(std::abs(a) / sa, std::abs(b) / sb); };
  double ss = kAtol + kRtol * std::abs(vs), sm = kAtol + kRtol * std::abs(vm);
  double d0 = norm(vs, vm, ss, sm);
  double d1 = norm(f0.syn, f0.mem, ss, sm);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-9 : 0.01 * d0 / d1;
  h0 = std::min(h0, remaining);
  Deriv f1 = rhs(vs + h0 * f0.syn, vm + h0 * f0.mem, d, c);
  double d2 = norm(f1.syn - f0.syn, f1.mem - f0.mem, ss, sm) / h0;
  double dm = std::max(d1, d2);
  double h1 = dm <= 1e-15 ? std::max(1e-9, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
  return std::min({100.0 * h0, h1, remaining});
}

}  // namespace

void BiasConfig::validate() const {
  auto pos = [](double v) { return std::isfinite(v) && v > 0.0; };
  require(pos(vdd), "vdd > 0");
  require(pos(i_n0), "i_n0 > 0");
  require(pos(i_p0), "i_p0 > 0");
  require(pos(i_pulse_exc), "i_pulse_exc > 0");
  require(pos(i_pulse_inh), "i_pulse_inh > 0");
  require(pos(i_pulse_rst), "i_pulse_rst > 0");
  require(pos(c_syn), "c_syn > 0");
  require(pos(c_mem), "c_mem > 0");
  require(pos(i_s), "i_s > 0");
  require(pos(v_slope), "v_slope > 0");
  require(std::isfinite(lambda_n) && lambda_n >= 0.0, "lambda_n >= 0");
  require(std::isfinite(lambda_p) && lambda_p >= 0.0, "lambda_p >= 0");
  require(std::isfinite(v_threshold) && v_threshold > 0.0 && v_threshold < vdd, "0 < v_threshold < vdd");
  require(std::isfinite(v_on) && v_on >= 0.0 && v_on < vdd, "0 <= v_on < vdd");
}

std::optional<Crossing> StepResult::crossing() const {
  if (up && down) return up->offset <= down->offset ? Crossing::upward : Crossing::downward;
  if (up) return Crossing::upward;
  if (down) return Crossing::downward;
  return std::nullopt;
}

double leak_current_n(double v_syn, const BiasConfig& cfg) { return cfg.i_n0 * (1.0 + cfg.lambda_n * v_syn); }

double leak_current_p(double v_mem, const BiasConfig& cfg) {
  return cfg.i_p0 * (1.0 + cfg.lambda_p * (cfg.vdd - v_mem));
}

double shift_current(double v_mem, double v_syn, const BiasConfig& cfg) {
  if (!cfg.diode_coupling) return 0.0;
  double over = v_mem - v_syn - cfg.v_on;
  if (over <= 0.0) return 0.0;
  double x = over / cfg.v_slope;
  double ceiling = cfg.shift_ceiling();
  if (x >= std::log1p(ceiling / cfg.i_s)) return ceiling;
  return cfg.i_s * std::expm1(x);
}

CurrentBreakdown currents(const NeuronState& s, const DriveInput& d, const BiasConfig& cfg) {
  CurrentBreakdown b;
  b.i_exc = d.i_exc;
  b.i_inh = d.i_inh;
  b.i_rst = d.i_rst;
  b.i_n = leak_current_n(s.v_syn, cfg);
  b.i_p = leak_current_p(s.v_mem, cfg);
  b.i_shift = shift_current(s.v_mem, s.v_syn, cfg);
  b.i_syn_net = b.i_exc - b.i_inh + b.i_shift - b.i_n;
  b.i_mem_net = b.i_p - b.i_shift - b.i_rst;
  if ((s.v_syn >= cfg.vdd && b.i_syn_net > 0.0) || (s.v_syn <= 0.0 && b.i_syn_net < 0.0)) b.i_syn_net = 0.0;
  if ((s.v_mem >= cfg.vdd && b.i_mem_net > 0.0) || (s.v_mem <= 0.0 && b.i_mem_net < 0.0)) b.i_mem_net = 0.0;
  return b;
}

std::optional<Crossing> detect_threshold(double v_before, double v_after, const BiasConfig& cfg) {
  if (v_before < cfg.v_threshold && cfg.v_threshold <= v_after) return Crossing::upward;
  if (v_after < cfg.v_threshold && cfg.v_threshold <= v_before) return Crossing::downward;
  return std::nullopt;
}

NeuronState step_exact_linear(const NeuronState& state, const DriveInput& drive, Picoseconds dt,
                              const BiasConfig& cfg) {
  if (dt.count() < 0) throw RegimeError("step_exact_linear: negative dt");
  if (dt.count() == 0) return state;
  double T = to_seconds(dt);
  OffSegment seg{syn_affine(state, drive, cfg), mem_affine(state, drive, cfg), state, cfg.v_on};
  if (cfg.diode_coupling) {
    double g0 = seg.gap(0.0);
    if (g0 > 0.0 || (g0 == 0.0 && seg.gap_slope(0.0) > 0.0))
      throw RegimeError("step_exact_linear: level shifter conducts at the start of the interval");
    if (onset_time(seg, T) < kInf) throw RegimeError("step_exact_linear: level shifter turns on within dt");
  }
  if (rail_hit(seg.syn, state.v_syn, cfg.vdd) < T || rail_hit(seg.mem, state.v_mem, cfg.vdd) < T)
    throw RegimeError("step_exact_linear: a node reaches a rail within dt");
  NeuronState out{affine_value(seg.syn, state.v_syn, T), affine_value(seg.mem, state.v_mem, T)};
  check_finite(out);
  return {clamp_rail(out.v_syn, cfg.vdd), clamp_rail(out.v_mem, cfg.vdd)};
}

StepResult step(const NeuronState& state, const DriveInput& drive, Picoseconds dt, const BiasConfig& cfg) {
  check_finite(state);
  StepResult res{state, std::nullopt, std::nullopt};
  if (dt.count() <= 0) return res;

  const double T = to_seconds(dt);
  const double vdd = cfg.vdd;
  double vs = clamp_rail(state.v_syn, vdd);
  double vm = clamp_rail(state.v_mem, vdd);
  double t = 0.0;

  auto conducting = [&](double s, double m) {
    if (!cfg.diode_coupling) return false;
    double g = gap_of(s, m, cfg);
    if (g > 0.0) return true;
    if (g < 0.0) return false;
    OffSegment probe{syn_affine({s, m}, drive, cfg), mem_affine({s, m}, drive, cfg), {s, m}, cfg.v_on};
    return probe.gap_slope(0.0) > 0.0;
  };
  bool on = conducting(vs, vm);
  double h = 0.0;  // carried step size for the coupled regime

  while (t < T) {
    double remaining = T - t;
    if (!on) {
      NeuronState s0{vs, vm};
      OffSegment seg{syn_affine(s0, drive, cfg), mem_affine(s0, drive, cfg), s0, cfg.v_on};
      double len = remaining;
      enum { none, rail_syn, rail_mem, onset } ev = none;
      double th = rail_hit(seg.syn, vs, vdd);
      if (th < len) len = th, ev = rail_syn;
      th = rail_hit(seg.mem, vm, vdd);
      if (th < len) len = th, ev = rail_mem;
      if (cfg.diode_coupling) {
        th = onset_time(seg, len);
        if (th < len || (th == len && th < kInf && ev == none)) len = th, ev = onset;
      }
      double ns = affine_value(seg.syn, vs, len);
      double nm = affine_value(seg.mem, vm, len);
      if (ev == rail_syn) ns = ns > 0.5 * vdd ? vdd : 0.0;
      if (ev == rail_mem) nm = nm > 0.5 * vdd ? vdd : 0.0;
      ns = clamp_rail(ns, vdd);
      nm = clamp_rail(nm, vdd);
      if (auto dir = detect_threshold(vm, nm, cfg)) {
        double tc = seg.mem.pinned ? 0.0 : affine_hit(seg.mem, vm, cfg.v_threshold);
        note_crossing(res, dir, t + std::min(std::max(tc, 0.0), len));
      }
      check_finite({ns, nm});
      vs = ns;
      vm = nm;
      t = (len >= remaining) ? T : t + len;
      if (ev == onset) {
        on = true;
        h = 0.0;
      }
      continue;
    }

    Deriv f0 = rhs(vs, vm, drive, cfg);
    if (h <= 0.0) h = initial_step(vs, vm, f0, remaining, drive, cfg);
    h = std::min(h, remaining);
    Trial tr = dp_trial(vs, vm, f0, h, drive, cfg);
    if (!std::isfinite(tr.vs) || !std::isfinite(tr.vm) || !std::isfinite(tr.err))
      throw ModelError("non-finite state in coupled-regime step");
    if (tr.err > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(tr.err, -0.2));
      if (h < kMinStep) throw ModelError("integrator step size underflow");
      continue;
    }

    double h_next = h * std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(tr.err, 1e-10), -0.2)));
    Hermite herm{vs, vm, tr.vs, tr.vm, f0, tr.f1, h};

    // Earliest of: syn or mem leaving the rails, the level shifter turning off.
    double theta = 2.0;
    enum { none, rail_syn, rail_mem, off } ev = none;
    auto consider = [&](double th_ev, decltype(ev) kind) {
      if (th_ev < theta) theta = th_ev, ev = kind;
    };
    if (tr.vs < 0.0) consider(locate([&](double x) { return herm.at(x).v_syn; }), rail_syn);
    if (tr.vs > vdd) consider(locate([&](double x) { return herm.at(x).v_syn - vdd; }), rail_syn);
    if (tr.vm < 0.0) consider(locate([&](double x) { return herm.at(x).v_mem; }), rail_mem);
    if (tr.vm > vdd) consider(locate([&](double x) { return herm.at(x).v_mem - vdd; }), rail_mem);
    double g0 = gap_of(vs, vm, cfg);
    double g1 = gap_of(tr.vs, tr.vm, cfg);
    if (g0 > 0.0 && g1 < 0.0) {
      consider(locate([&](double x) {
                 auto p = herm.at(x);
                 return gap_of(p.v_syn, p.v_mem, cfg);
               }),
               off);
    }

    double used = h;
    double ns = tr.vs, nm = tr.vm;
    if (ev != none) {
      used = theta * h;
      Trial re = dp_trial(vs, vm, f0, used, drive, cfg);
      ns = re.vs;
      nm = re.vm;
      if (ev == rail_syn) ns = ns > 0.5 * vdd ? vdd : 0.0;
      if (ev == rail_mem) nm = nm > 0.5 * vdd ? vdd : 0.0;
      h_next = h;
    }
    ns = clamp_rail(ns, vdd);
    nm = clamp_rail(nm, vdd);
    check_finite({ns, nm});
    if (auto dir = detect_threshold(vm, nm, cfg)) {
      double frac = used / h;
      double th_c = locate([&](double x) { return herm.at(x * frac).v_mem - cfg.v_threshold; });
      note_crossing(res, dir, t + th_c * used);
    }
    vs = ns;
    vm = nm;
    t = (used >= remaining) ? T : t + used;
    h = h_next;
    if (ev == off || (g0 <= 0.0 && gap_of(vs, vm, cfg) <= 0.0)) {
      on = false;
    }
  }

  res.state = {vs, vm};
  return res;
}

NeuronState steady_state(const BiasConfig& cfg) {
  if (!(cfg.lambda_n > 0.0 || cfg.lambda_p > 0.0))
    throw ConfigError("steady_state requires lambda_n > 0 or lambda_p > 0 (otherwise the fixed point is a continuum)");
  if (!cfg.diode_coupling) throw NoSteadyStateError("steady_state: level shifter disabled, nodes do not balance");

  // With I = I_n(v_syn) flowing through the level shifter, v_mem = v_syn + drop(I).
  // The residual I_p(v_mem) - I_n(v_syn) is strictly decreasing in v_syn.
  auto drop = [&](double i) { return cfg.v_on + cfg.v_slope * std::log1p(i / cfg.i_s); };
  auto residual = [&](double vs) {
    double i = leak_current_n(vs, cfg);
    return leak_current_p(vs + drop(i), cfg) - i;
  };
  if (leak_current_n(cfg.vdd, cfg) >= cfg.shift_ceiling())
    throw NoSteadyStateError("steady_state: leak exceeds the level-shifter ceiling");
  double lo = 0.0, hi = cfg.vdd;
  if (residual(lo) < 0.0) throw NoSteadyStateError("steady_state: balance point lies below the ground rail");
  if (residual(hi) > 0.0) throw NoSteadyStateError("steady_state: balance point lies above the supply rail");
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (residual(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  double vs = std::abs(residual(lo)) <= std::abs(residual(hi)) ? lo : hi;
  double vm = vs + drop(leak_current_n(vs, cfg));
  if (vm > cfg.vdd) throw NoSteadyStateError("steady_state: membrane balance point lies above the supply rail");
  return {vs, vm};
}

}  // namespace cbn
