#include "duplexmat/duplexsim.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "duplexmat/errors.hpp"

namespace duplexmat {

bool is_keying_phase(const std::string& phase) { return phase.rfind("keying-", 0) == 0; }

Rational DuplexSchedule::phase_duration(const std::string& phase) const {
  if (is_keying_phase(phase)) return exposure;
  if (phase == "vfx") return blanking;
  throw ConfigError("unknown display phase '" + phase + "' (expected keying-<name> or vfx)");
}

Rational DuplexSchedule::cycle_length() const {
  Rational total;
  for (const auto& p : sequence) total += phase_duration(p);
  return total;
}

void validate(const DuplexSchedule& s) {
  auto fail = [](const std::string& what) { throw ConfigError("duplex schedule: " + what); };
  if (s.fps <= Rational(0)) fail("fps > 0 violated");
  if (s.exposure <= Rational(0) || s.blanking < Rational(0)) fail("exposure > 0, blanking >= 0 violated");
  if (s.exposure + s.blanking != s.frame_period()) {
    fail("exposure + blanking = 1000/fps violated (" + (s.exposure + s.blanking).str() + " vs " +
         s.frame_period().str() + ")");
  }
  if (s.panel_rows <= 0 || s.scan_ratio <= 0) fail("panel_rows > 0, scan_ratio > 0 violated");
  if (s.panel_rows % s.scan_ratio != 0) fail("panel_rows divisible by scan_ratio violated");
  if (s.sequence.empty()) fail("non-empty display sequence violated");
  for (const auto& p : s.sequence) (void)s.phase_duration(p);
  if (s.shutter_offset < Rational(0) || s.shutter_offset >= s.frame_period()) {
    fail("0 <= shutter_offset < frame period violated");
  }
}

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::RowOff: return "row-off";
    case EventKind::ShutterClose: return "shutter-close";
    case EventKind::PhaseChange: return "phase-change";
    case EventKind::ShutterOpen: return "shutter-open";
    case EventKind::RowOn: return "row-on";
  }
  return "?";
}

namespace {

bool divides(const Rational& step, const Rational& span) { return (span / step).is_integer(); }

std::string group_rows(const DuplexSchedule& s, int group) {
  std::string out;
  for (int r = group; r < s.panel_rows; r += s.scan_ratio) {
    if (!out.empty()) out += ';';
    out += std::to_string(r);
  }
  return out;
}

struct PhaseInterval {
  Rational begin;
  Rational end;
  std::string phase;
};

std::vector<PhaseInterval> phase_intervals(const Timeline& tl) {
  std::vector<PhaseInterval> out;
  for (const auto& e : tl.events) {
    if (e.kind != EventKind::PhaseChange) continue;
    if (!out.empty()) out.back().end = e.time;
    out.push_back({e.time, tl.duration, e.label});
  }
  return out;
}

}  // namespace

Timeline simulate(const DuplexSchedule& s, const Rational& duration, const Rational& step) {
  validate(s);
  if (step <= Rational(0)) throw ConfigError("duplex schedule: row_time_step > 0 violated");
  if (!divides(step * Rational(s.scan_ratio), s.exposure)) {
    throw ConfigError("duplex schedule: exposure divisible by scan_ratio * row_time_step violated (" +
                      s.exposure.str() + " / (" + std::to_string(s.scan_ratio) + " * " + step.str() +
                      "))");
  }
  for (const auto& p : s.sequence) {
    if (!divides(step, s.phase_duration(p))) {
      throw ConfigError("duplex schedule: phase '" + p + "' duration divisible by row_time_step violated");
    }
  }
  if (!divides(step, s.shutter_offset)) {
    throw ConfigError("duplex schedule: shutter_offset divisible by row_time_step violated");
  }
  const Rational needed = max(s.cycle_length(), s.frame_period() + s.shutter_offset);
  if (duration < needed) {
    throw ConfigError("duplex schedule: duration >= one full cycle violated (need " + needed.str() +
                      " ms)");
  }

  Timeline tl;
  tl.schedule = s;
  tl.duration = duration;
  tl.row_time_step = step;

  // Display phases.
  {
    Rational t;
    std::size_t i = 0;
    while (t < duration) {
      const std::string& phase = s.sequence[i % s.sequence.size()];
      tl.events.push_back({t, EventKind::PhaseChange, static_cast<int>(i % s.sequence.size()), phase});
      t += s.phase_duration(phase);
      ++i;
    }
  }
  // Row multiplexer.
  {
    const Rational slots = floor_div(duration, step);
    for (std::int64_t k = 0; k < slots.num(); ++k) {
      const int group = static_cast<int>(k % s.scan_ratio);
      const Rational t0 = step * Rational(k);
      const std::string rows = group_rows(s, group);
      tl.events.push_back({t0, EventKind::RowOn, group, rows});
      tl.events.push_back({t0 + step, EventKind::RowOff, group, rows});
    }
  }
  // Global shutter.
  {
    int frame = 0;
    for (Rational open = s.shutter_offset; open + s.exposure <= duration; open += s.frame_period()) {
      tl.events.push_back({open, EventKind::ShutterOpen, frame, ""});
      tl.events.push_back({open + s.exposure, EventKind::ShutterClose, frame, ""});
      ++frame;
    }
    tl.frame_count = frame;
  }
  std::stable_sort(tl.events.begin(), tl.events.end(), [](const auto& a, const auto& b) {
    if (a.time != b.time) return a.time < b.time;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
  return tl;
}

CameraView camera_view(const Timeline& tl, int frame_index) {
  if (frame_index < 0 || frame_index >= tl.frame_count) {
    throw ConfigError("camera_view: frame " + std::to_string(frame_index) + " outside [0," +
                      std::to_string(tl.frame_count) + ")");
  }
  const DuplexSchedule& s = tl.schedule;
  CameraView view;
  view.frame = frame_index;
  bool found_open = false;
  for (const auto& e : tl.events) {
    if (e.index != frame_index) continue;
    if (e.kind == EventKind::ShutterOpen) {
      view.open = e.time;
      found_open = true;
    } else if (e.kind == EventKind::ShutterClose) {
      view.close = e.time;
    }
  }
  if (!found_open) throw ConfigError("camera_view: frame not in timeline");

  for (const auto& iv : phase_intervals(tl)) {
    if (min(iv.end, view.close) > max(iv.begin, view.open)) {
      if (view.phases.empty() || view.phases.back() != iv.phase) view.phases.push_back(iv.phase);
    }
  }
  view.sync_violation = !(view.phases.size() == 1 && is_keying_phase(view.phases.front()));

  view.row_on_time.assign(s.panel_rows, Rational(0));
  std::vector<Rational> lit_since(s.scan_ratio, Rational(-1));
  for (const auto& e : tl.events) {
    if (e.kind == EventKind::RowOn) {
      lit_since[e.index] = e.time;
    } else if (e.kind == EventKind::RowOff) {
      const Rational lo = max(lit_since[e.index], view.open);
      const Rational hi = min(e.time, view.close);
      if (hi > lo) {
        for (int r = e.index; r < s.panel_rows; r += s.scan_ratio) view.row_on_time[r] += hi - lo;
      }
    }
    if (e.time > view.close) break;
  }
  return view;
}

std::vector<PhaseShare> phase_histogram(const Timeline& tl) {
  const Rational cycle = tl.schedule.cycle_length();
  const Rational span = floor_div(tl.duration, cycle) * cycle;
  std::map<std::string, Rational> acc;
  std::vector<std::string> order;
  for (const auto& iv : phase_intervals(tl)) {
    const Rational hi = min(iv.end, span);
    if (hi <= iv.begin) continue;
    if (!acc.count(iv.phase)) order.push_back(iv.phase);
    acc[iv.phase] += hi - iv.begin;
  }
  std::vector<PhaseShare> out;
  for (const auto& p : order) out.push_back({p, acc[p], acc[p] / span});
  return out;
}

std::vector<InvariantCheck> verify(const Timeline& tl) {
  std::vector<InvariantCheck> checks;
  InvariantCheck equal{"equal_illumination", true, ""};
  InvariantCheck exclusive{"vfx_exposure_exclusivity", true, ""};
  InvariantCheck alternation{"keying_alternation", true, ""};
  std::string prev_keying;
  Rational on_time;
  for (int f = 0; f < tl.frame_count; ++f) {
    const CameraView v = camera_view(tl, f);
    const auto [lo, hi] = std::minmax_element(v.row_on_time.begin(), v.row_on_time.end());
    if (*lo != *hi || *lo == Rational(0)) {
      equal.pass = false;
      equal.detail = "frame " + std::to_string(f) + ": row on-time " + lo->str() + " .. " + hi->str();
    } else if (f == 0) {
      on_time = *lo;
    }
    if (v.sync_violation) {
      exclusive.pass = false;
      std::string seen;
      for (const auto& p : v.phases) seen += (seen.empty() ? "" : ",") + p;
      exclusive.detail = "frame " + std::to_string(f) + " sees {" + seen + "}";
    }
    if (v.phases.size() == 1 && is_keying_phase(v.phases[0])) {
      if (f > 0 && v.phases[0] == prev_keying) {
        alternation.pass = false;
        alternation.detail = "frames " + std::to_string(f - 1) + "," + std::to_string(f) + " both " +
                             prev_keying;
      }
      prev_keying = v.phases[0];
    }
  }
  if (equal.pass) equal.detail = "per-row on-time " + on_time.str() + " ms in every exposure";
  if (exclusive.pass) exclusive.detail = "no exposure intersects a vfx phase";
  if (alternation.pass) alternation.detail = "consecutive frames capture different keying phases";
  checks.push_back(equal);
  checks.push_back(exclusive);
  checks.push_back(alternation);

  InvariantCheck share{"vfx_time_share", true, ""};
  Rational expected;
  for (const auto& p : tl.schedule.sequence)
    if (p == "vfx") expected += tl.schedule.phase_duration(p);
  expected = expected / tl.schedule.cycle_length();
  Rational got;
  for (const auto& h : phase_histogram(tl))
    if (h.phase == "vfx") got = h.fraction;
  share.pass = got == expected;
  share.detail = "vfx " + got.str() + " of wall-clock time";
  checks.push_back(share);
  return checks;
}

std::string timeline_csv(const Timeline& tl) {
  std::ostringstream os;
  os << "time_ms,time_ms_exact,kind,index,label\n";
  for (const auto& e : tl.events) {
    os << e.time.to_double() << ',' << e.time.str() << ',' << to_string(e.kind) << ',' << e.index
       << ',' << e.label << '\n';
  }
  return os.str();
}

}  // namespace duplexmat
