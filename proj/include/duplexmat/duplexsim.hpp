#pragma once

#include <string>
#include <vector>

#include "duplexmat/rational.hpp"

namespace duplexmat {

/// Studio time-duplex schedule. All times are milliseconds.
///
/// The wall shows `sequence` cyclically; phases named "keying-*" last one
/// exposure, "vfx" phases last one blanking interval. The camera opens its
/// global shutter at k*period + shutter_offset for `exposure` ms.
struct DuplexSchedule {
  Rational fps{100};
  Rational exposure{1};
  Rational blanking{9};
  int panel_rows = 32;
  int scan_ratio = 8;  ///< 1:scan_ratio, panel_rows/scan_ratio rows lit at once
  std::vector<std::string> sequence{"keying-green", "vfx", "keying-blue", "vfx"};
  Rational shutter_offset{0};

  Rational frame_period() const { return Rational(1000) / fps; }
  int rows_per_group() const { return panel_rows / scan_ratio; }
  Rational phase_duration(const std::string& phase) const;
  Rational cycle_length() const;
};

bool is_keying_phase(const std::string& phase);

/// Throws ConfigError naming the violated constraint.
void validate(const DuplexSchedule& schedule);

enum class EventKind { RowOff, ShutterClose, PhaseChange, ShutterOpen, RowOn };
std::string to_string(EventKind kind);

struct TimelineEvent {
  Rational time;
  EventKind kind;
  int index = 0;      ///< row group, frame or sequence position
  std::string label;  ///< phase name, or the lit rows for row events
};

struct Timeline {
  DuplexSchedule schedule;
  Rational duration;
  Rational row_time_step;
  std::vector<TimelineEvent> events;  ///< sorted by (time, kind)
  int frame_count = 0;
};

/// Discrete-event simulation. The row multiplexer is round-robin over
/// scan_ratio groups, one group per row_time_step; group g lights rows
/// g, g+scan_ratio, g+2*scan_ratio, ...
Timeline simulate(const DuplexSchedule& schedule, const Rational& duration,
                  const Rational& row_time_step);

struct CameraView {
  int frame = 0;
  Rational open;
  Rational close;
  std::vector<std::string> phases;   ///< display phases visible during the exposure
  std::vector<Rational> row_on_time; ///< accumulated per panel row
  bool sync_violation = false;       ///< anything other than a single keying phase
};

CameraView camera_view(const Timeline& timeline, int frame_index);

/// Time-weighted share of each phase over [0, whole cycles within duration).
struct PhaseShare {
  std::string phase;
  Rational time;
  Rational fraction;
};
std::vector<PhaseShare> phase_histogram(const Timeline& timeline);

struct InvariantCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Equal illumination, exclusivity, keying alternation and the VFX share.
std::vector<InvariantCheck> verify(const Timeline& timeline);

std::string timeline_csv(const Timeline& timeline);

}  // namespace duplexmat
