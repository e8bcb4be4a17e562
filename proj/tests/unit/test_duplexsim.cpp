#include <gtest/gtest.h>

#include "duplexmat/duplexsim.hpp"
#include "duplexmat/errors.hpp"

using namespace duplexmat;

namespace {

const Rational kRowStep(1, 8);

Timeline studio_timeline(const DuplexSchedule& s = {}) { return simulate(s, Rational(40), kRowStep); }

}  // namespace

TEST(Rational, ParseAndArithmetic) {
  EXPECT_EQ(Rational::parse("0.125"), Rational(1, 8));
  EXPECT_EQ(Rational::parse("3/6"), Rational(1, 2));
  EXPECT_EQ(Rational::parse("-2"), Rational(-2));
  EXPECT_EQ(Rational(1, 3) + Rational(1, 6), Rational(1, 2));
  EXPECT_EQ(Rational(1000) / Rational(100), Rational(10));
  EXPECT_LT(Rational(1, 3), Rational(1, 2));
  EXPECT_EQ(floor_div(Rational(7, 2), Rational(1)), Rational(3));
  EXPECT_EQ(Rational(2, 4).str(), "1/2");
  EXPECT_THROW(Rational::parse("x"), ConfigError);
  EXPECT_THROW(Rational(1, 0), NumericError);
}

TEST(DuplexSchedule, StudioDefaults) {
  const DuplexSchedule s;
  EXPECT_EQ(s.frame_period(), Rational(10));
  EXPECT_EQ(s.exposure + s.blanking, s.frame_period());
  EXPECT_EQ(s.rows_per_group(), 4);
  EXPECT_EQ(s.cycle_length(), Rational(20));
  EXPECT_NO_THROW(validate(s));
}

TEST(DuplexSchedule, ConstraintViolationsNamed) {
  DuplexSchedule s;
  s.blanking = Rational(8);
  try {
    validate(s);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("exposure + blanking"), std::string::npos) << e.what();
  }
  s = {};
  s.panel_rows = 30;
  EXPECT_THROW(validate(s), ConfigError);
  EXPECT_THROW(simulate(DuplexSchedule{}, Rational(40), Rational(1, 3)), ConfigError);
  EXPECT_THROW(simulate(DuplexSchedule{}, Rational(5), kRowStep), ConfigError);
}

TEST(Simulate, EventsSorted) {
  const Timeline tl = studio_timeline();
  for (std::size_t i = 1; i < tl.events.size(); ++i) {
    const auto& a = tl.events[i - 1];
    const auto& b = tl.events[i];
    ASSERT_TRUE(a.time < b.time || (a.time == b.time && a.kind <= b.kind));
  }
  EXPECT_EQ(tl.frame_count, 4);
}

TEST(Simulate, ShutterEventsAlternate) {
  const Timeline tl = studio_timeline();
  bool open = false;
  for (const auto& e : tl.events) {
    if (e.kind == EventKind::ShutterOpen) {
      ASSERT_FALSE(open);
      open = true;
    } else if (e.kind == EventKind::ShutterClose) {
      ASSERT_TRUE(open);
      open = false;
    }
  }
}

TEST(CameraView, FrameZeroGreenEqualRows) {
  const CameraView v = camera_view(studio_timeline(), 0);
  EXPECT_EQ(v.phases, std::vector<std::string>{"keying-green"});
  EXPECT_FALSE(v.sync_violation);
  ASSERT_EQ(v.row_on_time.size(), 32u);
  for (const Rational& t : v.row_on_time) EXPECT_EQ(t, Rational(1, 8));
}

TEST(CameraView, AlternatesGreenBlue) {
  const Timeline tl = studio_timeline();
  for (int f = 0; f < tl.frame_count; ++f)
    EXPECT_EQ(camera_view(tl, f).phases,
              std::vector<std::string>{f % 2 == 0 ? "keying-green" : "keying-blue"});
}

TEST(CameraView, OutOfRange) {
  EXPECT_THROW(camera_view(studio_timeline(), 99), ConfigError);
}

TEST(CameraView, PerturbedScheduleFlagsViolation) {
  DuplexSchedule s;
  s.shutter_offset = Rational(1, 2);
  const CameraView v = camera_view(studio_timeline(s), 0);
  EXPECT_TRUE(v.sync_violation);
  EXPECT_NE(std::find(v.phases.begin(), v.phases.end(), "vfx"), v.phases.end());
}

TEST(PhaseHistogram, NinetyPercentVfx) {
  Rational vfx, keying;
  for (const PhaseShare& p : phase_histogram(studio_timeline())) {
    if (p.phase == "vfx") vfx += p.fraction;
    else keying += p.fraction;
  }
  EXPECT_EQ(vfx, Rational(9, 10));
  EXPECT_EQ(keying, Rational(1, 10));
}

TEST(Verify, DefaultSchedulePasses) {
  for (const InvariantCheck& c : verify(studio_timeline())) EXPECT_TRUE(c.pass) << c.name << ": " << c.detail;
}

TEST(Verify, EqualIlluminationForOtherSchedules) {
  DuplexSchedule s;
  s.fps = Rational(50);
  s.exposure = Rational(2);
  s.blanking = Rational(18);
  s.panel_rows = 48;
  s.scan_ratio = 16;
  const Timeline tl = simulate(s, Rational(80), Rational(1, 8));
  for (const InvariantCheck& c : verify(tl)) EXPECT_TRUE(c.pass) << c.name << ": " << c.detail;
  const CameraView v = camera_view(tl, 1);
  for (const Rational& t : v.row_on_time) EXPECT_EQ(t, Rational(1, 8));
}

TEST(Timeline, CsvHeader) {
  const std::string csv = timeline_csv(studio_timeline());
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "time_ms,time_ms_exact,kind,index,label");
}
