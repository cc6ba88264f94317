#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arrayloc/calib.hpp"
#include "arrayloc/rng.hpp"

using namespace arrayloc;

namespace {

const double kLambda = 0.0577;
const double kCarrier = 299792458.0 / kLambda;

UraConfig test_array(const std::string& id = "a",
                     const Vec3& center = Vec3::Zero(),
                     const Mat3& rot = Mat3::Identity()) {
  return UraConfig::make(id, 3, 4, 0.54 * kLambda, kLambda, center, rot);
}

SourceSpec broadside_source() {
  SourceSpec s;
  s.direction = Direction::from_degrees(0.0, 0.0);
  s.constant_waveform = true;
  return s;
}

SourceSpec scene_source() {
  SourceSpec s;
  s.direction = Direction::from_degrees(25.0, 40.0);
  s.constant_waveform = true;
  return s;
}

HardwareImpairments arbitrary_impairments(std::uint64_t seed, double cfo_hz,
                                          int elements = 12) {
  HardwareImpairments imp;
  Rng rng = make_rng(seed, 0xCA11);
  std::uniform_real_distribution<double> phase(-kPi, kPi);
  std::uniform_real_distribution<double> delay(0.0, 2e-10);
  imp.pll_phases = {phase(rng), phase(rng), phase(rng)};
  imp.cable_delays.assign(1, {});
  for (int e = 0; e < elements; ++e) imp.cable_delays[0].push_back(delay(rng));
  imp.cfo_hz = cfo_hz;
  return imp;
}

CsiCapture broadside_capture(const UraConfig& ura, const HardwareImpairments& imp,
                             std::uint64_t seed = 17, int packets = 8) {
  CaptureSchedule sched = CaptureSchedule::standard_for(ura.grouping, packets, 5e-4);
  auto session = simulate_switched({ura}, {broadside_source()}, imp, sched, seed);
  return session.arrays[0];
}

}  // namespace

TEST_CASE("zero impairments measure zero offsets") {
  UraConfig ura = test_array();
  CsiCapture cap = broadside_capture(ura, HardwareImpairments{});
  auto measured = measure_intra_group(cap);
  for (const auto& group : measured.offsets)
    for (double o : group) CHECK(std::abs(o) < 1e-12);
  CHECK(measured.warnings.empty());
  auto statics = measure_group_statics(cap, measured.offsets);
  for (double s : statics) CHECK(std::abs(s) < 1e-12);
}

TEST_CASE("injected pll and cable offsets add up in the measurement") {
  UraConfig ura = test_array();
  HardwareImpairments imp;
  imp.pll_phases = {0.0, 0.7, 0.0};  // element 1 rides chain 1
  imp.cable_delays.assign(1, std::vector<double>(12, 0.0));
  imp.cable_delays[0][1] = 0.3 / (2.0 * kPi * kCarrier);
  CsiCapture cap = broadside_capture(ura, imp);
  auto measured = measure_intra_group(cap);
  CHECK(measured.offsets[0][1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("offsets near pi survive the circular mean") {
  UraConfig ura = test_array();
  HardwareImpairments imp;
  imp.cable_delays.assign(1, std::vector<double>(12, 0.0));
  imp.cable_delays[0][1] = 3.1 / (2.0 * kPi * kCarrier);
  imp.noise_variance = 0.01;  // jitter pushes phases across the wrap
  CsiCapture cap = broadside_capture(ura, imp, 23, 200);
  auto measured = measure_intra_group(cap);
  CHECK(std::abs(wrap_phase(measured.offsets[0][1] - 3.1)) < 0.05);
  CHECK(measured.offsets[0][1] >= -kPi);
  CHECK(measured.offsets[0][1] < kPi);
}

TEST_CASE("fewer than two packets per group is rejected") {
  UraConfig ura = test_array();
  CsiCapture cap = broadside_capture(ura, HardwareImpairments{}, 17, 1);
  CHECK_THROWS(measure_intra_group(cap));
}

TEST_CASE("spread warning fires when the broadside condition is violated") {
  UraConfig ura = test_array();
  HardwareImpairments imp;
  imp.noise_variance = 0.5;  // heavy noise inflates per-snapshot spread
  CsiCapture cap = broadside_capture(ura, imp, 31, 50);
  auto measured = measure_intra_group(cap);
  CHECK(!measured.warnings.empty());
}

TEST_CASE("apply then re-measure yields zero offsets") {
  UraConfig ura = test_array();
  HardwareImpairments imp = arbitrary_impairments(5, 0.0);
  CsiCapture cap = broadside_capture(ura, imp);
  CalibrationProfile profile = measure_broadside_profile(cap);
  CsiCapture calibrated = apply_intra_group(cap, profile);
  auto re = measure_intra_group(calibrated);
  for (const auto& group : re.offsets)
    for (double o : group) CHECK(std::abs(o) < 1e-9);
  auto statics = measure_group_statics(calibrated, re.offsets);
  for (double s : statics) CHECK(std::abs(s) < 1e-9);
}

TEST_CASE("profile of zeros leaves the capture unchanged") {
  UraConfig ura = test_array();
  CsiCapture cap = broadside_capture(ura, arbitrary_impairments(6, 500.0));
  CalibrationProfile zeros;
  zeros.array_id = ura.id;
  for (const auto& g : ura.grouping.groups)
    zeros.intra_group.push_back(std::vector<double>(g.size(), 0.0));
  zeros.group_static.assign(ura.grouping.groups.size(), 0.0);
  zeros.cpa = ura.grouping.cpa;
  CsiCapture out = apply_intra_group(cap, zeros);
  CHECK((out.snapshots - cap.snapshots).norm() == 0.0);
}

TEST_CASE("missing group in the profile is an error") {
  UraConfig ura = test_array();
  CsiCapture cap = broadside_capture(ura, HardwareImpairments{});
  CalibrationProfile profile = measure_broadside_profile(cap);
  profile.intra_group.pop_back();
  CHECK_THROWS(apply_intra_group(cap, profile));
}

TEST_CASE("profile phases are stored wrapped") {
  UraConfig ura = test_array();
  HardwareImpairments imp;
  imp.cable_delays.assign(1, std::vector<double>(12, 0.0));
  imp.cable_delays[0][1] = 8.8 / (2.0 * kPi * kCarrier);  // wraps past pi
  CsiCapture cap = broadside_capture(ura, imp);
  CalibrationProfile profile = measure_broadside_profile(cap);
  for (const auto& g : profile.intra_group)
    for (double o : g) {
      CHECK(o >= -kPi);
      CHECK(o < kPi);
    }
  CHECK(profile.intra_group[0][1] == doctest::Approx(wrap_phase(8.8)).epsilon(1e-9));
}

TEST_CASE("no CFO means zero inter-group alignment phases") {
  UraConfig ura = test_array();
  HardwareImpairments imp = arbitrary_impairments(7, 0.0);
  CsiCapture broadside = broadside_capture(ura, imp);
  CalibrationProfile profile = measure_broadside_profile(broadside);

  CaptureSchedule sched = CaptureSchedule::standard_for(ura.grouping, 8, 5e-4);
  auto session = simulate_switched({ura}, {scene_source()}, imp, sched, 20);
  CsiCapture scene = derotate_packets(apply_intra_group(session.arrays[0], profile));
  auto alignment = align_inter_group(scene);
  for (double a : alignment) CHECK(std::abs(a) < 1e-9);
}

TEST_CASE("broken CPA chain raises a connectivity diagnostic") {
  UraConfig ura = test_array();
  CaptureSchedule sched = CaptureSchedule::standard_for(ura.grouping, 4, 5e-4);
  // drop the redundant windows from the order: groups cannot be chained
  sched.order = {0, 1, 2, 3};
  auto session = simulate_switched({ura}, {scene_source()}, HardwareImpairments{},
                                   sched, 20);
  CHECK_THROWS_WITH_AS(align_inter_group(session.arrays[0]),
                       doctest::Contains("CPA chain broken"),
                       std::invalid_argument);
}

TEST_CASE("three-stage round trip matches the unswitched ideal capture") {
  UraConfig ura = test_array();
  HardwareImpairments imp = arbitrary_impairments(9, 10000.0);  // CFO at the cap
  CsiCapture broadside = broadside_capture(ura, imp);
  CalibrationProfile profile = measure_broadside_profile(broadside);

  CaptureSchedule sched = CaptureSchedule::standard_for(ura.grouping, 6, 5e-4);
  auto session = simulate_switched({ura}, {scene_source()}, imp, sched, 21);
  CalibratedCapture calibrated = calibrate_capture(session.arrays[0], profile);

  auto ideal = simulate_ideal({ura}, {scene_source()}, sched.packets_per_group,
                              0.0, 21);
  const CMat& got = calibrated.capture.snapshots;
  const CMat& want = ideal[0].snapshots;
  REQUIRE(got.rows() == want.rows());
  REQUIRE(got.cols() == want.cols());
  const double global = std::arg(got(0, 0) * std::conj(want(0, 0)));
  double worst = 0.0;
  for (int c = 0; c < got.cols(); ++c)
    for (int r = 0; r < got.rows(); ++r) {
      double diff = std::arg(got(r, c) * std::conj(want(r, c)));
      worst = std::max(worst, std::abs(wrap_phase(diff - global)));
    }
  CHECK(worst < 1e-6);
}

TEST_CASE("calibration is invariant to the source waveform") {
  UraConfig ura = test_array();
  HardwareImpairments imp = arbitrary_impairments(11, 2000.0);

  SourceSpec constant = broadside_source();
  SourceSpec random = broadside_source();
  random.constant_waveform = false;

  CaptureSchedule sched = CaptureSchedule::standard_for(ura.grouping, 8, 5e-4);
  auto cap_const = simulate_switched({ura}, {constant}, imp, sched, 31).arrays[0];
  auto cap_rand = simulate_switched({ura}, {random}, imp, sched, 77).arrays[0];

  CalibrationProfile p1 = measure_broadside_profile(cap_const);
  CalibrationProfile p2 = measure_broadside_profile(cap_rand);
  for (size_t g = 0; g < p1.intra_group.size(); ++g)
    for (size_t k = 0; k < p1.intra_group[g].size(); ++k)
      CHECK(std::abs(wrap_phase(p1.intra_group[g][k] - p2.intra_group[g][k])) < 1e-6);
  for (size_t g = 0; g < p1.group_static.size(); ++g)
    CHECK(std::abs(wrap_phase(p1.group_static[g] - p2.group_static[g])) < 1e-6);
}

TEST_CASE("co-located arrays measure zero inter-array phase") {
  UraConfig a = test_array("a");
  UraConfig b = test_array("b");
  SourceSpec src;
  src.position = Vec3(0.4, 0.1, 2.0);
  src.phase_model = PhaseModel::planar;
  src.constant_waveform = true;
  CaptureSchedule sched = CaptureSchedule::standard_for(a.grouping, 6, 5e-4);
  auto session = simulate_switched({a, b}, {src}, HardwareImpairments{}, sched,
                                   41, true);
  REQUIRE(session.cross.size() == 1);
  CalibrationProfile pa = measure_broadside_profile(
      broadside_capture(a, HardwareImpairments{}));
  CalibrationProfile pb = pa;
  pb.array_id = "b";
  InterArrayEntry entry = align_inter_array(session.cross[0], {a, b}, {pa, pb});
  CHECK(std::abs(entry.delta_gamma) < 1e-9);
}

TEST_CASE("measured inter-array phase matches the range-difference model") {
  UraConfig a = test_array("a", Vec3(0, 2, 1.17),
                           rotation_from_yaw_pitch_roll_deg(-45, 90, 0));
  UraConfig b = test_array("b", Vec3(2, 0, 1.17),
                           rotation_from_yaw_pitch_roll_deg(135, 90, 0));
  SourceSpec src;
  src.position = Vec3(0.7, 1.2, 1.1);
  src.phase_model = PhaseModel::planar;
  src.constant_waveform = true;
  CaptureSchedule sched = CaptureSchedule::standard_for(a.grouping, 6, 5e-4);
  auto session = simulate_switched({a, b}, {src}, HardwareImpairments{}, sched,
                                   43, true);
  CalibrationProfile zeros;
  zeros.array_id = "a";
  for (const auto& g : a.grouping.groups)
    zeros.intra_group.push_back(std::vector<double>(g.size(), 0.0));
  zeros.group_static.assign(a.grouping.groups.size(), 0.0);
  zeros.cpa = a.grouping.cpa;
  CalibrationProfile zb = zeros;
  zb.array_id = "b";
  InterArrayEntry entry = align_inter_array(session.cross[0], {a, b}, {zeros, zb});
  double expected = wrap_phase(inter_array_phase(a.center, b.center,
                                                 *src.position, kLambda));
  CHECK(std::abs(wrap_phase(entry.delta_gamma - expected)) < 1e-9);
}

TEST_CASE("empty cross capture is rejected") {
  CrossArrayCapture cross;
  UraConfig a = test_array("a");
  CHECK_THROWS(align_inter_array(cross, {a, a}, {}));
}
