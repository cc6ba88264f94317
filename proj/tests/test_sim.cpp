#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arrayloc/aoa.hpp"
#include "arrayloc/sim.hpp"

using namespace arrayloc;

namespace {

const double kLambda = 0.0577;

UraConfig test_array(const std::string& id = "a",
                     const Vec3& center = Vec3::Zero(),
                     const Mat3& rot = Mat3::Identity()) {
  return UraConfig::make(id, 3, 4, 0.54 * kLambda, kLambda, center, rot);
}

SourceSpec direction_source(double el_deg, double az_deg,
                            const std::string& group = "") {
  SourceSpec s;
  s.direction = Direction::from_degrees(el_deg, az_deg);
  s.coherence_group = group;
  return s;
}

double collinearity_residual(const CVec& x, const CVec& ref) {
  // norm of x after projecting out ref, relative
  cplx scale = ref.dot(x) / ref.squaredNorm();  // Eigen dot conjugates lhs
  return (x - scale * ref).norm() / x.norm();
}

}  // namespace

TEST_CASE("noiseless single-source columns are collinear with the steering vector") {
  UraConfig ura = test_array();
  auto caps = simulate_ideal({ura}, {direction_source(21.8, 90.0)}, 5, 0.0, 42);
  REQUIRE(caps.size() == 1);
  const auto& y = caps[0].snapshots;
  REQUIRE(y.cols() == 5);
  CVec a = steering_vector(ura, Direction::from_degrees(21.8, 90.0));
  for (int t = 0; t < y.cols(); ++t)
    CHECK(collinearity_residual(y.col(t), a) < 1e-12);
  // rank(Y Y^H) == 1
  Covariance cov = sample_covariance(caps[0]);
  Eigen::SelfAdjointEigenSolver<CMat> eig(cov.values);
  Eigen::VectorXd ev = eig.eigenvalues();
  CHECK(ev(ev.size() - 2) < 1e-12 * ev(ev.size() - 1));
}

TEST_CASE("two incoherent sources give a rank-2 covariance") {
  UraConfig ura = test_array();
  auto caps = simulate_ideal(
      {ura}, {direction_source(20.0, 30.0), direction_source(40.0, -100.0)},
      10000, 0.0, 7);
  Covariance cov = sample_covariance(caps[0]);
  Eigen::SelfAdjointEigenSolver<CMat> eig(cov.values);
  Eigen::VectorXd ev = eig.eigenvalues().reverse();
  const double tol = 1e-9 * cov.values.real().trace();
  CHECK(ev(0) > tol);
  CHECK(ev(1) > tol);
  CHECK(ev(2) < tol);  // exactly rank 2: Y = A S with two sources
}

TEST_CASE("coherent group covariance rank equals the group count") {
  UraConfig ura = test_array();
  std::vector<SourceSpec> sources = {
      direction_source(21.8, 90.0, "g1"), direction_source(32.0, 56.0, "g1"),
      direction_source(15.0, -60.0, "g1"), direction_source(60.0, -150.0, "g1"),
      direction_source(50.0, 10.0, "g2")};
  auto caps = simulate_ideal({ura}, sources, 2000, 0.0, 3);
  Covariance cov = sample_covariance(caps[0]);
  Eigen::SelfAdjointEigenSolver<CMat> eig(cov.values);
  Eigen::VectorXd ev = eig.eigenvalues().reverse();
  const double tol = 1e-9 * cov.values.real().trace();
  int rank = 0;
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > tol) ++rank;
  CHECK(rank == 2);  // two coherence groups, not five sources
}

TEST_CASE("noise energy matches sigma^2 within Monte-Carlo tolerance") {
  UraConfig ura = test_array();
  const double sigma2 = 0.25;
  const int snapshots = 400;
  const int trials = 24;
  double acc = 0.0;
  for (int k = 0; k < trials; ++k) {
    auto caps = simulate_ideal({ura}, {direction_source(10, 0)}, snapshots,
                               sigma2, 1000 + k);
    // subtract the deterministic signal part
    auto clean = simulate_ideal({ura}, {direction_source(10, 0)}, snapshots,
                                0.0, 1000 + k);
    acc += (caps[0].snapshots - clean[0].snapshots).squaredNorm();
  }
  const double m = ura.element_count();
  const double expected = m * snapshots * sigma2;
  const double rel = acc / trials / expected;
  // |n|^2 entries are exponential: relative std of the mean is 1/sqrt(count)
  const double count = double(trials) * m * snapshots;
  CHECK(std::abs(rel - 1.0) < 5.0 / std::sqrt(count));
}

TEST_CASE("identical seeds reproduce captures exactly") {
  UraConfig ura = test_array();
  auto a = simulate_ideal({ura}, {direction_source(10, 20)}, 50, 0.1, 99);
  auto b = simulate_ideal({ura}, {direction_source(10, 20)}, 50, 0.1, 99);
  CHECK((a[0].snapshots - b[0].snapshots).norm() == 0.0);
  auto c = simulate_ideal({ura}, {direction_source(10, 20)}, 50, 0.1, 100);
  CHECK((a[0].snapshots - c[0].snapshots).norm() != 0.0);
}

TEST_CASE("source coincident with an array center is rejected") {
  UraConfig ura = test_array();
  SourceSpec s;
  s.position = ura.center;
  CHECK_THROWS(simulate_ideal({ura}, {s}, 1, 0.0, 1));
  CHECK_THROWS(simulate_ideal({ura}, {}, 1, 0.0, 1));
}

TEST_CASE("inter-array phase") {
  Vec3 c1(0, 2, 1.17), c2(2, 0, 1.17);
  // equidistant point
  CHECK(inter_array_phase(c1, c2, Vec3(1, 1, 1.17), kLambda) == doctest::Approx(0.0));
  // half-wavelength range difference gives pi
  Vec3 p(0, 0, 0);
  double r1 = (p - c1).norm();
  // move p so that |p-c1| - |p-c2| = lambda/2 exactly: solve along the x axis
  // instead, verify the formula directly
  CHECK(inter_array_phase(c1, c2, p, kLambda) ==
        doctest::Approx(2.0 * kPi * (r1 - (p - c2).norm()) / kLambda));
  CHECK_THROWS(inter_array_phase(c1, c2, c1, kLambda));
}

TEST_CASE("switched capture with zero impairments equals the ideal restriction") {
  UraConfig ura = test_array();
  CaptureSchedule sched = CaptureSchedule::standard_for(ura.grouping, 4, 5e-4);
  HardwareImpairments none;
  auto session = simulate_switched({ura}, {direction_source(25, 40)}, none, sched, 5);
  REQUIRE(session.arrays.size() == 1);
  const auto& sw = session.arrays[0];
  auto ideal = simulate_ideal({ura}, {direction_source(25, 40)},
                              sw.snapshot_count(), 0.0, 5, 5e-4);
  for (int col = 0; col < sw.snapshot_count(); ++col) {
    const auto& group = sw.schedule.groups[sw.column_group[col]];
    for (int e : group.elements)
      CHECK(std::abs(sw.snapshots(e, col) - ideal[0].snapshots(e, col)) < 1e-14);
  }
}

TEST_CASE("intra-packet CFO phase is identical across chains") {
  UraConfig ura = test_array();
  CaptureSchedule sched = CaptureSchedule::standard_for(ura.grouping, 3, 5e-4);
  HardwareImpairments imp;
  imp.cfo_hz = 8000.0;
  SourceSpec src = direction_source(0.0, 0.0);  // broadside: equal propagation
  src.constant_waveform = true;
  auto with_cfo = simulate_switched({ura}, {src}, imp, sched, 5);
  auto without = simulate_switched({ura}, {src}, HardwareImpairments{}, sched, 5);
  const auto& a = with_cfo.arrays[0];
  const auto& b = without.arrays[0];
  for (int col = 0; col < a.snapshot_count(); ++col) {
    const auto& group = a.schedule.groups[a.column_group[col]];
    // per-element CFO phase within the packet must be conserved
    double ref = std::arg(a.snapshots(group.elements[0], col) *
                          std::conj(b.snapshots(group.elements[0], col)));
    for (int e : group.elements) {
      double phase = std::arg(a.snapshots(e, col) * std::conj(b.snapshots(e, col)));
      CHECK(std::abs(wrap_phase(phase - ref)) < 1e-10);
    }
  }
}

TEST_CASE("intra-group offset of an impaired broadside capture matches the injected statics") {
  UraConfig ura = test_array();
  CaptureSchedule sched = CaptureSchedule::standard_for(ura.grouping, 3, 5e-4);
  HardwareImpairments imp;
  imp.pll_phases = {0.7, 0.0, 0.0};
  // cable phase 0.3 rad on element 1 (chain 1): delay = 0.3/(2 pi f)
  const double carrier = 299792458.0 / kLambda;
  imp.cable_delays.assign(1, std::vector<double>(12, 0.0));
  imp.cable_delays[0][1] = 0.3 / (2.0 * kPi * carrier);
  SourceSpec src = direction_source(0.0, 0.0);
  src.constant_waveform = true;
  auto session = simulate_switched({ura}, {src}, imp, sched, 5);
  const auto& cap = session.arrays[0];
  // element 1 vs element 0 within group 0: pll diff (0-0.7) + cable 0.3
  const auto& g0 = cap.schedule.groups[0];
  REQUIRE(g0.elements == std::vector<int>{0, 1, 2});
  int col = 0;  // first packet belongs to group 0
  REQUIRE(cap.column_group[col] == 0);
  double measured = std::arg(cap.snapshots(1, col) * std::conj(cap.snapshots(0, col)));
  CHECK(wrap_phase(measured - (0.0 - 0.7 + 0.3)) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("CPA phase difference across two group windows equals the CFO drift") {
  UraConfig ura = test_array();
  CaptureSchedule sched = CaptureSchedule::standard_for(ura.grouping, 5, 5e-4);
  HardwareImpairments imp;
  imp.cfo_hz = 1300.0;
  SourceSpec src = direction_source(0.0, 0.0);
  src.constant_waveform = true;
  auto session = simulate_switched({ura}, {src}, imp, sched, 5);
  const auto& cap = session.arrays[0];
  // element 0 is sampled by regular group 0 and redundant window {0,5,7}
  int w_red = -1;
  for (int i = 0; i < (int)cap.schedule.groups.size(); ++i)
    if (cap.schedule.groups[i].kind == GroupKind::redundant &&
        cap.schedule.groups[i].elements.front() == 0)
      w_red = i;
  REQUIRE(w_red >= 0);
  int col_a = -1, col_b = -1;
  for (int c = 0; c < cap.snapshot_count(); ++c) {
    if (cap.column_group[c] == 0 && col_a < 0) col_a = c;
    if (cap.column_group[c] == w_red && col_b < 0) col_b = c;
  }
  REQUIRE(col_a >= 0);
  REQUIRE(col_b >= 0);
  double dt = cap.timestamps[col_b] - cap.timestamps[col_a];
  double measured = std::arg(cap.snapshots(0, col_b) * std::conj(cap.snapshots(0, col_a)));
  CHECK(std::abs(wrap_phase(measured + 2.0 * kPi * imp.cfo_hz * dt)) < 1e-9);
}

TEST_CASE("planar and exact propagation converge in the far field") {
  UraConfig ura = test_array();
  Vec3 p(0.3, -0.2, 600.0);  // deep far field for a palm-sized array
  CVec exact = propagation_vector(ura, p, PhaseModel::exact);
  CVec planar = propagation_vector(ura, p, PhaseModel::planar);
  double resid = collinearity_residual(exact, planar);
  CHECK(resid < 1e-3);
}

TEST_CASE("schedule validation") {
  UraConfig ura = test_array();
  CaptureSchedule sched = CaptureSchedule::standard_for(ura.grouping);
  CHECK_NOTHROW(sched.validate(12));
  CaptureSchedule bad = sched;
  bad.order.push_back(99);
  CHECK_THROWS(bad.validate(12));
  CaptureSchedule clash = sched;
  clash.groups[0].elements = {0, 3, 1};  // elements 0 and 3 share chain 0
  CHECK_THROWS(clash.validate(12));
}
