#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arrayloc/aoa.hpp"

using namespace arrayloc;

namespace {

const double kLambda = 0.0577;

UraConfig test_array() {
  return UraConfig::make("a", 3, 4, 0.54 * kLambda, kLambda, Vec3::Zero(),
                         Mat3::Identity());
}

SourceSpec dir_source(double el, double az, const std::string& group = "") {
  SourceSpec s;
  s.direction = Direction::from_degrees(el, az);
  s.coherence_group = group;
  return s;
}

// Four fully coherent arrivals used throughout the smoothing tests.
std::vector<SourceSpec> coherent_four() {
  return {dir_source(21.8, 90.0, "m"), dir_source(32.0, 56.0, "m"),
          dir_source(15.0, -60.0, "m"), dir_source(60.0, -150.0, "m")};
}

int rank_of(const Covariance& cov) {
  Eigen::SelfAdjointEigenSolver<CMat> eig(cov.values);
  Eigen::VectorXd ev = eig.eigenvalues().reverse();
  const double tol = 1e-9 * cov.values.real().trace();
  int rank = 0;
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > tol) ++rank;
  return rank;
}

double angle_error_deg(const Direction& got, double el_deg, double az_deg) {
  double de = std::abs(rad2deg(got.elevation) - el_deg);
  double da = std::abs(rad2deg(wrap_phase(got.azimuth - deg2rad(az_deg))));
  return std::max(de, da);
}

}  // namespace

TEST_CASE("sample covariance basics") {
  UraConfig ura = test_array();
  auto caps = simulate_ideal({ura}, {dir_source(30, 10)}, 1, 0.0, 2);
  Covariance cov = sample_covariance(caps[0]);
  CHECK(rank_of(cov) == 1);
  // trace identity
  auto caps2 = simulate_ideal({ura}, {dir_source(30, 10)}, 64, 0.3, 2);
  Covariance cov2 = sample_covariance(caps2[0]);
  CHECK(cov2.values.real().trace() ==
        doctest::Approx(caps2[0].snapshots.squaredNorm() / 64.0));
  // Hermitian
  CHECK((cov2.values - cov2.values.adjoint()).norm() < 1e-12 * cov2.values.norm());
}

TEST_CASE("decompose recovers a rank-one-plus-noise eigenstructure") {
  UraConfig ura = test_array();
  CVec a = steering_vector(ura, Direction::from_degrees(40.0, 25.0));
  Covariance cov;
  cov.values = a * a.adjoint() + 0.1 * CMat::Identity(12, 12);
  cov.snapshots_used = 1;
  SubspaceDecomposition d = decompose(cov, 1);
  // top eigenvector collinear with a
  CVec top = d.signal_basis.col(0);
  cplx scale = top.dot(a) / top.squaredNorm();
  CHECK((a - scale * top).norm() < 1e-10 * a.norm());
  // orthonormal split
  CHECK((d.signal_basis.adjoint() * d.noise_basis).norm() < 1e-10);
  CHECK((d.noise_basis.adjoint() * d.noise_basis -
         CMat::Identity(11, 11)).norm() < 1e-10);
  CHECK(d.eigenvalues(0) == doctest::Approx(12.1));
}

TEST_CASE("noise basis is orthogonal to the true steering vectors") {
  UraConfig ura = test_array();
  auto sources = std::vector<SourceSpec>{dir_source(20, 30), dir_source(45, -80),
                                         dir_source(65, 140)};
  auto caps = simulate_ideal({ura}, sources, 5000, 0.0, 5);
  SubspaceDecomposition d = decompose(sample_covariance(caps[0]), 3);
  for (const auto& s : sources) {
    CVec a = steering_vector(ura, *s.direction);
    CHECK((d.noise_basis.adjoint() * a).norm() < 1e-8 * a.norm());
  }
}

TEST_CASE("decompose rejects bad inputs") {
  Covariance cov;
  cov.values = CMat::Random(6, 6);  // generically non-Hermitian
  cov.values(0, 1) = 5.0;
  cov.values(1, 0) = -3.0;
  CHECK_THROWS(decompose(cov, 2));
  Covariance id;
  id.values = CMat::Identity(6, 6);
  CHECK_THROWS(decompose(id, 0));
  CHECK_THROWS(decompose(id, 6));
  CHECK_NOTHROW(decompose(id, 3));  // degenerate spectrum accepted
}

TEST_CASE("full-size smoothing equals the sample covariance") {
  UraConfig ura = test_array();
  auto caps = simulate_ideal({ura}, coherent_four(), 50, 0.05, 6);
  SmoothingSpec full{3, 4, SmoothingMode::forward_only};
  Covariance smoothed = forward_smooth(caps[0], full);
  Covariance direct = sample_covariance(caps[0]);
  CHECK((smoothed.values - direct.values).norm() < 1e-12 * direct.values.norm());
}

TEST_CASE("subarray count for the default smoothing of a 3x4 array is 2") {
  SmoothingSpec spec{3, 3, SmoothingMode::forward_backward};
  CHECK(spec.subarray_count(3, 4) == 2);
}

TEST_CASE("smoothing spec must fit the array") {
  UraConfig ura = test_array();
  auto caps = simulate_ideal({ura}, coherent_four(), 10, 0.0, 6);
  CHECK_THROWS(forward_smooth(caps[0], SmoothingSpec{4, 3, SmoothingMode::forward_only}));
  CHECK_THROWS(forward_smooth(caps[0], SmoothingSpec{0, 3, SmoothingMode::forward_only}));
}

TEST_CASE("forward smoothing restores rank up to the subarray count") {
  UraConfig ura = test_array();
  // two fully coherent sources, H = 2 subarrays
  auto two = std::vector<SourceSpec>{dir_source(21.8, 90.0, "m"),
                                     dir_source(60.0, -150.0, "m")};
  auto caps = simulate_ideal({ura}, two, 400, 0.0, 8);
  CHECK(rank_of(sample_covariance(caps[0])) == 1);
  SmoothingSpec spec{3, 3, SmoothingMode::forward_only};
  CHECK(rank_of(forward_smooth(caps[0], spec)) == 2);
}

TEST_CASE("forward-only smoothing saturates at H coherent sources") {
  UraConfig ura = test_array();
  auto caps = simulate_ideal({ura}, coherent_four(), 400, 0.0, 9);
  SmoothingSpec spec{3, 3, SmoothingMode::forward_only};
  Covariance fwd = forward_smooth(caps[0], spec);
  CHECK(rank_of(fwd) <= 2);  // H = 2 cannot decorrelate four sources
}

TEST_CASE("forward-backward doubles the decorrelation capacity") {
  UraConfig ura = test_array();
  auto caps = simulate_ideal({ura}, coherent_four(), 400, 0.0, 9);
  SmoothingSpec spec{3, 3, SmoothingMode::forward_backward};
  Covariance fb = forward_backward_smooth(caps[0], spec);
  CHECK(rank_of(fb) == 4);
  // never reduces the measured signal rank
  Covariance fwd = forward_smooth(caps[0], spec);
  CHECK(rank_of(fb) >= rank_of(fwd));
}

TEST_CASE("exchange-symmetric real covariance is a fixed point") {
  // build a real Hermitian matrix symmetric under the exchange flip; the
  // forward-backward average must return it unchanged
  UraConfig ura = test_array();
  auto caps = simulate_ideal({ura}, {dir_source(10, 20)}, 30, 0.1, 10);
  SmoothingSpec spec{2, 2, SmoothingMode::forward_backward};
  Covariance fwd = forward_smooth(sample_covariance(caps[0]), 3, 4, spec);
  const int n = fwd.dim();
  CMat sym = CMat::Zero(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      double v = 0.25 * (fwd.values(r, c).real() + fwd.values(c, r).real() +
                         fwd.values(n - 1 - r, n - 1 - c).real() +
                         fwd.values(n - 1 - c, n - 1 - r).real());
      sym(r, c) = v;
    }
  Covariance input{sym, 1};
  // with a 2x2 "array" the single-subarray smoothing is the identity, so
  // forward-backward acts directly on `sym`
  Covariance fb = forward_backward_smooth(input, 2, 2,
                                          SmoothingSpec{2, 2, SmoothingMode::forward_backward});
  CHECK((fb.values - sym).norm() < 1e-12 * sym.norm());
}

TEST_CASE("noiseless single-source spectrum peaks at the truth") {
  UraConfig ura = test_array();
  auto caps = simulate_ideal({ura}, {dir_source(34.0, 58.0)}, 50, 0.0, 11);
  SubspaceDecomposition d = decompose(sample_covariance(caps[0]), 1);
  SpectrumGrid grid = music_spectrum(d, ApertureShape::of(ura),
                                     angle_axis_deg(0, 90, 0.5),
                                     angle_axis_deg(-180, 179.5, 0.5));
  PeakList peaks = find_peaks(grid, 1, false);
  REQUIRE(peaks.peaks.size() == 1);
  CHECK(angle_error_deg(peaks.peaks[0].direction, 34.0, 58.0) <= 0.5);
}

TEST_CASE("spectrum is invariant under a global phase rotation") {
  UraConfig ura = test_array();
  auto caps = simulate_ideal({ura}, {dir_source(34.0, 58.0)}, 50, 0.1, 12);
  CsiCapture rotated = caps[0];
  rotated.snapshots *= std::polar(1.0, 1.234);
  auto axis_t = angle_axis_deg(0, 90, 2.0);
  auto axis_p = angle_axis_deg(-180, 178, 2.0);
  SpectrumGrid a = music_spectrum(decompose(sample_covariance(caps[0]), 1),
                                  ApertureShape::of(ura), axis_t, axis_p);
  SpectrumGrid b = music_spectrum(decompose(sample_covariance(rotated), 1),
                                  ApertureShape::of(ura), axis_t, axis_p);
  CHECK((a.values - b.values).norm() < 1e-9 * a.values.norm());
}

TEST_CASE("spectrum scale invariance under complex scaling of snapshots") {
  UraConfig ura = test_array();
  auto caps = simulate_ideal({ura}, {dir_source(20.0, -30.0)}, 50, 0.1, 13);
  CsiCapture scaled = caps[0];
  scaled.snapshots *= cplx(3.0, -4.0);
  auto axis_t = angle_axis_deg(0, 90, 2.0);
  auto axis_p = angle_axis_deg(-180, 178, 2.0);
  SpectrumGrid a = music_spectrum(decompose(sample_covariance(caps[0]), 1),
                                  ApertureShape::of(ura), axis_t, axis_p);
  SpectrumGrid b = music_spectrum(decompose(sample_covariance(scaled), 1),
                                  ApertureShape::of(ura), axis_t, axis_p);
  int ra, ca, rb, cb;
  a.values.maxCoeff(&ra, &ca);
  b.values.maxCoeff(&rb, &cb);
  CHECK(ra == rb);
  CHECK(ca == cb);
}

TEST_CASE("music_spectrum rejects a dimension mismatch") {
  UraConfig ura = test_array();
  auto caps = simulate_ideal({ura}, {dir_source(10, 0)}, 10, 0.0, 14);
  SubspaceDecomposition d = decompose(sample_covariance(caps[0]), 1);
  ApertureShape sub{3, 3, ura.spacing, ura.wavelength};  // 9 != 12
  CHECK_THROWS(music_spectrum(d, sub, angle_axis_deg(0, 90, 1),
                              angle_axis_deg(-180, 179, 1)));
}

TEST_CASE("find_peaks ordering, ties, and shortfall") {
  SpectrumGrid grid;
  grid.theta = angle_axis_deg(0, 20, 10);   // 0, 10, 20 deg
  grid.phi = angle_axis_deg(0, 90, 45);     // 0, 45, 90 deg
  grid.values = Eigen::MatrixXd::Zero(3, 3);
  grid.values(1, 0) = 5.0;  // (10, 0)
  grid.values(1, 2) = 5.0;  // (10, 90): equal peaks, ordered by azimuth
  PeakList peaks = find_peaks(grid, 3, false);
  CHECK(peaks.shortfall == true);  // only two strict maxima exist
  REQUIRE(peaks.peaks.size() == 2);
  CHECK(rad2deg(peaks.peaks[0].direction.azimuth) == doctest::Approx(0.0));
  CHECK(rad2deg(peaks.peaks[1].direction.azimuth) == doctest::Approx(90.0));
  CHECK_THROWS(find_peaks(grid, 0));
}

TEST_CASE("quadratic refinement stays within the peak cell") {
  UraConfig ura = test_array();
  auto caps = simulate_ideal({ura}, {dir_source(33.3, 57.7)}, 200, 0.01, 15);
  SubspaceDecomposition d = decompose(sample_covariance(caps[0]), 1);
  SpectrumGrid grid = music_spectrum(d, ApertureShape::of(ura),
                                     angle_axis_deg(0, 90, 1.0),
                                     angle_axis_deg(-180, 179, 1.0));
  PeakList coarse = find_peaks(grid, 1, false);
  PeakList refined = find_peaks(grid, 1, true);
  REQUIRE(refined.peaks.size() == 1);
  double shift_el = std::abs(refined.peaks[0].direction.elevation -
                             coarse.peaks[0].direction.elevation);
  double shift_az = std::abs(wrap_phase(refined.peaks[0].direction.azimuth -
                                        coarse.peaks[0].direction.azimuth));
  CHECK(shift_el <= deg2rad(0.5) + 1e-12);
  CHECK(shift_az <= deg2rad(0.5) + 1e-12);
  // refinement should not hurt for an off-grid source
  CHECK(angle_error_deg(refined.peaks[0].direction, 33.3, 57.7) <=
        angle_error_deg(coarse.peaks[0].direction, 33.3, 57.7) + 1e-9);
}

TEST_CASE("halving the grid step moves peaks by at most one coarse cell") {
  UraConfig ura = test_array();
  auto caps = simulate_ideal({ura}, {dir_source(41.2, -77.3)}, 100, 0.05, 16);
  SubspaceDecomposition d = decompose(sample_covariance(caps[0]), 1);
  SpectrumGrid coarse = music_spectrum(d, ApertureShape::of(ura),
                                       angle_axis_deg(0, 90, 1.0),
                                       angle_axis_deg(-180, 179, 1.0));
  SpectrumGrid fine = music_spectrum(d, ApertureShape::of(ura),
                                     angle_axis_deg(0, 90, 0.5),
                                     angle_axis_deg(-180, 179.5, 0.5));
  Direction a = find_peaks(coarse, 1, false).peaks[0].direction;
  Direction b = find_peaks(fine, 1, false).peaks[0].direction;
  CHECK(std::abs(a.elevation - b.elevation) <= deg2rad(1.0) + 1e-12);
  CHECK(std::abs(wrap_phase(a.azimuth - b.azimuth)) <= deg2rad(1.0) + 1e-12);
}

TEST_CASE("eigenvalue-gap estimator matches known source counts") {
  UraConfig ura = test_array();
  auto caps = simulate_ideal({ura}, {dir_source(20, 30), dir_source(50, -60)},
                             2000, 0.01, 17);
  Eigen::SelfAdjointEigenSolver<CMat> eig(sample_covariance(caps[0]).values);
  CHECK(estimate_signal_dimension(eig.eigenvalues().reverse()) == 2);
}

TEST_CASE("estimate_aoa resolves four coherent sources with forward-backward smoothing") {
  UraConfig ura = test_array();
  const double snr_db = 15.0;
  auto caps = simulate_ideal({ura}, coherent_four(), 50,
                             std::pow(10.0, -snr_db / 10.0), 4242);
  AoaConfig config;
  config.method = AoaMethod::i_ssmusic;
  config.source_count = 4;
  config.theta_step_deg = 0.5;
  config.phi_step_deg = 0.5;
  config.phi_max_deg = 179.5;
  AoaResult result = estimate_aoa(caps[0], config);
  REQUIRE(result.peaks.peaks.size() == 4);

  const double truth[4][2] = {{21.8, 90}, {32, 56}, {15, -60}, {60, -150}};
  double worst_issmusic = 0.0;
  for (const auto& t : truth) {
    double best = 1e9;
    for (const auto& p : result.peaks.peaks)
      best = std::min(best, angle_error_deg(p.direction, t[0], t[1]));
    worst_issmusic = std::max(worst_issmusic, best);
  }
  CHECK(worst_issmusic <= 3.0);

  // plain MUSIC fails on the same capture
  config.method = AoaMethod::music;
  AoaResult music = estimate_aoa(caps[0], config);
  double worst_music = 0.0;
  for (const auto& t : truth) {
    double best = 1e9;
    for (const auto& p : music.peaks.peaks)
      best = std::min(best, angle_error_deg(p.direction, t[0], t[1]));
    worst_music = std::max(worst_music, best);
  }
  CHECK((music.peaks.shortfall || worst_music > 5.0));
}
