#include "arrayloc/aoa.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace arrayloc {

Eigen::VectorXd angle_axis_deg(double min_deg, double max_deg, double step_deg) {
  if (!(step_deg > 0.0) || max_deg < min_deg)
    throw std::invalid_argument("angle_axis_deg: bad axis bounds or step");
  const int n = static_cast<int>(std::floor((max_deg - min_deg) / step_deg + 1e-9)) + 1;
  Eigen::VectorXd axis(n);
  for (int i = 0; i < n; ++i) axis(i) = deg2rad(min_deg + i * step_deg);
  return axis;
}

bool SpectrumGrid::phi_wraps() const {
  if (phi.size() < 2) return false;
  const double step = phi(1) - phi(0);
  const double span = phi(phi.size() - 1) - phi(0) + step;
  return std::abs(span - 2.0 * kPi) < 1e-9;
}

Covariance sample_covariance(const CMat& snapshots) {
  if (snapshots.cols() < 1)
    throw std::invalid_argument("sample_covariance: need at least one snapshot");
  Covariance cov;
  cov.snapshots_used = static_cast<int>(snapshots.cols());
  CMat r = snapshots * snapshots.adjoint() / double(snapshots.cols());
  cov.values = 0.5 * (r + r.adjoint().eval());
  return cov;
}

Covariance sample_covariance(const CsiCapture& capture) {
  return sample_covariance(capture.snapshots);
}

SubspaceDecomposition decompose(const Covariance& cov, int signal_dim) {
  const int m = cov.dim();
  if (signal_dim < 1 || signal_dim >= m)
    throw std::invalid_argument("decompose: signal dimension must be in [1, dim)");
  const double scale = std::max(cov.values.norm(), 1e-300);
  if ((cov.values - cov.values.adjoint()).norm() > 1e-9 * scale)
    throw std::invalid_argument("decompose: covariance is not Hermitian");

  Eigen::SelfAdjointEigenSolver<CMat> eig(cov.values);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("decompose: eigendecomposition failed");

  SubspaceDecomposition d;
  d.signal_dim = signal_dim;
  d.eigenvalues = eig.eigenvalues().reverse();
  CMat vectors = eig.eigenvectors().rowwise().reverse();
  d.signal_basis = vectors.leftCols(signal_dim);
  d.noise_basis = vectors.rightCols(m - signal_dim);
  return d;
}

int estimate_signal_dimension(const Eigen::VectorXd& ev) {
  if (ev.size() < 2)
    throw std::invalid_argument("estimate_signal_dimension: need >= 2 eigenvalues");
  int best = 1;
  double best_ratio = -1.0;
  for (int k = 0; k + 1 < ev.size(); ++k) {
    const double denom = std::max(ev(k + 1), 1e-300 * std::max(ev(0), 1.0));
    const double ratio = ev(k) / denom;
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = k + 1;
    }
  }
  return best;
}

namespace {

void check_smoothing(int nx, int ny, const SmoothingSpec& spec) {
  if (spec.m1 < 1 || spec.m1 > nx || spec.m2 < 1 || spec.m2 > ny)
    throw std::invalid_argument("smoothing: subarray does not fit the array");
}

}  // namespace

Covariance forward_smooth(const Covariance& full, int nx, int ny,
                          const SmoothingSpec& spec) {
  check_smoothing(nx, ny, spec);
  if (full.dim() != nx * ny)
    throw std::invalid_argument("forward_smooth: covariance/array shape mismatch");
  const int hx = nx - spec.m1 + 1;
  const int hy = ny - spec.m2 + 1;
  const int sub = spec.m1 * spec.m2;

  CMat acc = CMat::Zero(sub, sub);
  std::vector<int> index(sub);
  for (int oy = 0; oy < hy; ++oy)
    for (int ox = 0; ox < hx; ++ox) {
      for (int sy = 0; sy < spec.m2; ++sy)
        for (int sx = 0; sx < spec.m1; ++sx)
          index[sy * spec.m1 + sx] = (oy + sy) * nx + (ox + sx);
      for (int r = 0; r < sub; ++r)
        for (int c = 0; c < sub; ++c) acc(r, c) += full.values(index[r], index[c]);
    }
  Covariance out;
  out.snapshots_used = full.snapshots_used;
  acc /= double(hx * hy);
  out.values = 0.5 * (acc + acc.adjoint().eval());
  return out;
}

Covariance forward_smooth(const CsiCapture& capture, const SmoothingSpec& spec) {
  return forward_smooth(sample_covariance(capture), capture.ura.nx,
                        capture.ura.ny, spec);
}

Covariance forward_backward_smooth(const Covariance& full, int nx, int ny,
                                   const SmoothingSpec& spec) {
  Covariance fwd = forward_smooth(full, nx, ny, spec);
  const int n = fwd.dim();
  CMat flipped(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      flipped(r, c) = std::conj(fwd.values(n - 1 - r, n - 1 - c));
  Covariance out;
  out.snapshots_used = fwd.snapshots_used;
  CMat r = 0.5 * (fwd.values + flipped);
  out.values = 0.5 * (r + r.adjoint().eval());
  return out;
}

Covariance forward_backward_smooth(const CsiCapture& capture,
                                   const SmoothingSpec& spec) {
  return forward_backward_smooth(sample_covariance(capture), capture.ura.nx,
                                 capture.ura.ny, spec);
}

SpectrumGrid music_spectrum(const SubspaceDecomposition& decomp,
                            const ApertureShape& shape,
                            const Eigen::VectorXd& theta_axis,
                            const Eigen::VectorXd& phi_axis) {
  const int m = shape.count();
  if (decomp.dim() != m)
    throw std::invalid_argument("music_spectrum: aperture/decomposition dimension mismatch");
  for (int i = 1; i < theta_axis.size(); ++i)
    if (theta_axis(i) <= theta_axis(i - 1))
      throw std::invalid_argument("music_spectrum: theta axis not increasing");
  for (int i = 1; i < phi_axis.size(); ++i)
    if (phi_axis(i) <= phi_axis(i - 1))
      throw std::invalid_argument("music_spectrum: phi axis not increasing");

  const int nt = static_cast<int>(theta_axis.size());
  const int np = static_cast<int>(phi_axis.size());
  const double k = 2.0 * kPi * shape.spacing / shape.wavelength;

  SpectrumGrid grid;
  grid.theta = theta_axis;
  grid.phi = phi_axis;
  grid.values.resize(nt, np);

  Eigen::VectorXd cos_phi(np), sin_phi(np);
  for (int j = 0; j < np; ++j) {
    cos_phi(j) = std::cos(phi_axis(j));
    sin_phi(j) = std::sin(phi_axis(j));
  }

  const CMat noise = decomp.noise_basis.adjoint();  // (m-D) x m
  CMat steering(m, np);
  CVec ux(shape.nx), vy(shape.ny);
  for (int ti = 0; ti < nt; ++ti) {
    const double se = std::sin(theta_axis(ti));
    for (int j = 0; j < np; ++j) {
      const cplx u = std::polar(1.0, k * se * cos_phi(j));
      const cplx v = std::polar(1.0, k * se * sin_phi(j));
      ux(0) = 1.0;
      for (int i = 1; i < shape.nx; ++i) ux(i) = ux(i - 1) * u;
      vy(0) = 1.0;
      for (int i = 1; i < shape.ny; ++i) vy(i) = vy(i - 1) * v;
      for (int my = 0; my < shape.ny; ++my)
        for (int mx = 0; mx < shape.nx; ++mx)
          steering(my * shape.nx + mx, j) = vy(my) * ux(mx);
    }
    CMat projected = noise * steering;  // (m-D) x np
    for (int j = 0; j < np; ++j) {
      const double num = double(m);  // unit-modulus entries: a^H a = m
      const double den = projected.col(j).squaredNorm() + 1e-12 * num;
      grid.values(ti, j) = num / den;
    }
  }
  return grid;
}

namespace {

struct Candidate {
  int ti, pj;
  double value;
};

double axis_refine(double vm, double v0, double vp) {
  const double denom = vm - 2.0 * v0 + vp;
  if (std::abs(denom) < 1e-300) return 0.0;
  double offset = 0.5 * (vm - vp) / denom;
  return std::clamp(offset, -0.5, 0.5);
}

}  // namespace

PeakList find_peaks(const SpectrumGrid& spectrum, int count, bool refine) {
  if (count < 1) throw std::invalid_argument("find_peaks: count must be >= 1");
  const int nt = static_cast<int>(spectrum.theta.size());
  const int np = static_cast<int>(spectrum.phi.size());
  const bool wrap = spectrum.phi_wraps();

  auto at = [&](int ti, int pj) -> double {
    if (pj < 0 || pj >= np) {
      if (!wrap) return -1.0;  // spectrum values are nonnegative
      pj = (pj + np) % np;
    }
    return spectrum.values(ti, pj);
  };

  std::vector<Candidate> candidates;
  for (int ti = 0; ti < nt; ++ti)
    for (int pj = 0; pj < np; ++pj) {
      const double v = spectrum.values(ti, pj);
      bool is_peak = true;
      for (int dt = -1; dt <= 1 && is_peak; ++dt)
        for (int dp = -1; dp <= 1 && is_peak; ++dp) {
          if (dt == 0 && dp == 0) continue;
          const int t2 = ti + dt;
          if (t2 < 0 || t2 >= nt) continue;
          if (at(t2, pj + dp) >= v) is_peak = false;
        }
      if (is_peak) candidates.push_back({ti, pj, v});
    }

  std::sort(candidates.begin(), candidates.end(),
            [&](const Candidate& a, const Candidate& b) {
              if (a.value != b.value) return a.value > b.value;
              if (a.ti != b.ti) return a.ti < b.ti;
              return a.pj < b.pj;
            });

  PeakList out;
  out.shortfall = static_cast<int>(candidates.size()) < count;
  const int take = std::min<int>(count, static_cast<int>(candidates.size()));
  for (int i = 0; i < take; ++i) {
    const auto& c = candidates[i];
    double theta = spectrum.theta(c.ti);
    double phi = spectrum.phi(c.pj);
    if (refine) {
      if (c.ti > 0 && c.ti + 1 < nt) {
        const double dt = spectrum.theta(1) - spectrum.theta(0);
        theta += dt * axis_refine(at(c.ti - 1, c.pj), c.value, at(c.ti + 1, c.pj));
      }
      const double vm = at(c.ti, c.pj - 1);
      const double vp = at(c.ti, c.pj + 1);
      if (vm >= 0.0 && vp >= 0.0) {
        const double dp = spectrum.phi(1) - spectrum.phi(0);
        phi += dp * axis_refine(vm, c.value, vp);
      }
    }
    AoaEstimate est;
    est.direction = Direction::from_radians(std::clamp(theta, 0.0, kPi), phi);
    est.spectrum_value = c.value;
    out.peaks.push_back(est);
  }
  return out;
}

AoaResult estimate_aoa(const CsiCapture& capture, const AoaConfig& config) {
  const auto& ura = capture.ura;
  Covariance cov;
  ApertureShape shape;
  switch (config.method) {
    case AoaMethod::music:
      cov = sample_covariance(capture);
      shape = ApertureShape::of(ura);
      break;
    case AoaMethod::ss_music: {
      SmoothingSpec spec = config.smoothing;
      spec.mode = SmoothingMode::forward_only;
      cov = forward_smooth(capture, spec);
      shape = ApertureShape::subarray(ura, spec);
      break;
    }
    case AoaMethod::i_ssmusic: {
      SmoothingSpec spec = config.smoothing;
      spec.mode = SmoothingMode::forward_backward;
      cov = forward_backward_smooth(capture, spec);
      shape = ApertureShape::subarray(ura, spec);
      break;
    }
  }

  AoaResult result;
  int d = config.source_count;
  if (d <= 0) {
    Eigen::SelfAdjointEigenSolver<CMat> eig(cov.values);
    d = estimate_signal_dimension(eig.eigenvalues().reverse());
  }
  d = std::min(d, cov.dim() - 1);
  result.signal_dim = d;
  SubspaceDecomposition decomp = decompose(cov, d);
  result.spectrum = music_spectrum(
      decomp, shape,
      angle_axis_deg(config.theta_min_deg, config.theta_max_deg, config.theta_step_deg),
      angle_axis_deg(config.phi_min_deg, config.phi_max_deg, config.phi_step_deg));
  result.peaks = find_peaks(result.spectrum, config.source_count > 0
                                                 ? config.source_count
                                                 : d,
                            config.refine);
  for (auto& p : result.peaks.peaks) p.array_id = capture.array_id;
  return result;
}

const char* to_string(AoaMethod method) {
  switch (method) {
    case AoaMethod::music: return "music";
    case AoaMethod::ss_music: return "ss-music";
    case AoaMethod::i_ssmusic: return "i-ssmusic";
  }
  return "unknown";
}

AoaMethod aoa_method_from_string(const std::string& name) {
  if (name == "music") return AoaMethod::music;
  if (name == "ss-music") return AoaMethod::ss_music;
  if (name == "i-ssmusic") return AoaMethod::i_ssmusic;
  throw std::invalid_argument("unknown AoA method: " + name);
}

}  // namespace arrayloc
