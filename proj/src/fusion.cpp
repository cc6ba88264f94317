#include "arrayloc/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace arrayloc {

ClosestPointPair closest_points(const Ray& ray_h, const Ray& ray_i) {
  const Vec3& dh = ray_h.direction;
  const Vec3& di = ray_i.direction;
  const Vec3 w0 = ray_h.anchor - ray_i.anchor;

  // Perpendicular-foot conditions (w0 + t_h dh - t_i di) . dh = 0 and
  // . di = 0 as a 2x2 system in (t_h, t_i).
  const double a = dh.dot(dh);
  const double b = dh.dot(di);
  const double c = di.dot(di);
  const double det = a * c - b * b;  // in [0, 1] for unit directions
  if (det < 1e-10 * a * c)
    throw DegenerateRayPair("closest_points: rays are near-parallel");

  const double rh = -w0.dot(dh);
  const double ri = -w0.dot(di);
  ClosestPointPair pair;
  pair.t_h = (c * rh - b * ri) / det;
  pair.t_i = (b * rh - a * ri) / det;
  pair.point_h = ray_h.anchor + pair.t_h * dh;
  pair.point_i = ray_i.anchor + pair.t_i * di;
  pair.gap = (pair.point_h - pair.point_i).norm();
  return pair;
}

GeometricFix geometric_position(const std::vector<Ray>& rays) {
  if (rays.size() < 2)
    throw std::invalid_argument("geometric_position: need at least two rays");
  GeometricFix fix;
  Vec3 acc = Vec3::Zero();
  int points = 0;
  for (size_t h = 0; h < rays.size(); ++h)
    for (size_t i = h + 1; i < rays.size(); ++i) {
      try {
        ClosestPointPair pair = closest_points(rays[h], rays[i]);
        acc += pair.point_h + pair.point_i;
        points += 2;
        fix.residual = std::max(fix.residual, pair.gap);
        fix.behind_array = fix.behind_array || pair.t_h < 0.0 || pair.t_i < 0.0;
        fix.pairwise.push_back(pair);
      } catch (const DegenerateRayPair&) {
        ++fix.degenerate_pairs;
      }
    }
  if (points == 0)
    throw std::runtime_error("geometric_position: all ray pairs degenerate, no fix");
  fix.position = acc / double(points);
  return fix;
}

Lsoi Lsoi::make(const Vec3& center, double radius, double voxel) {
  if (!(radius > 0.0) || !(voxel > 0.0))
    throw std::invalid_argument("Lsoi: radius and voxel must be positive");
  Lsoi lsoi;
  lsoi.center = center;
  lsoi.radius = radius;
  lsoi.voxel = voxel;
  const int n = static_cast<int>(std::floor(radius / voxel + 1e-9));
  const double r2 = radius * radius;
  for (int iz = -n; iz <= n; ++iz)
    for (int iy = -n; iy <= n; ++iy)
      for (int ix = -n; ix <= n; ++ix) {
        const Vec3 offset(ix * voxel, iy * voxel, iz * voxel);
        if (offset.squaredNorm() <= r2 + 1e-15)
          lsoi.points.push_back(center + offset);
      }
  return lsoi;
}

double model_reference_phase(const UraConfig& ura_a, const UraConfig& ura_b,
                             int element_a, int element_b, const Vec3& p) {
  double phase = inter_array_phase(ura_a.center, ura_b.center, p, ura_a.wavelength);
  if (element_a != 0) {
    const CVec sa = steering_vector(ura_a, direction_from_point(ura_a, p));
    phase -= std::arg(sa(element_a));
  }
  if (element_b != 0) {
    const CVec sb = steering_vector(ura_b, direction_from_point(ura_b, p));
    phase += std::arg(sb(element_b));
  }
  return phase;
}

CMat build_virtual_steering(const std::vector<UraConfig>& uras,
                            const std::vector<InterArrayAlignment>& alignments,
                            const std::vector<Vec3>& points) {
  if (uras.empty()) throw std::invalid_argument("build_virtual_steering: no arrays");
  if (points.empty()) throw std::invalid_argument("build_virtual_steering: no points");

  std::vector<const InterArrayAlignment*> per_array(uras.size(), nullptr);
  for (const auto& al : alignments) {
    if (al.array_a != 0 || al.array_b <= 0 ||
        al.array_b >= static_cast<int>(uras.size()))
      throw std::invalid_argument("build_virtual_steering: alignment pair out of range");
    per_array[al.array_b] = &al;
  }
  for (size_t i = 1; i < uras.size(); ++i)
    if (!per_array[i])
      throw std::invalid_argument("build_virtual_steering: missing alignment for array " +
                                  std::to_string(i));

  // Residual hardware offset of each secondary array: measured alignment
  // minus the model prediction at the alignment's reference point.
  std::vector<double> residual(uras.size(), 0.0);
  for (size_t i = 1; i < uras.size(); ++i) {
    const auto& al = *per_array[i];
    if (al.model_only) continue;
    residual[i] = wrap_phase(
        al.delta_gamma_hat -
        model_reference_phase(uras[0], uras[i], al.element_a, al.element_b,
                              al.reference_point));
  }

  int total = 0;
  for (const auto& u : uras) total += u.element_count();
  CMat stacked(total, static_cast<int>(points.size()));

  for (size_t k = 0; k < points.size(); ++k) {
    const Vec3& p = points[k];
    int row = 0;
    for (size_t i = 0; i < uras.size(); ++i) {
      const auto& ura = uras[i];
      CVec block = steering_vector(ura, direction_from_point(ura, p));
      if (i > 0) {
        const double phase =
            inter_array_phase(uras[0].center, ura.center, p, ura.wavelength) +
            residual[i];
        block *= std::polar(1.0, phase);
      }
      block /= block.norm();
      stacked.block(row, static_cast<int>(k), ura.element_count(), 1) = block;
      row += ura.element_count();
    }
  }
  return stacked;
}

Eigen::VectorXd dpd_spectrum(const SubspaceDecomposition& stacked,
                             const CMat& virtual_steering) {
  if (stacked.dim() != virtual_steering.rows())
    throw std::invalid_argument("dpd_spectrum: steering/decomposition dimension mismatch");
  const CMat projected = stacked.noise_basis.adjoint() * virtual_steering;
  Eigen::VectorXd values(virtual_steering.cols());
  for (int k = 0; k < virtual_steering.cols(); ++k) {
    const double num = virtual_steering.col(k).squaredNorm();
    const double den = projected.col(k).squaredNorm() + 1e-12 * num;
    values(k) = num / den;
  }
  return values;
}

PositionFix locate_dpd(const std::vector<CsiCapture>& captures,
                       const std::vector<InterArrayAlignment>& alignments,
                       const Vec3& init, const DpdConfig& config) {
  if (captures.size() < 2)
    throw std::invalid_argument("locate_dpd: need at least two captures");
  const int t = captures[0].snapshot_count();
  int total = 0;
  std::vector<UraConfig> uras;
  for (const auto& cap : captures) {
    if (cap.snapshot_count() != t)
      throw std::invalid_argument("locate_dpd: captures have different snapshot counts");
    if (cap.switched())
      throw std::invalid_argument("locate_dpd: captures must be calibrated (unswitched)");
    total += cap.element_count();
    uras.push_back(cap.ura);
  }

  CMat stacked_snapshots(total, t);
  int row = 0;
  for (const auto& cap : captures) {
    stacked_snapshots.middleRows(row, cap.element_count()) = cap.snapshots;
    row += cap.element_count();
  }
  const int d = std::min(config.signal_dim, total - 1);
  SubspaceDecomposition decomp = decompose(sample_covariance(stacked_snapshots), d);

  PositionFix fix;
  fix.method = LocateMethod::dpd;
  fix.converged = false;
  Vec3 center = init;
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    fix.iterations = iter;
    Lsoi lsoi = Lsoi::make(center, config.radius, config.voxel);
    CMat steering = build_virtual_steering(uras, alignments, lsoi.points);
    Eigen::VectorXd spectrum = dpd_spectrum(decomp, steering);
    int best = 0;
    spectrum.maxCoeff(&best);
    fix.position = lsoi.points[best];
    fix.spectrum_peak = spectrum(best);
    const double displacement = (fix.position - center).norm();
    center = fix.position;
    if (displacement < config.voxel) {
      fix.converged = true;
      break;
    }
  }
  return fix;
}

std::vector<Vec3> smooth_trajectory(const std::vector<Vec3>& fixes, int window) {
  if (fixes.empty())
    throw std::invalid_argument("smooth_trajectory: empty trajectory");
  if (window < 1 || window % 2 == 0)
    throw std::invalid_argument("smooth_trajectory: window must be odd and >= 1");
  const int n = static_cast<int>(fixes.size());
  const int half = window / 2;
  std::vector<Vec3> out(fixes.size());
  std::vector<double> buf;
  for (int i = 0; i < n; ++i) {
    const int h = std::min({half, i, n - 1 - i});  // shrink at the ends
    for (int axis = 0; axis < 3; ++axis) {
      buf.clear();
      for (int k = i - h; k <= i + h; ++k) buf.push_back(fixes[k](axis));
      std::nth_element(buf.begin(), buf.begin() + h, buf.end());
      out[i](axis) = buf[h];
    }
  }
  return out;
}

InterArrayAlignment measure_alignment_from_ideal(const CsiCapture& cap_a,
                                                 const CsiCapture& cap_b,
                                                 int array_b_index,
                                                 const Vec3& reference_point) {
  if (cap_a.snapshot_count() != cap_b.snapshot_count())
    throw std::invalid_argument("measure_alignment_from_ideal: snapshot mismatch");
  cplx acc = 0.0;
  for (int t = 0; t < cap_a.snapshot_count(); ++t)
    acc += cap_b.snapshots(0, t) * std::conj(cap_a.snapshots(0, t));
  if (std::abs(acc) == 0.0)
    throw std::invalid_argument("measure_alignment_from_ideal: degenerate captures");
  InterArrayAlignment al;
  al.array_a = 0;
  al.array_b = array_b_index;
  al.element_a = 0;
  al.element_b = 0;
  al.delta_gamma_hat = wrap_phase(std::arg(acc));
  al.reference_point = reference_point;
  return al;
}

}  // namespace arrayloc
