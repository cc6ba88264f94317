#include "arrayloc/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace arrayloc {

double deg2rad(double deg) { return deg * kPi / 180.0; }
double rad2deg(double rad) { return rad * 180.0 / kPi; }

double wrap_phase(double rad) {
  double w = std::remainder(rad, 2.0 * kPi);
  if (w >= kPi) w -= 2.0 * kPi;  // remainder returns (-pi, pi]; want [-pi, pi)
  return w;
}

double circular_mean(const std::vector<double>& phases) {
  if (phases.empty()) throw std::invalid_argument("circular_mean: empty input");
  cplx acc = 0.0;
  for (double p : phases) acc += std::polar(1.0, p);
  if (std::abs(acc) == 0.0)
    throw std::invalid_argument("circular_mean: phases cancel, mean undefined");
  return wrap_phase(std::arg(acc));
}

Direction Direction::from_radians(double elevation_rad, double azimuth_rad) {
  if (!std::isfinite(elevation_rad) || !std::isfinite(azimuth_rad))
    throw std::invalid_argument("Direction: non-finite angle");
  if (elevation_rad < 0.0 || elevation_rad > kPi)
    throw std::invalid_argument("Direction: elevation outside [0, pi]");
  Direction d;
  d.elevation = elevation_rad;
  d.azimuth = wrap_phase(azimuth_rad);
  return d;
}

Direction Direction::from_degrees(double elevation_deg, double azimuth_deg) {
  return from_radians(deg2rad(elevation_deg), deg2rad(azimuth_deg));
}

Vec3 Direction::unit_vector() const {
  double se = std::sin(elevation);
  return {se * std::cos(azimuth), se * std::sin(azimuth), std::cos(elevation)};
}

GroupingLayout GroupingLayout::standard(int element_count) {
  if (element_count < 1)
    throw std::invalid_argument("GroupingLayout: need at least one element");
  GroupingLayout layout;
  for (int start = 0; start < element_count; start += 3) {
    std::vector<int> group;
    for (int m = start; m < std::min(start + 3, element_count); ++m)
      group.push_back(m);
    int g = static_cast<int>(layout.groups.size());
    // Offset pattern 0,2,1,0,... keeps any three consecutive CPAs on
    // distinct RF chains so redundant captures can sample them together.
    int offset = (2 * g) % 3;
    int cpa = start + std::min<int>(offset, static_cast<int>(group.size()) - 1);
    layout.groups.push_back(std::move(group));
    layout.cpa.push_back(cpa);
  }
  return layout;
}

UraConfig UraConfig::make(std::string id, int nx, int ny, double spacing,
                          double wavelength, const Vec3& center,
                          const Mat3& orientation) {
  UraConfig ura;
  ura.id = std::move(id);
  ura.nx = nx;
  ura.ny = ny;
  ura.spacing = spacing;
  ura.wavelength = wavelength;
  ura.center = center;
  ura.orientation = orientation;
  ura.grouping = GroupingLayout::standard(nx * ny);
  ura.validate();
  return ura;
}

void UraConfig::validate() const {
  if (nx < 2 || ny < 2)
    throw std::invalid_argument("UraConfig: need at least 2 elements per axis");
  if (!(spacing > 0.0) || !(wavelength > 0.0))
    throw std::invalid_argument("UraConfig: spacing and wavelength must be positive");
  Mat3 should_be_identity = orientation.transpose() * orientation;
  if ((should_be_identity - Mat3::Identity()).norm() > 1e-9 ||
      orientation.determinant() < 0.0)
    throw std::invalid_argument("UraConfig: orientation is not a proper rotation");
  const int m = element_count();
  std::vector<char> seen(m, 0);
  if (grouping.groups.size() != grouping.cpa.size())
    throw std::invalid_argument("UraConfig: grouping/CPA size mismatch");
  for (size_t g = 0; g < grouping.groups.size(); ++g) {
    const auto& group = grouping.groups[g];
    if (group.empty() || group.size() > 3)
      throw std::invalid_argument("UraConfig: groups must have 1..3 elements");
    bool cpa_in_group = false;
    for (int e : group) {
      if (e < 0 || e >= m) throw std::invalid_argument("UraConfig: element out of range");
      if (seen[e]) throw std::invalid_argument("UraConfig: element in two groups");
      seen[e] = 1;
      cpa_in_group = cpa_in_group || (e == grouping.cpa[g]);
    }
    if (!cpa_in_group)
      throw std::invalid_argument("UraConfig: CPA not a member of its group");
  }
  for (int e = 0; e < m; ++e)
    if (!seen[e]) throw std::invalid_argument("UraConfig: grouping does not cover all elements");
}

Vec3 UraConfig::element_local(int element) const {
  int mx = element % nx;
  int my = element / nx;
  double cx = 0.5 * (nx - 1) * spacing;
  double cy = 0.5 * (ny - 1) * spacing;
  return {mx * spacing - cx, my * spacing - cy, 0.0};
}

Vec3 UraConfig::element_world(int element) const {
  return center + orientation * element_local(element);
}

Mat3 rotation_from_yaw_pitch_roll_deg(double yaw, double pitch, double roll) {
  using Eigen::AngleAxisd;
  return (AngleAxisd(deg2rad(yaw), Vec3::UnitZ()) *
          AngleAxisd(deg2rad(pitch), Vec3::UnitY()) *
          AngleAxisd(deg2rad(roll), Vec3::UnitX()))
      .toRotationMatrix();
}

CVec steering_vector(int nx, int ny, double spacing, double wavelength,
                     const Direction& dir) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("steering_vector: bad shape");
  const double k = 2.0 * kPi * spacing / wavelength;
  const double se = std::sin(dir.elevation);
  const cplx u = std::polar(1.0, k * se * std::cos(dir.azimuth));
  const cplx v = std::polar(1.0, k * se * std::sin(dir.azimuth));
  CVec ax(nx), ay(ny);
  ax(0) = 1.0;
  for (int i = 1; i < nx; ++i) ax(i) = ax(i - 1) * u;
  ay(0) = 1.0;
  for (int j = 1; j < ny; ++j) ay(j) = ay(j - 1) * v;
  CVec a(nx * ny);  // Kronecker ay (x) ax: index m = my*nx + mx
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) a(j * nx + i) = ay(j) * ax(i);
  return a;
}

CVec steering_vector(const UraConfig& ura, const Direction& dir) {
  return steering_vector(ura.nx, ura.ny, ura.spacing, ura.wavelength, dir);
}

double max_element_spacing(double theta_limit_rad) {
  if (!(theta_limit_rad >= 0.0) || theta_limit_rad > kPi / 2 + 1e-12)
    throw std::invalid_argument("max_element_spacing: scan limit outside [0, pi/2]");
  return 1.0 / (1.0 + std::abs(std::sin(theta_limit_rad)));
}

Direction direction_from_point(const UraConfig& ura, const Vec3& p) {
  Vec3 local = ura.orientation.transpose() * (p - ura.center);
  double r = local.norm();
  if (r < 1e-12)
    throw std::invalid_argument("direction_from_point: point coincides with array center");
  double elevation = std::acos(std::clamp(local.z() / r, -1.0, 1.0));
  double azimuth = (std::abs(local.x()) + std::abs(local.y()) > 0.0)
                       ? std::atan2(local.y(), local.x())
                       : 0.0;
  return Direction::from_radians(elevation, azimuth);
}

Ray ray_from_aoa(const UraConfig& ura, const Direction& dir) {
  Ray ray;
  ray.anchor = ura.center;
  ray.direction = ura.orientation * dir.unit_vector();
  ray.direction.normalize();
  return ray;
}

}  // namespace arrayloc
