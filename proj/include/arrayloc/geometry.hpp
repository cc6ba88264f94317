#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace arrayloc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using cplx = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

double deg2rad(double deg);
double rad2deg(double rad);

/// Wraps a phase to the canonical interval [-pi, pi).
double wrap_phase(double rad);

/// Circular mean of a set of phases, result wrapped to [-pi, pi).
double circular_mean(const std::vector<double>& phases);

/// Arrival direction in an array's local frame.
/// Elevation is measured down from the local +z (boresight) axis, azimuth
/// counterclockwise from local +x. Azimuth is wrapped to [-pi, pi) on
/// construction; elevation must lie in [0, pi].
struct Direction {
  double elevation = 0.0;
  double azimuth = 0.0;

  static Direction from_radians(double elevation_rad, double azimuth_rad);
  static Direction from_degrees(double elevation_deg, double azimuth_deg);

  /// Unit vector (local frame) pointing toward the source.
  Vec3 unit_vector() const;
  bool in_front_hemisphere() const { return elevation <= kPi / 2 + 1e-12; }
};

/// Parametric ray: anchor + t * direction, with unit direction.
struct Ray {
  Vec3 anchor = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
};

/// Switch-grouping of array elements: an ordered partition into capture
/// groups of up to three elements plus the designated calibration-point
/// antenna (CPA) of each group.
struct GroupingLayout {
  std::vector<std::vector<int>> groups;
  std::vector<int> cpa;  // one element index per group

  /// Consecutive triples in element order; CPA chain chosen so that any
  /// three consecutive CPAs sit on distinct RF chains.
  static GroupingLayout standard(int element_count);
};

/// Geometry, pose, and grouping of one uniform rectangular array.
/// Elements live on the local xy-plane with x-major ordering
/// (element m = my * nx + mx); `center` is the centroid of the elements
/// and `orientation` rotates local coordinates into the world frame.
struct UraConfig {
  std::string id = "ura";
  int nx = 0;  // elements along local x
  int ny = 0;  // elements along local y
  double spacing = 0.0;     // meters
  double wavelength = 0.0;  // meters
  Vec3 center = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();
  GroupingLayout grouping;

  static UraConfig make(std::string id, int nx, int ny, double spacing,
                        double wavelength, const Vec3& center,
                        const Mat3& orientation);

  int element_count() const { return nx * ny; }
  int chain_of(int element) const { return element % 3; }

  Vec3 element_local(int element) const;
  Vec3 element_world(int element) const;

  /// Local boresight (+z) expressed in the world frame.
  Vec3 boresight() const { return orientation.col(2); }

  void validate() const;  // throws std::invalid_argument on bad config
};

/// Intrinsic z-y-x rotation (yaw about z, then pitch about y, then roll
/// about x), angles in degrees.
Mat3 rotation_from_yaw_pitch_roll_deg(double yaw, double pitch, double roll);

/// Plane-wave steering vector of an nx-by-ny rectangular grid at spacing d
/// (meters) for wavelength lambda: entry m = my*nx + mx carries phase
/// 2*pi*d/lambda * (mx*sin(el)*cos(az) + my*sin(el)*sin(az)); entry 0 is 1.
CVec steering_vector(int nx, int ny, double spacing, double wavelength,
                     const Direction& dir);
CVec steering_vector(const UraConfig& ura, const Direction& dir);

/// Largest element spacing (in multiples of lambda) that keeps the grating
/// lobes out of a scan extending theta_limit radians from broadside.
double max_element_spacing(double theta_limit_rad);

/// Direction of point p in the array's local frame. Throws if p coincides
/// with the array center.
Direction direction_from_point(const UraConfig& ura, const Vec3& p);

/// World-frame ray anchored at the array center toward the given direction.
Ray ray_from_aoa(const UraConfig& ura, const Direction& dir);

}  // namespace arrayloc
