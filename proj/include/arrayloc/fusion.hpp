#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "arrayloc/aoa.hpp"
#include "arrayloc/sim.hpp"

namespace arrayloc {

/// Raised when a ray pair is too close to parallel for the closest-point
/// system to be solvable.
struct DegenerateRayPair : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ClosestPointPair {
  Vec3 point_h = Vec3::Zero();
  Vec3 point_i = Vec3::Zero();
  double t_h = 0.0;  // may be negative (point behind the array); kept, flagged
  double t_i = 0.0;
  double gap = 0.0;  // |point_h - point_i|
};

/// Feet of the common perpendicular between two rays. Throws
/// DegenerateRayPair when the normalized 2x2 system determinant falls below
/// 1e-10.
ClosestPointPair closest_points(const Ray& ray_h, const Ray& ray_i);

struct GeometricFix {
  Vec3 position = Vec3::Zero();  // mean of all pairwise closest points
  std::vector<ClosestPointPair> pairwise;
  double residual = 0.0;  // max pairwise gap, meters
  int degenerate_pairs = 0;
  bool behind_array = false;  // some closest point has negative ray parameter
};

/// Mean of the pairwise closest points over all non-degenerate ray pairs.
GeometricFix geometric_position(const std::vector<Ray>& rays);

/// Localized search sphere: cubic lattice of pitch `voxel` intersected with
/// the ball of radius `radius` around `center`, deterministic point order.
struct Lsoi {
  Vec3 center = Vec3::Zero();
  double radius = 0.1;
  double voxel = 0.005;
  std::vector<Vec3> points;

  static Lsoi make(const Vec3& center, double radius, double voxel);
};

/// Measured inter-array alignment for one array pair (first array is the
/// phase reference). `reference_point` anchors the measured phase to the
/// model so that grid points are referenced consistently; `model_only`
/// drops the measured term (exact-sync scenes).
struct InterArrayAlignment {
  int array_a = 0;
  int array_b = 1;
  int element_a = 0;
  int element_b = 0;
  double delta_gamma_hat = 0.0;  // radians, wrapped
  Vec3 reference_point = Vec3::Zero();
  bool model_only = false;

  static InterArrayAlignment exact_sync(int array_b = 1) {
    InterArrayAlignment a;
    a.array_b = array_b;
    a.model_only = true;
    return a;
  }
};

/// Plane-wave prediction of the cross-array reference measurement at p:
/// center range difference plus the reference elements' steering phases.
double model_reference_phase(const UraConfig& ura_a, const UraConfig& ura_b,
                             int element_a, int element_b, const Vec3& p);

/// Stacked steering matrix (sum of element counts x K): block 0 is array
/// 0's steering at each point, block i carries the model inter-array phase
/// referenced to the measured alignment; each block normalized to unit
/// norm.
CMat build_virtual_steering(const std::vector<UraConfig>& uras,
                            const std::vector<InterArrayAlignment>& alignments,
                            const std::vector<Vec3>& points);

/// Pseudo-spectrum of the stacked decomposition at each candidate point.
Eigen::VectorXd dpd_spectrum(const SubspaceDecomposition& stacked,
                             const CMat& virtual_steering);

enum class LocateMethod { gp, dpd };

struct PositionFix {
  Vec3 position = Vec3::Zero();
  int iterations = 0;
  double spectrum_peak = 0.0;
  LocateMethod method = LocateMethod::gp;
  bool converged = true;
};

struct DpdConfig {
  double radius = 0.1;   // meters
  double voxel = 0.005;  // meters
  int max_iters = 4;
  int signal_dim = 1;
};

/// Direct position determination over a progressively re-centered LSoI:
/// stacks the calibrated captures, evaluates the joint spectrum on the
/// sphere grid, moves the center to the argmax until the displacement
/// drops below the voxel pitch or the iteration cap is reached.
PositionFix locate_dpd(const std::vector<CsiCapture>& captures,
                       const std::vector<InterArrayAlignment>& alignments,
                       const Vec3& init, const DpdConfig& config);

/// Per-axis sliding median with symmetric shrinking windows at the ends.
std::vector<Vec3> smooth_trajectory(const std::vector<Vec3>& fixes, int window);

/// Cross-array phase measured directly from simultaneous (unswitched)
/// captures of two arrays: circular mean of the reference elements' ratio.
InterArrayAlignment measure_alignment_from_ideal(const CsiCapture& cap_a,
                                                 const CsiCapture& cap_b,
                                                 int array_b_index,
                                                 const Vec3& reference_point);

}  // namespace arrayloc
