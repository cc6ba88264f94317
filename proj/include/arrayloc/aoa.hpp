#pragma once

#include <string>
#include <vector>

#include "arrayloc/sim.hpp"

namespace arrayloc {

struct Covariance {
  CMat values;  // Hermitian
  int snapshots_used = 0;

  int dim() const { return static_cast<int>(values.rows()); }
};

struct SubspaceDecomposition {
  CMat signal_basis;            // dim x D, orthonormal columns
  CMat noise_basis;             // dim x (dim - D)
  Eigen::VectorXd eigenvalues;  // descending
  int signal_dim = 0;

  int dim() const { return static_cast<int>(signal_basis.rows()); }
};

enum class SmoothingMode { forward_only, forward_backward };

struct SmoothingSpec {
  int m1 = 0;  // subarray extent along x
  int m2 = 0;  // subarray extent along y
  SmoothingMode mode = SmoothingMode::forward_backward;

  int subarray_count(int nx, int ny) const {
    return (nx - m1 + 1) * (ny - m2 + 1);
  }
};

/// Rectangular aperture on which steering vectors are evaluated: the full
/// array or a smoothed subarray.
struct ApertureShape {
  int nx = 0;
  int ny = 0;
  double spacing = 0.0;
  double wavelength = 0.0;

  static ApertureShape of(const UraConfig& ura) {
    return {ura.nx, ura.ny, ura.spacing, ura.wavelength};
  }
  static ApertureShape subarray(const UraConfig& ura, const SmoothingSpec& s) {
    return {s.m1, s.m2, ura.spacing, ura.wavelength};
  }
  int count() const { return nx * ny; }
};

struct SpectrumGrid {
  Eigen::VectorXd theta;  // radians, strictly increasing
  Eigen::VectorXd phi;    // radians, strictly increasing
  Eigen::MatrixXd values; // theta.size() x phi.size(), nonnegative

  bool phi_wraps() const;  // axis covers the full circle
};

struct AoaEstimate {
  Direction direction;
  double spectrum_value = 0.0;
  std::string array_id;
};

struct PeakList {
  std::vector<AoaEstimate> peaks;
  bool shortfall = false;  // fewer strict local maxima than requested
};

/// Inclusive angular axis in radians from degree bounds and step.
Eigen::VectorXd angle_axis_deg(double min_deg, double max_deg, double step_deg);

/// (1/T) Y Y^H, Hermitian-symmetrized.
Covariance sample_covariance(const CsiCapture& capture);
Covariance sample_covariance(const CMat& snapshots);

/// Orthonormal split of a Hermitian covariance by descending eigenvalues.
SubspaceDecomposition decompose(const Covariance& cov, int signal_dim);

/// Largest-ratio eigenvalue gap heuristic for unknown source counts.
int estimate_signal_dimension(const Eigen::VectorXd& descending_eigenvalues);

/// Mean covariance over all contiguous m1-by-m2 subarrays (x-major element
/// order within each subarray).
Covariance forward_smooth(const CsiCapture& capture, const SmoothingSpec& spec);
Covariance forward_smooth(const Covariance& full, int nx, int ny,
                          const SmoothingSpec& spec);

/// Forward smoothing augmented with the exchange-conjugated covariance:
/// (Rf + J conj(Rf) J) / 2.
Covariance forward_backward_smooth(const CsiCapture& capture,
                                   const SmoothingSpec& spec);
Covariance forward_backward_smooth(const Covariance& full, int nx, int ny,
                                   const SmoothingSpec& spec);

/// 2D pseudo-spectrum (a^H a) / (a^H En En^H a + eps) over the grid, with
/// eps = 1e-12 * a^H a guarding exact orthogonality.
SpectrumGrid music_spectrum(const SubspaceDecomposition& decomp,
                            const ApertureShape& shape,
                            const Eigen::VectorXd& theta_axis,
                            const Eigen::VectorXd& phi_axis);

/// Up to `count` strict local maxima by descending value, ties broken by
/// lower elevation then lower azimuth; optional quadratic refinement within
/// the peak cell. Azimuth neighborhoods wrap when the axis covers the
/// circle.
PeakList find_peaks(const SpectrumGrid& spectrum, int count, bool refine = true);

enum class AoaMethod { music, ss_music, i_ssmusic };

struct AoaConfig {
  AoaMethod method = AoaMethod::i_ssmusic;
  SmoothingSpec smoothing{3, 3, SmoothingMode::forward_backward};
  double theta_min_deg = 0.0, theta_max_deg = 90.0, theta_step_deg = 0.2;
  double phi_min_deg = -180.0, phi_max_deg = 179.8, phi_step_deg = 0.2;
  int source_count = 1;  // 0 selects the eigenvalue-gap estimate
  bool refine = true;
};

struct AoaResult {
  PeakList peaks;
  SpectrumGrid spectrum;
  int signal_dim = 0;
};

/// Covariance (per method), subspace split, spectrum, peak extraction.
AoaResult estimate_aoa(const CsiCapture& capture, const AoaConfig& config);

const char* to_string(AoaMethod method);
AoaMethod aoa_method_from_string(const std::string& name);

}  // namespace arrayloc
