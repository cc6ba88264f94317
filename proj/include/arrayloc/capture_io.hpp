#pragma once

#include <iosfwd>
#include <string>

#include "arrayloc/aoa.hpp"
#include "arrayloc/calib.hpp"
#include "arrayloc/fusion.hpp"
#include "arrayloc/sim.hpp"

namespace arrayloc {

/// Documented columnar capture format: geometry/schedule header, one data
/// row per (snapshot, live element), optional simulation-only truth block.
void write_capture(std::ostream& out, const CsiCapture& capture,
                   bool include_truth = true);
void write_capture_file(const std::string& path, const CsiCapture& capture,
                        bool include_truth = true);
CsiCapture read_capture(std::istream& in, const std::string& origin);
CsiCapture read_capture_file(const std::string& path);

void write_cross_capture(std::ostream& out, const CrossArrayCapture& cross);
void write_cross_capture_file(const std::string& path, const CrossArrayCapture& cross);
CrossArrayCapture read_cross_capture(std::istream& in, const std::string& origin);
CrossArrayCapture read_cross_capture_file(const std::string& path);

void write_profiles(std::ostream& out, const CalibrationSet& set);
void write_profiles_file(const std::string& path, const CalibrationSet& set);
CalibrationSet read_profiles(std::istream& in, const std::string& origin);
CalibrationSet read_profiles_file(const std::string& path);

/// Columnar spectrum export: theta_deg, phi_deg, value.
void write_spectrum(std::ostream& out, const std::string& array_id,
                    const std::string& method, const SpectrumGrid& grid);
void write_spectrum_file(const std::string& path, const std::string& array_id,
                         const std::string& method, const SpectrumGrid& grid);

/// Peak list export: array id, angles in degrees, spectrum value.
void write_peaks(std::ostream& out, const std::string& method,
                 const PeakList& peaks);
void write_peaks_file(const std::string& path, const std::string& method,
                      const PeakList& peaks);

void write_fix(std::ostream& out, const PositionFix& fix, double residual_m);
void write_fix_file(const std::string& path, const PositionFix& fix,
                    double residual_m);

/// Columnar LSoI spectrum export: x, y, z, value.
void write_lsoi_spectrum(std::ostream& out, const Lsoi& lsoi,
                         const Eigen::VectorXd& values);
void write_lsoi_spectrum_file(const std::string& path, const Lsoi& lsoi,
                              const Eigen::VectorXd& values);

}  // namespace arrayloc
