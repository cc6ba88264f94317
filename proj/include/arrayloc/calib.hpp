#pragma once

#include <string>
#include <vector>

#include "arrayloc/sim.hpp"

namespace arrayloc {

/// Measured phase offsets of one array, all wrapped to [-pi, pi).
/// `intra_group[g][k]` is the static offset of group g's k-th member
/// relative to its first member (entry 0 is 0). `group_static[g]` is the
/// residual static offset of group g's reference member relative to group
/// 0's, chained through the redundant CPA windows of a broadside capture.
/// `inter_group[g]` is the per-session time alignment of group g's capture
/// window relative to group 0's; it is session state, not hardware state,
/// and may be empty until a capture has been aligned.
struct CalibrationProfile {
  std::string array_id;
  std::vector<std::vector<double>> intra_group;
  std::vector<double> group_static;
  std::vector<double> inter_group;
  std::vector<int> cpa;

  int group_count() const { return static_cast<int>(intra_group.size()); }
};

/// Measured inter-array phase between two arrays' reference elements.
struct InterArrayEntry {
  std::string array_a;
  std::string array_b;
  int element_a = 0;
  int element_b = 0;
  double delta_gamma = 0.0;  // radians, wrapped
};

struct CalibrationSet {
  std::vector<CalibrationProfile> arrays;
  std::vector<InterArrayEntry> inter_array;

  const CalibrationProfile& for_array(const std::string& id) const;
};

struct IntraGroupMeasurement {
  std::vector<std::vector<double>> offsets;
  std::vector<std::string> warnings;  // per-snapshot spread above threshold
};

/// Per-group static offsets from a broadside far-field capture: circular
/// mean over packets of each member's phase ratio to the group's first
/// member. Requires at least 2 packets per group; warns when the
/// per-snapshot spread exceeds `spread_warn_rad`.
IntraGroupMeasurement measure_intra_group(const CsiCapture& capture,
                                          double spread_warn_rad = 0.2);

/// Cross-group static offsets chained through the redundant CPA windows of
/// a broadside capture; entry g is group g's offset relative to group 0.
std::vector<double> measure_group_statics(
    const CsiCapture& capture, const std::vector<std::vector<double>>& intra);

/// Full broadside profiling: intra-group offsets plus the CPA-chained
/// cross-group statics.
CalibrationProfile measure_broadside_profile(const CsiCapture& capture,
                                             double spread_warn_rad = 0.2);

/// Removes the profile's static offsets (intra-group and cross-group) from
/// every element of the capture.
CsiCapture apply_intra_group(const CsiCapture& capture,
                             const CalibrationProfile& profile);

/// References every capture group's packets to its own first packet by the
/// common phase ratio of its live elements, removing within-window CFO and
/// waveform drift. Switched captures only.
CsiCapture derotate_packets(const CsiCapture& capture);

/// One alignment phase per regular group, referencing group 0, such that
/// rotating each group's packets by its phase makes all CPA measurements
/// consistent across capture windows. The capture must have static offsets
/// removed and packets derotated. Throws with a connectivity diagnostic if
/// some group cannot be chained back to group 0.
std::vector<double> align_inter_group(const CsiCapture& capture);

/// Assembles the aligned switched capture into a virtual unswitched capture
/// with packets_per_group snapshots, applying the per-group alignment
/// phases and dropping the redundant windows.
CsiCapture stitch_capture(const CsiCapture& capture,
                          const std::vector<double>& inter_group);

/// Three-stage calibration: statics, packet derotation, inter-group
/// alignment, stitch. Records the session alignment in the returned
/// profile copy.
struct CalibratedCapture {
  CsiCapture capture;
  CalibrationProfile profile;  // with inter_group filled in
};
CalibratedCapture calibrate_capture(const CsiCapture& capture,
                                    const CalibrationProfile& profile);

/// Measured inter-array phase from a synchronized cross-array window,
/// corrected for both arrays' static offsets, wrapped to [-pi, pi).
InterArrayEntry align_inter_array(const CrossArrayCapture& cross,
                                  const std::vector<UraConfig>& uras,
                                  const std::vector<CalibrationProfile>& profiles);

/// Full-session calibration: per-array three-stage calibration plus a
/// cross-array time bridge. Each secondary array's stitched capture is
/// rotated onto array 0's time reference through the shared cross window,
/// so the stacked captures differ from a synchronized acquisition only by
/// the geometric phase and any uncalibratable static offset, which the
/// measured inter-array entries carry.
struct CalibratedSession {
  std::vector<CsiCapture> captures;           // stitched, common time base
  std::vector<CalibrationProfile> profiles;   // with session alignments
  std::vector<InterArrayEntry> inter_array;   // measured per cross window
};
CalibratedSession calibrate_session(const SessionCapture& session,
                                    const std::vector<CalibrationProfile>& profiles);

/// Static correction for one element: its intra-group offset plus its
/// group's cross-group static.
double element_static_offset(const CalibrationProfile& profile,
                             const UraConfig& ura, int element);

}  // namespace arrayloc
