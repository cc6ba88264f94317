#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arrayloc/geometry.hpp"

namespace arrayloc {

/// Phase model used for a source that carries a world position: `exact`
/// evaluates per-element path lengths, `planar` uses the plane-wave steering
/// vector at the source direction plus a center-referenced range phase.
enum class PhaseModel { exact, planar };

struct SourceSpec {
  std::optional<Vec3> position;        // world position, meters
  std::optional<Direction> direction;  // far-field direction (per-array local frame)
  PhaseModel phase_model = PhaseModel::exact;
  std::string coherence_group;  // sources sharing a label share one waveform
  double power = 1.0;           // linear
  bool constant_waveform = false;
  std::optional<std::vector<cplx>> waveform;  // explicit per-snapshot amplitudes

  bool has_location() const { return position.has_value() || direction.has_value(); }
};

struct HardwareImpairments {
  std::vector<double> pll_phases;                 // radians, per RF chain
  std::vector<std::vector<double>> cable_delays;  // seconds, [array][element]
  double cfo_hz = 0.0;
  double noise_variance = 0.0;  // linear, per element per snapshot

  bool all_zero() const;
  /// Static phase of one element's chain path: pll + 2*pi*f*cable delay.
  double static_phase(int array_index, int element, int chain, double carrier_hz) const;
};

enum class GroupKind { regular, redundant, cross };

struct CaptureGroup {
  GroupKind kind = GroupKind::regular;
  std::vector<int> elements;  // element indices within the owning array
};

struct CaptureSchedule {
  std::vector<CaptureGroup> groups;
  std::vector<int> order;  // indices into `groups`, capture sequence
  int packets_per_group = 50;
  double packet_interval = 5e-4;  // seconds

  /// Regular groups followed by the redundant CPA windows (sliding triples
  /// over the CPA chain), in capture order.
  static CaptureSchedule standard_for(const GroupingLayout& layout,
                                      int packets_per_group = 50,
                                      double packet_interval = 5e-4);

  int total_packets() const {
    return static_cast<int>(order.size()) * packets_per_group;
  }
  void validate(int element_count) const;
};

struct CaptureTruth {
  std::vector<SourceSpec> sources;
  HardwareImpairments impairments;
  std::uint64_t seed = 0;
  double noise_variance = 0.0;
};

/// One array's snapshot record. For switched captures only the scheduled
/// group's rows are populated in each column (other rows are zero) and
/// `column_group` names the capture group of each column; unswitched
/// captures have all rows live and an empty `column_group`.
struct CsiCapture {
  std::string array_id;
  UraConfig ura;
  CMat snapshots;  // element_count x T
  std::vector<double> timestamps;
  CaptureSchedule schedule;        // empty groups for unswitched captures
  std::vector<int> column_group;   // per column, index into schedule.groups
  std::optional<CaptureTruth> truth;

  int element_count() const { return static_cast<int>(snapshots.rows()); }
  int snapshot_count() const { return static_cast<int>(snapshots.cols()); }
  bool switched() const { return !column_group.empty(); }
};

/// Simultaneous cross-array packets tying two arrays' reference elements to
/// a common time base; used for inter-array phase alignment.
struct CrossArrayCapture {
  int array_a = 0;
  int array_b = 1;
  int element_a = 0;
  int element_b = 0;
  CVec values_a;
  CVec values_b;
  std::vector<double> timestamps;
};

struct SessionCapture {
  std::vector<CsiCapture> arrays;
  std::vector<CrossArrayCapture> cross;
};

/// Unit-modulus propagation vector of a point source at `p` as seen by the
/// array: exact mode uses per-element path lengths, planar mode the steering
/// vector at the point's direction scaled by the center range phase.
CVec propagation_vector(const UraConfig& ura, const Vec3& p, PhaseModel model);

/// Per-source complex amplitude at a global snapshot index, combining the
/// coherence-group waveform with the source's fixed gain. Deterministic in
/// (seed, group, snapshot).
class SourceMixer {
 public:
  SourceMixer(const std::vector<SourceSpec>& sources, std::uint64_t seed);
  cplx amplitude(int source_index, int snapshot_index) const;
  int coherence_group_count() const { return group_count_; }

 private:
  const std::vector<SourceSpec>& sources_;
  std::uint64_t seed_;
  std::vector<int> group_of_;  // per source
  std::vector<int> waveform_owner_;  // per group: source with explicit waveform, else -1
  std::vector<bool> group_constant_;
  std::vector<cplx> gain_;  // per source
  int group_count_ = 0;
};

/// Ideal synchronized capture: Y = A*S + N per array, common snapshots and
/// timestamps across arrays, no hardware impairments.
std::vector<CsiCapture> simulate_ideal(const std::vector<UraConfig>& uras,
                                       const std::vector<SourceSpec>& sources,
                                       int snapshots, double noise_variance,
                                       std::uint64_t seed,
                                       double snapshot_interval = 5e-4);

/// Time-division switched capture with hardware impairments. Arrays are
/// captured back to back, each group in schedule order; one extra
/// simultaneous window per secondary array samples the cross-array
/// reference elements when `cross_array` is set.
SessionCapture simulate_switched(const std::vector<UraConfig>& uras,
                                 const std::vector<SourceSpec>& sources,
                                 const HardwareImpairments& impairments,
                                 const CaptureSchedule& schedule,
                                 std::uint64_t seed, bool cross_array = false);

/// Model phase difference between two array centers for a source at p:
/// 2*pi*(|p-c1| - |p-c2|)/lambda, unwrapped (callers wrap as needed).
double inter_array_phase(const Vec3& c1, const Vec3& c2, const Vec3& p,
                         double wavelength);

}  // namespace arrayloc
