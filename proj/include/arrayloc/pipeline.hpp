#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "arrayloc/calib.hpp"
#include "arrayloc/fusion.hpp"
#include "arrayloc/scenario.hpp"

namespace arrayloc {

/// Command failure with stage attribution, used for CLI diagnostics.
struct PipelineError : std::runtime_error {
  PipelineError(const std::string& stage, const std::string& msg)
      : std::runtime_error(stage + ": " + msg), stage(stage) {}
  std::string stage;
};

/// Scenario resolved into simulator inputs: realized impairments, world
/// geometry, and static sources (the given waypoint index for trajectory
/// sources).
struct MaterializedScene {
  double wavelength = 0.0;
  std::vector<UraConfig> uras;
  std::vector<SourceSpec> sources;
  HardwareImpairments impairments;  // noise variance included
  CaptureSchedule schedule;
  std::uint64_t seed = 0;
  bool switched = false;
  bool cross_array = false;
};

MaterializedScene materialize(const Scenario& scenario, std::uint64_t seed,
                              int waypoint = 0);

/// Captures ready for estimation: calibrated (or ideal) per-array snapshot
/// matrices plus whatever the calibration produced along the way.
struct SceneCaptures {
  std::vector<CsiCapture> captures;     // unswitched, common time base
  SessionCapture raw;                   // raw switched session (if switched)
  std::vector<CalibrationProfile> profiles;
  std::vector<InterArrayEntry> measured_inter_array;
  bool switched = false;
};

/// Simulates the scene and, for switched scenes, builds broadside profiles
/// and runs the full session calibration.
SceneCaptures acquire_captures(const MaterializedScene& scene);

/// Nearest-rank percentile (1-based ceil rank); pct in (0, 100].
double percentile_nearest_rank(std::vector<double> values, double pct);

/// One localization pass over prepared captures: per-array angle peaks,
/// closest-point fix, and (when the locator asks for it) the iterative
/// direct position determination refinement.
struct LocateOutcome {
  GeometricFix gp;
  std::optional<PositionFix> dpd;
  std::vector<PeakList> peaks;  // per array
};
LocateOutcome locate_scene(const Scenario& scenario,
                           const SceneCaptures& captures);

struct RunOptions {
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed_override;
  bool sweep = false;        // aoa: run all three methods
  bool export_lsoi = false;  // locate: dump the final search-sphere spectrum
  int bench_repeat = 3;
};

void run_simulate(const Scenario& scenario, const RunOptions& opts,
                  std::ostream& log);
void run_calibrate(const Scenario& scenario, const RunOptions& opts,
                   std::ostream& log);
void run_aoa(const Scenario& scenario, const RunOptions& opts, std::ostream& log);
void run_locate(const Scenario& scenario, const RunOptions& opts,
                std::ostream& log);
void run_track(const Scenario& scenario, const RunOptions& opts,
               std::ostream& log);
void run_bench(const Scenario& scenario, const RunOptions& opts,
               std::ostream& log);

}  // namespace arrayloc
