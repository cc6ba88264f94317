#include "arrayloc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "arrayloc/capture_io.hpp"
#include "arrayloc/rng.hpp"

namespace arrayloc {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kPllStream = 0x504c4c;
constexpr std::uint64_t kCableStream = 0x434142;
constexpr std::uint64_t kBroadsideStream = 0xB20Ad;
constexpr std::uint64_t kTrialStream = 0x7a1a15;
constexpr std::uint64_t kWaypointStream = 0x77a390;

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw PipelineError("io", dir + ": cannot create output directory");
}

std::ofstream open_report(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw PipelineError("io", path + ": cannot open for writing");
  return out;
}

AoaConfig aoa_config_from(const EstimatorConfig& e) {
  AoaConfig c;
  c.method = aoa_method_from_string(e.method);
  c.smoothing = SmoothingSpec{e.m1, e.m2, SmoothingMode::forward_backward};
  c.theta_min_deg = e.theta_min_deg;
  c.theta_max_deg = e.theta_max_deg;
  c.theta_step_deg = e.theta_step_deg;
  c.phi_min_deg = e.phi_min_deg;
  c.phi_max_deg = e.phi_max_deg;
  c.phi_step_deg = e.phi_step_deg;
  c.source_count = e.sources;
  c.refine = e.refine;
  return c;
}

/// True direction of each truth source relative to one array, for metrics.
std::vector<Direction> truth_directions(const CaptureTruth& truth,
                                        const UraConfig& ura) {
  std::vector<Direction> dirs;
  for (const auto& src : truth.sources) {
    if (src.position) dirs.push_back(direction_from_point(ura, *src.position));
    else dirs.push_back(*src.direction);
  }
  return dirs;
}

std::vector<InterArrayAlignment> make_alignments(
    const Scenario& scenario, const SceneCaptures& captures, const Vec3& init) {
  std::vector<InterArrayAlignment> alignments;
  const size_t n = captures.captures.size();
  for (size_t b = 1; b < n; ++b) {
    InterArrayAlignment al;
    al.array_b = static_cast<int>(b);
    al.reference_point = init;
    bool measured = false;
    for (const auto& entry : captures.measured_inter_array) {
      if (entry.array_b == captures.captures[b].array_id ||
          entry.array_b == std::to_string(b)) {
        al.delta_gamma_hat = entry.delta_gamma;
        al.element_a = entry.element_a;
        al.element_b = entry.element_b;
        measured = true;
        break;
      }
    }
    if (!measured) {
      if (scenario.locator.synchronized_arrays) {
        al.model_only = true;
      } else {
        al = measure_alignment_from_ideal(captures.captures[0],
                                          captures.captures[b],
                                          static_cast<int>(b), init);
        al.reference_point = init;
      }
    }
    alignments.push_back(al);
  }
  return alignments;
}

}  // namespace

LocateOutcome locate_scene(const Scenario& scenario,
                           const SceneCaptures& captures) {
  AoaConfig aoa = aoa_config_from(scenario.estimator);
  aoa.source_count = 1;  // single-source localization rays

  LocateOutcome outcome;
  std::vector<Ray> rays;
  for (const auto& cap : captures.captures) {
    AoaResult result = estimate_aoa(cap, aoa);
    if (result.peaks.peaks.empty())
      throw PipelineError("locate", "no spectrum peak for array " + cap.array_id);
    outcome.peaks.push_back(result.peaks);
    rays.push_back(ray_from_aoa(cap.ura, result.peaks.peaks[0].direction));
  }
  outcome.gp = geometric_position(rays);

  if (scenario.locator.method == "dpd") {
    DpdConfig config;
    config.radius = scenario.locator.radius_m;
    config.voxel = scenario.locator.voxel_m;
    config.max_iters = scenario.locator.max_iters;
    config.signal_dim = scenario.locator.stack_dim;
    auto alignments = make_alignments(scenario, captures, outcome.gp.position);
    outcome.dpd = locate_dpd(captures.captures, alignments, outcome.gp.position,
                             config);
  }
  return outcome;
}

double percentile_nearest_rank(std::vector<double> values, double pct) {
  if (values.empty())
    throw std::invalid_argument("percentile: empty sample");
  if (!(pct > 0.0) || pct > 100.0)
    throw std::invalid_argument("percentile: pct outside (0, 100]");
  std::sort(values.begin(), values.end());
  const size_t rank = static_cast<size_t>(
      std::ceil(pct / 100.0 * static_cast<double>(values.size())));
  return values[std::max<size_t>(rank, 1) - 1];
}

MaterializedScene materialize(const Scenario& scenario, std::uint64_t seed,
                              int waypoint) {
  scenario.validate();
  MaterializedScene scene;
  scene.wavelength = scenario.wavelength();
  scene.seed = seed;
  scene.switched = scenario.schedule.switched;
  scene.cross_array = scenario.schedule.cross_array && scenario.arrays.size() > 1;

  for (const auto& a : scenario.arrays) {
    double spacing = a.spacing_in_lambda ? a.spacing * scene.wavelength : a.spacing;
    scene.uras.push_back(UraConfig::make(
        a.id, a.nx, a.ny, spacing, scene.wavelength,
        Vec3(a.center_m[0], a.center_m[1], a.center_m[2]),
        rotation_from_yaw_pitch_roll_deg(a.yaw_deg, a.pitch_deg, a.roll_deg)));
  }

  for (const auto& s : scenario.sources) {
    SourceSpec src;
    if (!s.waypoints_m.empty()) {
      const auto& w =
          s.waypoints_m[std::min<size_t>(waypoint, s.waypoints_m.size() - 1)];
      src.position = Vec3(w[0], w[1], w[2]);
      src.phase_model = s.planar ? PhaseModel::planar : PhaseModel::exact;
    } else {
      src.direction = Direction::from_degrees(s.elevation_deg, s.azimuth_deg);
    }
    src.coherence_group = s.coherence_group;
    src.power = s.power;
    src.constant_waveform = s.constant_waveform;
    scene.sources.push_back(std::move(src));
  }

  const auto& imp = scenario.impairments;
  auto& out = scene.impairments;
  if (imp.pll_random) {
    Rng rng = make_rng(seed, kPllStream);
    std::uniform_real_distribution<double> phase(-kPi, kPi);
    out.pll_phases = {phase(rng), phase(rng), phase(rng)};
  } else if (!imp.pll_deg.empty()) {
    for (double deg : imp.pll_deg) out.pll_phases.push_back(deg2rad(deg));
  }
  if (imp.cable_random_max_ps > 0.0) {
    Rng rng = make_rng(seed, kCableStream);
    std::uniform_real_distribution<double> delay(0.0, imp.cable_random_max_ps * 1e-12);
    out.cable_delays.resize(scene.uras.size());
    for (size_t a = 0; a < scene.uras.size(); ++a)
      for (int e = 0; e < scene.uras[a].element_count(); ++e)
        out.cable_delays[a].push_back(delay(rng));
  } else if (!imp.cable_ps.empty()) {
    out.cable_delays.resize(scene.uras.size());
    for (const auto& [id, values] : imp.cable_ps)
      for (size_t a = 0; a < scene.uras.size(); ++a)
        if (scene.uras[a].id == id)
          for (double ps : values) out.cable_delays[a].push_back(ps * 1e-12);
    for (size_t a = 0; a < scene.uras.size(); ++a)
      if (out.cable_delays[a].empty())
        out.cable_delays[a].assign(scene.uras[a].element_count(), 0.0);
  }
  out.cfo_hz = imp.cfo_hz;
  out.noise_variance = scenario.noise.variance();

  scene.schedule = CaptureSchedule::standard_for(
      scene.uras[0].grouping, scenario.schedule.packets_per_group,
      scenario.schedule.packet_interval_s);
  if (scene.switched) {
    for (const auto& ura : scene.uras)
      if (ura.grouping.groups != scene.uras[0].grouping.groups)
        throw PipelineError("simulate",
                            "switched capture requires identical array layouts");
  }
  return scene;
}

SceneCaptures acquire_captures(const MaterializedScene& scene) {
  SceneCaptures out;
  out.switched = scene.switched;
  if (!scene.switched) {
    out.captures = simulate_ideal(scene.uras, scene.sources,
                                  scene.schedule.packets_per_group,
                                  scene.impairments.noise_variance, scene.seed,
                                  scene.schedule.packet_interval);
    return out;
  }

  // Broadside profiling runs per array with the same hardware state.
  std::vector<CalibrationProfile> profiles;
  for (size_t a = 0; a < scene.uras.size(); ++a) {
    HardwareImpairments hw = scene.impairments;
    if (!hw.cable_delays.empty())
      hw.cable_delays = {scene.impairments.cable_delays[a]};
    SourceSpec broadside;
    broadside.direction = Direction::from_degrees(0.0, 0.0);
    broadside.constant_waveform = true;
    auto session = simulate_switched({scene.uras[a]}, {broadside}, hw,
                                     scene.schedule,
                                     substream(scene.seed, kBroadsideStream + a));
    CalibrationProfile p = measure_broadside_profile(session.arrays[0]);
    profiles.push_back(std::move(p));
  }

  SessionCapture session = simulate_switched(scene.uras, scene.sources,
                                             scene.impairments, scene.schedule,
                                             scene.seed, scene.cross_array);
  CalibratedSession calibrated = calibrate_session(session, profiles);
  out.captures = std::move(calibrated.captures);
  out.profiles = std::move(calibrated.profiles);
  out.measured_inter_array = std::move(calibrated.inter_array);
  out.raw = std::move(session);
  return out;
}

void run_simulate(const Scenario& scenario, const RunOptions& opts,
                  std::ostream& log) {
  ensure_dir(opts.out_dir);
  const std::uint64_t seed = opts.seed_override.value_or(scenario.seed);
  MaterializedScene scene = materialize(scenario, seed);

  if (scene.switched) {
    SessionCapture session = simulate_switched(scene.uras, scene.sources,
                                               scene.impairments, scene.schedule,
                                               seed, scene.cross_array);
    for (const auto& cap : session.arrays) {
      std::string path = join(opts.out_dir, cap.array_id + ".csicap");
      write_capture_file(path, cap);
      log << "simulate: wrote " << path << " (" << cap.snapshot_count()
          << " packets, switched)\n";
    }
    for (size_t i = 0; i < session.cross.size(); ++i) {
      std::string path = join(
          opts.out_dir, "cross_" + std::to_string(session.cross[i].array_a) + "_" +
                            std::to_string(session.cross[i].array_b) + ".csicap");
      write_cross_capture_file(path, session.cross[i]);
      log << "simulate: wrote " << path << "\n";
    }
  } else {
    auto captures = simulate_ideal(scene.uras, scene.sources,
                                   scene.schedule.packets_per_group,
                                   scene.impairments.noise_variance, seed,
                                   scene.schedule.packet_interval);
    for (const auto& cap : captures) {
      std::string path = join(opts.out_dir, cap.array_id + ".csicap");
      write_capture_file(path, cap);
      log << "simulate: wrote " << path << " (" << cap.snapshot_count()
          << " snapshots)\n";
    }
  }
}

void run_calibrate(const Scenario& scenario, const RunOptions& opts,
                   std::ostream& log) {
  ensure_dir(opts.out_dir);
  const std::uint64_t seed = opts.seed_override.value_or(scenario.seed);
  if (!scenario.schedule.switched)
    throw PipelineError("calibrate", "scenario is not switched; nothing to calibrate");
  MaterializedScene scene = materialize(scenario, seed);

  CalibrationSet set;
  for (size_t a = 0; a < scene.uras.size(); ++a) {
    HardwareImpairments hw = scene.impairments;
    if (!hw.cable_delays.empty())
      hw.cable_delays = {scene.impairments.cable_delays[a]};
    SourceSpec broadside;
    broadside.direction = Direction::from_degrees(0.0, 0.0);
    broadside.constant_waveform = true;
    auto session = simulate_switched({scene.uras[a]}, {broadside}, hw,
                                     scene.schedule,
                                     substream(seed, kBroadsideStream + a));
    IntraGroupMeasurement intra = measure_intra_group(session.arrays[0]);
    for (const auto& w : intra.warnings)
      log << "calibrate: warning: " << scene.uras[a].id << ": " << w << "\n";
    CalibrationProfile profile = measure_broadside_profile(session.arrays[0]);
    log << "calibrate: " << scene.uras[a].id << ": " << profile.group_count()
        << " groups profiled\n";
    set.arrays.push_back(std::move(profile));
  }
  std::string path = join(opts.out_dir, "calibration.calprof");
  write_profiles_file(path, set);
  log << "calibrate: wrote " << path << "\n";
}

void run_aoa(const Scenario& scenario, const RunOptions& opts, std::ostream& log) {
  ensure_dir(opts.out_dir);
  const std::uint64_t seed = opts.seed_override.value_or(scenario.seed);
  MaterializedScene scene = materialize(scenario, seed);
  SceneCaptures captures = acquire_captures(scene);

  std::vector<std::string> methods;
  if (opts.sweep) methods = {"music", "ss-music", "i-ssmusic"};
  else methods = {scenario.estimator.method};

  auto metrics = open_report(join(opts.out_dir, "aoa_metrics.txt"));
  metrics << "aoa-metrics v1\n";
  metrics << "columns method array_id source elevation_error_deg azimuth_error_deg\n";

  for (const std::string& method : methods) {
    AoaConfig config = aoa_config_from(scenario.estimator);
    config.method = aoa_method_from_string(method);
    for (const auto& cap : captures.captures) {
      const double t0 = now_seconds();
      AoaResult result = estimate_aoa(cap, config);
      const double elapsed = now_seconds() - t0;
      std::string stem = cap.array_id + "_" + method;
      write_spectrum_file(join(opts.out_dir, stem + ".spectrum"), cap.array_id,
                          method, result.spectrum);
      write_peaks_file(join(opts.out_dir, stem + ".peaks"), method, result.peaks);
      log << "aoa: " << cap.array_id << " " << method << ": "
          << result.peaks.peaks.size() << " peak(s)"
          << (result.peaks.shortfall ? " (shortfall)" : "") << " in "
          << format_double(elapsed) << " s\n";
      for (const auto& p : result.peaks.peaks)
        log << "aoa:   peak (" << format_double(rad2deg(p.direction.elevation))
            << ", " << format_double(rad2deg(p.direction.azimuth)) << ") deg\n";

      if (cap.truth) {
        auto dirs = truth_directions(*cap.truth, cap.ura);
        for (size_t s = 0; s < dirs.size(); ++s) {
          double best_el = std::numeric_limits<double>::infinity();
          double best_az = std::numeric_limits<double>::infinity();
          for (const auto& p : result.peaks.peaks) {
            double de = std::abs(rad2deg(p.direction.elevation - dirs[s].elevation));
            double da =
                std::abs(rad2deg(wrap_phase(p.direction.azimuth - dirs[s].azimuth)));
            if (std::max(de, da) < std::max(best_el, best_az)) {
              best_el = de;
              best_az = da;
            }
          }
          metrics << method << " " << cap.array_id << " " << s << " "
                  << format_double(best_el) << " " << format_double(best_az)
                  << "\n";
        }
      }
    }
  }
  metrics << "end\n";
}

void run_locate(const Scenario& scenario, const RunOptions& opts,
                std::ostream& log) {
  ensure_dir(opts.out_dir);
  const std::uint64_t seed = opts.seed_override.value_or(scenario.seed);

  if (scenario.trials.count > 0) {
    // Paired Monte-Carlo over the trial region lattice.
    const auto& tr = scenario.trials;
    std::vector<Vec3> lattice;
    for (double z = tr.region_min_m[2]; z <= tr.region_max_m[2] + 1e-9;
         z += tr.pitch_m)
      for (double y = tr.region_min_m[1]; y <= tr.region_max_m[1] + 1e-9;
           y += tr.pitch_m)
        for (double x = tr.region_min_m[0]; x <= tr.region_max_m[0] + 1e-9;
             x += tr.pitch_m)
          lattice.push_back(Vec3(x, y, z));
    if (lattice.empty()) throw PipelineError("locate", "empty trial region");

    auto report = open_report(join(opts.out_dir, "locate_trials.txt"));
    report << "locate-trials v1\n";
    report << "columns trial x_m y_m z_m gp_error_m dpd_error_m dpd_iterations\n";
    std::vector<double> gp_errors, dpd_errors;
    int converged_within3 = 0, over_cap = 0;
    for (int t = 0; t < tr.count; ++t) {
      const size_t pick = static_cast<size_t>(
          counter_uniform(seed, kTrialStream, t) * lattice.size());
      const Vec3 truth = lattice[std::min(pick, lattice.size() - 1)];
      Scenario trial = scenario;
      trial.trials.count = 0;
      trial.sources[0].waypoints_m = {{truth.x(), truth.y(), truth.z()}};
      trial.sources[0].has_direction = false;
      MaterializedScene scene = materialize(trial, substream(seed, kTrialStream + 7 + t));
      SceneCaptures captures = acquire_captures(scene);
      LocateOutcome outcome = locate_scene(trial, captures);
      const double gp_err = (outcome.gp.position - truth).norm();
      double dpd_err = std::numeric_limits<double>::quiet_NaN();
      int iters = 0;
      if (outcome.dpd) {
        dpd_err = (outcome.dpd->position - truth).norm();
        iters = outcome.dpd->iterations;
        if (outcome.dpd->converged && iters <= 3) ++converged_within3;
        if (iters > scenario.locator.max_iters) ++over_cap;
        dpd_errors.push_back(dpd_err);
      }
      gp_errors.push_back(gp_err);
      report << t << " " << format_double(truth.x()) << " "
             << format_double(truth.y()) << " " << format_double(truth.z()) << " "
             << format_double(gp_err) << " " << format_double(dpd_err) << " "
             << iters << "\n";
    }
    report << "gp_median_m " << format_double(percentile_nearest_rank(gp_errors, 50))
           << "\n";
    report << "gp_p90_m " << format_double(percentile_nearest_rank(gp_errors, 90))
           << "\n";
    if (!dpd_errors.empty()) {
      report << "dpd_median_m "
             << format_double(percentile_nearest_rank(dpd_errors, 50)) << "\n";
      report << "dpd_p90_m "
             << format_double(percentile_nearest_rank(dpd_errors, 90)) << "\n";
      report << "converged_within_3 " << converged_within3 << " of "
             << tr.count << "\n";
    }
    report << "end\n";
    log << "locate: " << tr.count << " paired trials; gp median "
        << format_double(percentile_nearest_rank(gp_errors, 50)) << " m";
    if (!dpd_errors.empty())
      log << ", dpd median " << format_double(percentile_nearest_rank(dpd_errors, 50))
          << " m";
    log << "\n";
    return;
  }

  MaterializedScene scene = materialize(scenario, seed);
  SceneCaptures captures = acquire_captures(scene);
  LocateOutcome outcome = locate_scene(scenario, captures);

  PositionFix gp_fix;
  gp_fix.method = LocateMethod::gp;
  gp_fix.position = outcome.gp.position;
  gp_fix.iterations = 1;
  gp_fix.spectrum_peak = 0.0;
  write_fix_file(join(opts.out_dir, "fix_gp.txt"), gp_fix, outcome.gp.residual);
  log << "locate: gp fix (" << format_double(gp_fix.position.x()) << ", "
      << format_double(gp_fix.position.y()) << ", "
      << format_double(gp_fix.position.z()) << ") m, residual "
      << format_double(outcome.gp.residual) << " m\n";

  if (outcome.dpd) {
    write_fix_file(join(opts.out_dir, "fix_dpd.txt"), *outcome.dpd, 0.0);
    log << "locate: dpd fix (" << format_double(outcome.dpd->position.x()) << ", "
        << format_double(outcome.dpd->position.y()) << ", "
        << format_double(outcome.dpd->position.z()) << ") m in "
        << outcome.dpd->iterations << " iteration(s)"
        << (outcome.dpd->converged ? "" : " (not converged)") << "\n";
    if (opts.export_lsoi) {
      auto alignments = make_alignments(scenario, captures, outcome.gp.position);
      Lsoi lsoi = Lsoi::make(outcome.dpd->position, scenario.locator.radius_m,
                             scenario.locator.voxel_m);
      CMat stacked(captures.captures[0].element_count() +
                       captures.captures[1].element_count(),
                   captures.captures[0].snapshot_count());
      // two-array export is the supported case
      stacked.topRows(captures.captures[0].element_count()) =
          captures.captures[0].snapshots;
      stacked.bottomRows(captures.captures[1].element_count()) =
          captures.captures[1].snapshots;
      SubspaceDecomposition d =
          decompose(sample_covariance(stacked), scenario.locator.stack_dim);
      std::vector<UraConfig> uras = {captures.captures[0].ura,
                                     captures.captures[1].ura};
      CMat steering = build_virtual_steering(uras, alignments, lsoi.points);
      write_lsoi_spectrum_file(join(opts.out_dir, "lsoi.txt"), lsoi,
                               dpd_spectrum(d, steering));
      log << "locate: wrote " << join(opts.out_dir, "lsoi.txt") << "\n";
    }
  }

  if (!captures.captures.empty() && captures.captures[0].truth &&
      captures.captures[0].truth->sources[0].position) {
    const Vec3 truth = *captures.captures[0].truth->sources[0].position;
    log << "locate: gp error " << format_double((outcome.gp.position - truth).norm())
        << " m";
    if (outcome.dpd)
      log << ", dpd error "
          << format_double((outcome.dpd->position - truth).norm()) << " m";
    log << "\n";
  }
}

void run_track(const Scenario& scenario, const RunOptions& opts,
               std::ostream& log) {
  ensure_dir(opts.out_dir);
  const std::uint64_t seed = opts.seed_override.value_or(scenario.seed);
  size_t waypoints = 0;
  for (const auto& s : scenario.sources)
    waypoints = std::max(waypoints, s.waypoints_m.size());
  if (waypoints < 1)
    throw PipelineError("track", "no waypoint trajectory in the scenario");

  std::vector<Vec3> truth, raw;
  for (size_t w = 0; w < waypoints; ++w) {
    MaterializedScene scene =
        materialize(scenario, substream(seed, kWaypointStream + w), static_cast<int>(w));
    SceneCaptures captures = acquire_captures(scene);
    LocateOutcome outcome = locate_scene(scenario, captures);
    const Vec3 fix = outcome.dpd ? outcome.dpd->position : outcome.gp.position;
    raw.push_back(fix);
    truth.push_back(*scene.sources[0].position);
  }
  std::vector<Vec3> smoothed = smooth_trajectory(raw, scenario.locator.smoothing_window);

  auto report = open_report(join(opts.out_dir, "trajectory.txt"));
  report << "trajectory v1\n";
  report << "columns waypoint truth_x truth_y truth_z raw_x raw_y raw_z "
            "smooth_x smooth_y smooth_z raw_error_m smooth_error_m\n";
  std::vector<double> raw_err, smooth_err;
  for (size_t w = 0; w < waypoints; ++w) {
    raw_err.push_back((raw[w] - truth[w]).norm());
    smooth_err.push_back((smoothed[w] - truth[w]).norm());
    report << w;
    for (const Vec3* v : {&truth[w], &raw[w], &smoothed[w]})
      report << " " << format_double(v->x()) << " " << format_double(v->y()) << " "
             << format_double(v->z());
    report << " " << format_double(raw_err.back()) << " "
           << format_double(smooth_err.back()) << "\n";
  }
  const double raw_median = percentile_nearest_rank(raw_err, 50);
  const double smooth_median = percentile_nearest_rank(smooth_err, 50);
  report << "raw_median_m " << format_double(raw_median) << "\n";
  report << "smooth_median_m " << format_double(smooth_median) << "\n";
  report << "end\n";
  log << "track: " << waypoints << " waypoints; raw median "
      << format_double(raw_median) << " m, smoothed median "
      << format_double(smooth_median) << " m\n";
}

void run_bench(const Scenario& scenario, const RunOptions& opts,
               std::ostream& log) {
  ensure_dir(opts.out_dir);
  const std::uint64_t seed = opts.seed_override.value_or(scenario.seed);
  const int repeats = std::max(1, opts.bench_repeat);

  std::vector<double> sim_s, aoa_s, locate_s;
  Vec3 first_fix = Vec3::Zero();
  for (int r = 0; r < repeats; ++r) {
    MaterializedScene scene = materialize(scenario, seed);
    double t0 = now_seconds();
    SceneCaptures captures = acquire_captures(scene);
    double t1 = now_seconds();
    AoaConfig aoa = aoa_config_from(scenario.estimator);
    aoa.source_count = 1;
    for (const auto& cap : captures.captures) estimate_aoa(cap, aoa);
    double t2 = now_seconds();
    LocateOutcome outcome = locate_scene(scenario, captures);
    double t3 = now_seconds();
    sim_s.push_back(t1 - t0);
    aoa_s.push_back(t2 - t1);
    locate_s.push_back(t3 - t2);
    const Vec3 fix = outcome.dpd ? outcome.dpd->position : outcome.gp.position;
    if (r == 0) first_fix = fix;
    else if ((fix - first_fix).norm() != 0.0)
      throw PipelineError("bench", "outputs differ across repeats with one seed");
  }

  auto report = open_report(join(opts.out_dir, "bench.txt"));
  report << "bench v1\n";
  report << "repeats " << repeats << "\n";
  auto emit = [&](const char* stage, std::vector<double>& v) {
    double med = percentile_nearest_rank(v, 50);
    double lo = *std::min_element(v.begin(), v.end());
    double hi = *std::max_element(v.begin(), v.end());
    report << stage << "_s median " << format_double(med) << " min "
           << format_double(lo) << " max " << format_double(hi) << "\n";
    log << "bench: " << stage << " median " << format_double(med) << " s (min "
        << format_double(lo) << ", max " << format_double(hi) << ")\n";
  };
  emit("simulate", sim_s);
  emit("aoa", aoa_s);
  emit("locate", locate_s);
  report << "end\n";
}

}  // namespace arrayloc
