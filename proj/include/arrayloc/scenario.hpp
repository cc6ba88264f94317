#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace arrayloc {

/// Error with file/line attribution raised by the scenario parser.
struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ArraySpecConfig {
  std::string id;
  int nx = 3;
  int ny = 4;
  double spacing = 0.54;
  bool spacing_in_lambda = true;
  std::array<double, 3> center_m{0, 0, 0};
  double yaw_deg = 0, pitch_deg = 0, roll_deg = 0;

  bool operator==(const ArraySpecConfig&) const = default;
};

struct SourceConfig {
  std::string id;
  std::vector<std::array<double, 3>> waypoints_m;  // 1 entry = static position
  bool has_direction = false;
  double elevation_deg = 0, azimuth_deg = 0;
  std::string coherence_group;
  double power = 1.0;
  bool constant_waveform = false;
  bool planar = false;

  bool operator==(const SourceConfig&) const = default;
};

struct ImpairmentConfig {
  bool pll_random = false;
  std::vector<double> pll_deg;  // per chain, used when not random
  double cable_random_max_ps = 0.0;
  std::vector<std::pair<std::string, std::vector<double>>> cable_ps;  // per array
  double cfo_hz = 0.0;

  bool any() const {
    return pll_random || !pll_deg.empty() || cable_random_max_ps > 0.0 ||
           !cable_ps.empty() || cfo_hz != 0.0;
  }
  bool operator==(const ImpairmentConfig&) const = default;
};

struct ScheduleConfig {
  bool switched = false;
  int packets_per_group = 50;
  double packet_interval_s = 5e-4;
  bool cross_array = true;

  bool operator==(const ScheduleConfig&) const = default;
};

struct NoiseConfig {
  bool use_snr = true;
  double snr_db = 15.0;
  double sigma2 = 0.0;

  double variance() const;
  bool operator==(const NoiseConfig&) const = default;
};

struct EstimatorConfig {
  std::string method = "i-ssmusic";
  int m1 = 3, m2 = 3;
  double theta_min_deg = 0, theta_max_deg = 90, theta_step_deg = 0.2;
  double phi_min_deg = -180, phi_max_deg = 179.8, phi_step_deg = 0.2;
  int sources = 1;
  bool refine = true;

  bool operator==(const EstimatorConfig&) const = default;
};

struct LocatorConfig {
  std::string method = "dpd";  // gp | dpd
  double radius_m = 0.1;
  double voxel_m = 0.005;
  int max_iters = 4;
  int stack_dim = 1;
  bool synchronized_arrays = true;  // model-only inter-array phase
  int smoothing_window = 5;

  bool operator==(const LocatorConfig&) const = default;
};

struct TrialsConfig {
  int count = 0;
  bool has_region = false;
  std::array<double, 3> region_min_m{0, 0, 0};
  std::array<double, 3> region_max_m{0, 0, 0};
  double pitch_m = 0.2;

  bool operator==(const TrialsConfig&) const = default;
};

/// Declarative description of one experiment: arrays, sources, impairments,
/// capture schedule, estimator and locator settings, and the seed. A
/// scenario plus a seed determines every output byte.
struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  bool wavelength_given = false;
  double wavelength_m = 0.0;
  double frequency_ghz = 5.2;  // used when wavelength is not given

  std::vector<ArraySpecConfig> arrays;
  std::vector<SourceConfig> sources;
  ImpairmentConfig impairments;
  ScheduleConfig schedule;
  NoiseConfig noise;
  EstimatorConfig estimator;
  LocatorConfig locator;
  TrialsConfig trials;

  double wavelength() const;

  static Scenario parse(std::istream& in, const std::string& origin);
  static Scenario parse_file(const std::string& path);
  static Scenario parse_string(const std::string& text);
  std::string serialize() const;
  void validate() const;  // throws ScenarioError

  bool operator==(const Scenario&) const = default;
};

/// Shortest round-trip decimal rendering of a double.
std::string format_double(double value);

}  // namespace arrayloc
