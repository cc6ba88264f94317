#include "arrayloc/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace arrayloc {

namespace {

constexpr double kSpeedOfLight = 299792458.0;

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') break;  // trailing comment
    tokens.push_back(tok);
  }
  return tokens;
}

struct Cursor {
  const std::string& origin;
  int line = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    std::ostringstream out;
    out << origin << ":" << line << ": " << msg;
    throw ScenarioError(out.str());
  }
};

double parse_number(const Cursor& c, const std::string& tok) {
  try {
    size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    c.fail("expected a number, got '" + tok + "'");
  }
}

long long parse_int(const Cursor& c, const std::string& tok) {
  try {
    size_t used = 0;
    long long v = std::stoll(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    c.fail("expected an integer, got '" + tok + "'");
  }
}

bool parse_bool(const Cursor& c, const std::string& tok) {
  if (tok == "true" || tok == "1" || tok == "yes") return true;
  if (tok == "false" || tok == "0" || tok == "no") return false;
  c.fail("expected true/false, got '" + tok + "'");
}

void need_args(const Cursor& c, const std::vector<std::string>& t, size_t n) {
  if (t.size() != n + 1)
    c.fail("'" + t[0] + "' expects " + std::to_string(n) + " value(s)");
}

std::array<double, 3> parse_vec3(const Cursor& c,
                                 const std::vector<std::string>& t, size_t at) {
  return {parse_number(c, t[at]), parse_number(c, t[at + 1]),
          parse_number(c, t[at + 2])};
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double NoiseConfig::variance() const {
  if (use_snr) return std::pow(10.0, -snr_db / 10.0);
  return sigma2;
}

double Scenario::wavelength() const {
  if (wavelength_given) return wavelength_m;
  return kSpeedOfLight / (frequency_ghz * 1e9);
}

Scenario Scenario::parse(std::istream& in, const std::string& origin) {
  Scenario s;
  s.arrays.clear();
  s.sources.clear();

  Cursor cursor{origin, 0};
  enum class Section {
    global, array, source, impairments, schedule, noise, estimator, locator,
    trials
  };
  Section section = Section::global;

  std::string line;
  while (std::getline(in, line)) {
    ++cursor.line;
    auto t = tokenize(line);
    if (t.empty()) continue;

    if (t[0][0] == '[') {
      std::string head = t[0];
      for (size_t i = 1; i < t.size(); ++i) head += " " + t[i];
      if (head.back() != ']') cursor.fail("unterminated section header");
      std::istringstream hs(head.substr(1, head.size() - 2));
      std::string kind, id;
      hs >> kind >> id;
      if (kind == "array") {
        if (id.empty()) cursor.fail("[array] needs an id");
        s.arrays.push_back({});
        s.arrays.back().id = id;
        section = Section::array;
      } else if (kind == "source") {
        if (id.empty()) cursor.fail("[source] needs an id");
        s.sources.push_back({});
        s.sources.back().id = id;
        section = Section::source;
      } else if (kind == "impairments") {
        section = Section::impairments;
      } else if (kind == "schedule") {
        section = Section::schedule;
      } else if (kind == "noise") {
        section = Section::noise;
      } else if (kind == "estimator") {
        section = Section::estimator;
      } else if (kind == "locator") {
        section = Section::locator;
      } else if (kind == "trials") {
        section = Section::trials;
      } else {
        cursor.fail("unknown section '" + kind + "'");
      }
      continue;
    }

    const std::string& key = t[0];
    switch (section) {
      case Section::global:
        if (key == "name") {
          need_args(cursor, t, 1);
          s.name = t[1];
        } else if (key == "seed") {
          need_args(cursor, t, 1);
          s.seed = static_cast<std::uint64_t>(parse_int(cursor, t[1]));
        } else if (key == "wavelength_m") {
          need_args(cursor, t, 1);
          s.wavelength_m = parse_number(cursor, t[1]);
          s.wavelength_given = true;
        } else if (key == "frequency_ghz") {
          need_args(cursor, t, 1);
          s.frequency_ghz = parse_number(cursor, t[1]);
          s.wavelength_given = false;
        } else {
          cursor.fail("unknown key '" + key + "' before any section");
        }
        break;

      case Section::array: {
        auto& a = s.arrays.back();
        if (key == "shape") {
          need_args(cursor, t, 2);
          a.nx = static_cast<int>(parse_int(cursor, t[1]));
          a.ny = static_cast<int>(parse_int(cursor, t[2]));
        } else if (key == "spacing_lambda") {
          need_args(cursor, t, 1);
          a.spacing = parse_number(cursor, t[1]);
          a.spacing_in_lambda = true;
        } else if (key == "spacing_m") {
          need_args(cursor, t, 1);
          a.spacing = parse_number(cursor, t[1]);
          a.spacing_in_lambda = false;
        } else if (key == "center_m") {
          need_args(cursor, t, 3);
          a.center_m = parse_vec3(cursor, t, 1);
        } else if (key == "orientation_deg") {
          need_args(cursor, t, 3);
          a.yaw_deg = parse_number(cursor, t[1]);
          a.pitch_deg = parse_number(cursor, t[2]);
          a.roll_deg = parse_number(cursor, t[3]);
        } else {
          cursor.fail("unknown array key '" + key + "'");
        }
        break;
      }

      case Section::source: {
        auto& src = s.sources.back();
        if (key == "position_m" || key == "waypoint_m") {
          need_args(cursor, t, 3);
          src.waypoints_m.push_back(parse_vec3(cursor, t, 1));
        } else if (key == "direction_deg") {
          need_args(cursor, t, 2);
          src.has_direction = true;
          src.elevation_deg = parse_number(cursor, t[1]);
          src.azimuth_deg = parse_number(cursor, t[2]);
        } else if (key == "coherence") {
          need_args(cursor, t, 1);
          src.coherence_group = t[1];
        } else if (key == "power") {
          need_args(cursor, t, 1);
          src.power = parse_number(cursor, t[1]);
        } else if (key == "waveform") {
          need_args(cursor, t, 1);
          if (t[1] == "constant") src.constant_waveform = true;
          else if (t[1] == "random") src.constant_waveform = false;
          else cursor.fail("waveform must be 'random' or 'constant'");
        } else if (key == "model") {
          need_args(cursor, t, 1);
          if (t[1] == "planar") src.planar = true;
          else if (t[1] == "exact") src.planar = false;
          else cursor.fail("model must be 'exact' or 'planar'");
        } else {
          cursor.fail("unknown source key '" + key + "'");
        }
        break;
      }

      case Section::impairments: {
        auto& imp = s.impairments;
        if (key == "pll_deg") {
          if (t.size() == 2 && t[1] == "random") {
            imp.pll_random = true;
          } else {
            need_args(cursor, t, 3);
            imp.pll_deg = {parse_number(cursor, t[1]), parse_number(cursor, t[2]),
                           parse_number(cursor, t[3])};
          }
        } else if (key == "cable_ps") {
          if (t.size() == 3 && t[1] == "random") {
            imp.cable_random_max_ps = parse_number(cursor, t[2]);
          } else {
            if (t.size() < 3) cursor.fail("cable_ps expects an array id and values");
            std::vector<double> values;
            for (size_t i = 2; i < t.size(); ++i)
              values.push_back(parse_number(cursor, t[i]));
            imp.cable_ps.emplace_back(t[1], std::move(values));
          }
        } else if (key == "cfo_hz") {
          need_args(cursor, t, 1);
          imp.cfo_hz = parse_number(cursor, t[1]);
        } else {
          cursor.fail("unknown impairments key '" + key + "'");
        }
        break;
      }

      case Section::schedule: {
        auto& sc = s.schedule;
        if (key == "switched") {
          need_args(cursor, t, 1);
          sc.switched = parse_bool(cursor, t[1]);
        } else if (key == "packets_per_group") {
          need_args(cursor, t, 1);
          sc.packets_per_group = static_cast<int>(parse_int(cursor, t[1]));
        } else if (key == "packet_interval_s") {
          need_args(cursor, t, 1);
          sc.packet_interval_s = parse_number(cursor, t[1]);
        } else if (key == "cross_array") {
          need_args(cursor, t, 1);
          sc.cross_array = parse_bool(cursor, t[1]);
        } else {
          cursor.fail("unknown schedule key '" + key + "'");
        }
        break;
      }

      case Section::noise: {
        if (key == "snr_db") {
          need_args(cursor, t, 1);
          s.noise.use_snr = true;
          s.noise.snr_db = parse_number(cursor, t[1]);
        } else if (key == "sigma2") {
          need_args(cursor, t, 1);
          s.noise.use_snr = false;
          s.noise.sigma2 = parse_number(cursor, t[1]);
        } else {
          cursor.fail("unknown noise key '" + key + "'");
        }
        break;
      }

      case Section::estimator: {
        auto& e = s.estimator;
        if (key == "method") {
          need_args(cursor, t, 1);
          e.method = t[1];
        } else if (key == "subarray") {
          need_args(cursor, t, 2);
          e.m1 = static_cast<int>(parse_int(cursor, t[1]));
          e.m2 = static_cast<int>(parse_int(cursor, t[2]));
        } else if (key == "theta_deg") {
          need_args(cursor, t, 3);
          e.theta_min_deg = parse_number(cursor, t[1]);
          e.theta_max_deg = parse_number(cursor, t[2]);
          e.theta_step_deg = parse_number(cursor, t[3]);
        } else if (key == "phi_deg") {
          need_args(cursor, t, 3);
          e.phi_min_deg = parse_number(cursor, t[1]);
          e.phi_max_deg = parse_number(cursor, t[2]);
          e.phi_step_deg = parse_number(cursor, t[3]);
        } else if (key == "sources") {
          need_args(cursor, t, 1);
          e.sources = static_cast<int>(parse_int(cursor, t[1]));
        } else if (key == "refine") {
          need_args(cursor, t, 1);
          e.refine = parse_bool(cursor, t[1]);
        } else {
          cursor.fail("unknown estimator key '" + key + "'");
        }
        break;
      }

      case Section::locator: {
        auto& l = s.locator;
        if (key == "method") {
          need_args(cursor, t, 1);
          l.method = t[1];
        } else if (key == "radius_m") {
          need_args(cursor, t, 1);
          l.radius_m = parse_number(cursor, t[1]);
        } else if (key == "voxel_m") {
          need_args(cursor, t, 1);
          l.voxel_m = parse_number(cursor, t[1]);
        } else if (key == "max_iters") {
          need_args(cursor, t, 1);
          l.max_iters = static_cast<int>(parse_int(cursor, t[1]));
        } else if (key == "stack_dim") {
          need_args(cursor, t, 1);
          l.stack_dim = static_cast<int>(parse_int(cursor, t[1]));
        } else if (key == "synchronized") {
          need_args(cursor, t, 1);
          l.synchronized_arrays = parse_bool(cursor, t[1]);
        } else if (key == "smoothing_window") {
          need_args(cursor, t, 1);
          l.smoothing_window = static_cast<int>(parse_int(cursor, t[1]));
        } else {
          cursor.fail("unknown locator key '" + key + "'");
        }
        break;
      }

      case Section::trials: {
        auto& tr = s.trials;
        if (key == "count") {
          need_args(cursor, t, 1);
          tr.count = static_cast<int>(parse_int(cursor, t[1]));
        } else if (key == "region_m") {
          need_args(cursor, t, 6);
          tr.region_min_m = parse_vec3(cursor, t, 1);
          tr.region_max_m = parse_vec3(cursor, t, 4);
          tr.has_region = true;
        } else if (key == "pitch_m") {
          need_args(cursor, t, 1);
          tr.pitch_m = parse_number(cursor, t[1]);
        } else {
          cursor.fail("unknown trials key '" + key + "'");
        }
        break;
      }
    }
  }
  s.validate();
  return s;
}

Scenario Scenario::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path + ": cannot open scenario file");
  return parse(in, path);
}

Scenario Scenario::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in, "<string>");
}

void Scenario::validate() const {
  auto fail = [](const std::string& msg) { throw ScenarioError("scenario: " + msg); };
  if (arrays.empty()) fail("no [array] blocks");
  if (sources.empty()) fail("no [source] blocks");
  if (wavelength() <= 0.0) fail("non-positive wavelength");
  for (const auto& a : arrays) {
    if (a.nx < 2 || a.ny < 2) fail("array " + a.id + ": shape must be at least 2x2");
    if (a.spacing <= 0.0) fail("array " + a.id + ": non-positive spacing");
  }
  for (const auto& src : sources) {
    if (src.waypoints_m.empty() && !src.has_direction)
      fail("source " + src.id + ": needs position_m, waypoint_m, or direction_deg");
    if (!src.waypoints_m.empty() && src.has_direction)
      fail("source " + src.id + ": position and direction are exclusive");
    if (src.power <= 0.0) fail("source " + src.id + ": non-positive power");
  }
  if (schedule.packets_per_group < 1) fail("packets_per_group must be >= 1");
  if (schedule.packet_interval_s <= 0.0) fail("packet_interval_s must be positive");
  if (estimator.method != "music" && estimator.method != "ss-music" &&
      estimator.method != "i-ssmusic")
    fail("estimator method must be music, ss-music, or i-ssmusic");
  if (locator.method != "gp" && locator.method != "dpd")
    fail("locator method must be gp or dpd");
  if (locator.radius_m <= 0.0 || locator.voxel_m <= 0.0)
    fail("locator radius and voxel must be positive");
  if (locator.max_iters < 1) fail("locator max_iters must be >= 1");
  if (locator.smoothing_window < 1 || locator.smoothing_window % 2 == 0)
    fail("smoothing_window must be odd and >= 1");
  if (trials.count < 0) fail("trials count must be >= 0");
  if (trials.count > 0 && !trials.has_region) fail("trials need a region_m");
  for (const auto& [id, values] : impairments.cable_ps) {
    bool found = false;
    for (const auto& a : arrays)
      if (a.id == id) {
        found = true;
        if (static_cast<int>(values.size()) != a.nx * a.ny)
          fail("cable_ps for " + id + ": expected " + std::to_string(a.nx * a.ny) +
               " values");
      }
    if (!found) fail("cable_ps names unknown array " + id);
  }
}

std::string Scenario::serialize() const {
  std::ostringstream out;
  out << "name " << name << "\n";
  out << "seed " << seed << "\n";
  if (wavelength_given)
    out << "wavelength_m " << format_double(wavelength_m) << "\n";
  else
    out << "frequency_ghz " << format_double(frequency_ghz) << "\n";

  for (const auto& a : arrays) {
    out << "\n[array " << a.id << "]\n";
    out << "shape " << a.nx << " " << a.ny << "\n";
    out << (a.spacing_in_lambda ? "spacing_lambda " : "spacing_m ")
        << format_double(a.spacing) << "\n";
    out << "center_m " << format_double(a.center_m[0]) << " "
        << format_double(a.center_m[1]) << " " << format_double(a.center_m[2])
        << "\n";
    out << "orientation_deg " << format_double(a.yaw_deg) << " "
        << format_double(a.pitch_deg) << " " << format_double(a.roll_deg) << "\n";
  }

  for (const auto& src : sources) {
    out << "\n[source " << src.id << "]\n";
    if (src.has_direction)
      out << "direction_deg " << format_double(src.elevation_deg) << " "
          << format_double(src.azimuth_deg) << "\n";
    for (const auto& w : src.waypoints_m)
      out << (src.waypoints_m.size() == 1 ? "position_m " : "waypoint_m ")
          << format_double(w[0]) << " " << format_double(w[1]) << " "
          << format_double(w[2]) << "\n";
    if (!src.coherence_group.empty())
      out << "coherence " << src.coherence_group << "\n";
    out << "power " << format_double(src.power) << "\n";
    out << "waveform " << (src.constant_waveform ? "constant" : "random") << "\n";
    if (!src.waypoints_m.empty())
      out << "model " << (src.planar ? "planar" : "exact") << "\n";
  }

  out << "\n[impairments]\n";
  if (impairments.pll_random) out << "pll_deg random\n";
  else if (!impairments.pll_deg.empty())
    out << "pll_deg " << format_double(impairments.pll_deg[0]) << " "
        << format_double(impairments.pll_deg[1]) << " "
        << format_double(impairments.pll_deg[2]) << "\n";
  if (impairments.cable_random_max_ps > 0.0)
    out << "cable_ps random " << format_double(impairments.cable_random_max_ps)
        << "\n";
  for (const auto& [id, values] : impairments.cable_ps) {
    out << "cable_ps " << id;
    for (double v : values) out << " " << format_double(v);
    out << "\n";
  }
  out << "cfo_hz " << format_double(impairments.cfo_hz) << "\n";

  out << "\n[schedule]\n";
  out << "switched " << (schedule.switched ? "true" : "false") << "\n";
  out << "packets_per_group " << schedule.packets_per_group << "\n";
  out << "packet_interval_s " << format_double(schedule.packet_interval_s) << "\n";
  out << "cross_array " << (schedule.cross_array ? "true" : "false") << "\n";

  out << "\n[noise]\n";
  if (noise.use_snr) out << "snr_db " << format_double(noise.snr_db) << "\n";
  else out << "sigma2 " << format_double(noise.sigma2) << "\n";

  out << "\n[estimator]\n";
  out << "method " << estimator.method << "\n";
  out << "subarray " << estimator.m1 << " " << estimator.m2 << "\n";
  out << "theta_deg " << format_double(estimator.theta_min_deg) << " "
      << format_double(estimator.theta_max_deg) << " "
      << format_double(estimator.theta_step_deg) << "\n";
  out << "phi_deg " << format_double(estimator.phi_min_deg) << " "
      << format_double(estimator.phi_max_deg) << " "
      << format_double(estimator.phi_step_deg) << "\n";
  out << "sources " << estimator.sources << "\n";
  out << "refine " << (estimator.refine ? "true" : "false") << "\n";

  out << "\n[locator]\n";
  out << "method " << locator.method << "\n";
  out << "radius_m " << format_double(locator.radius_m) << "\n";
  out << "voxel_m " << format_double(locator.voxel_m) << "\n";
  out << "max_iters " << locator.max_iters << "\n";
  out << "stack_dim " << locator.stack_dim << "\n";
  out << "synchronized " << (locator.synchronized_arrays ? "true" : "false") << "\n";
  out << "smoothing_window " << locator.smoothing_window << "\n";

  if (trials.count > 0 || trials.has_region) {
    out << "\n[trials]\n";
    out << "count " << trials.count << "\n";
    if (trials.has_region)
      out << "region_m " << format_double(trials.region_min_m[0]) << " "
          << format_double(trials.region_min_m[1]) << " "
          << format_double(trials.region_min_m[2]) << " "
          << format_double(trials.region_max_m[0]) << " "
          << format_double(trials.region_max_m[1]) << " "
          << format_double(trials.region_max_m[2]) << "\n";
    out << "pitch_m " << format_double(trials.pitch_m) << "\n";
  }
  return out.str();
}

}  // namespace arrayloc
