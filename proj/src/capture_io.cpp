#include "arrayloc/capture_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "arrayloc/scenario.hpp"  // format_double

namespace arrayloc {
namespace {

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  std::ostringstream out;
  out << origin << ":" << line << ": " << msg;
  throw std::runtime_error(out.str());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  return in;
}

const char* kind_name(GroupKind kind) {
  switch (kind) {
    case GroupKind::regular: return "regular";
    case GroupKind::redundant: return "redundant";
    case GroupKind::cross: return "cross";
  }
  return "regular";
}

GroupKind kind_from(const std::string& name, const std::string& origin, int line) {
  if (name == "regular") return GroupKind::regular;
  if (name == "redundant") return GroupKind::redundant;
  if (name == "cross") return GroupKind::cross;
  fail(origin, line, "unknown group kind '" + name + "'");
}

std::string fmt(double v) { return format_double(v); }

void write_truth(std::ostream& out, const CaptureTruth& truth) {
  out << "truth simulation-only\n";
  out << "seed " << truth.seed << "\n";
  out << "noise_variance " << fmt(truth.noise_variance) << "\n";
  for (const auto& src : truth.sources) {
    out << "source ";
    if (src.position)
      out << "position " << fmt(src.position->x()) << " " << fmt(src.position->y())
          << " " << fmt(src.position->z());
    else
      out << "direction " << fmt(src.direction->elevation) << " "
          << fmt(src.direction->azimuth);
    out << " coherence " << (src.coherence_group.empty() ? "-" : src.coherence_group)
        << " power " << fmt(src.power) << " constant "
        << (src.constant_waveform ? 1 : 0) << " planar "
        << (src.phase_model == PhaseModel::planar ? 1 : 0) << "\n";
  }
  const auto& imp = truth.impairments;
  if (!imp.pll_phases.empty()) {
    out << "pll";
    for (double p : imp.pll_phases) out << " " << fmt(p);
    out << "\n";
  }
  for (size_t a = 0; a < imp.cable_delays.size(); ++a) {
    out << "cable " << a;
    for (double d : imp.cable_delays[a]) out << " " << fmt(d);
    out << "\n";
  }
  if (imp.cfo_hz != 0.0) out << "cfo_hz " << fmt(imp.cfo_hz) << "\n";
  out << "end truth\n";
}

}  // namespace

void write_capture(std::ostream& out, const CsiCapture& capture, bool include_truth) {
  const auto& ura = capture.ura;
  out << "csi-capture v1\n";
  out << "array_id " << capture.array_id << "\n";
  out << "shape " << ura.nx << " " << ura.ny << "\n";
  out << "spacing_m " << fmt(ura.spacing) << "\n";
  out << "wavelength_m " << fmt(ura.wavelength) << "\n";
  out << "center_m " << fmt(ura.center.x()) << " " << fmt(ura.center.y()) << " "
      << fmt(ura.center.z()) << "\n";
  out << "orientation";
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out << " " << fmt(ura.orientation(r, c));
  out << "\n";
  for (const auto& g : ura.grouping.groups) {
    out << "group";
    for (int e : g) out << " " << e;
    out << "\n";
  }
  out << "cpa";
  for (int c : ura.grouping.cpa) out << " " << c;
  out << "\n";

  if (capture.switched()) {
    out << "schedule_groups " << capture.schedule.groups.size() << "\n";
    for (const auto& g : capture.schedule.groups) {
      out << "sched " << kind_name(g.kind);
      for (int e : g.elements) out << " " << e;
      out << "\n";
    }
    out << "order";
    for (int i : capture.schedule.order) out << " " << i;
    out << "\n";
    out << "packets_per_group " << capture.schedule.packets_per_group << "\n";
    out << "packet_interval_s " << fmt(capture.schedule.packet_interval) << "\n";
    out << "column_group";
    for (int g : capture.column_group) out << " " << g;
    out << "\n";
  }

  out << "snapshots " << capture.snapshot_count() << "\n";
  out << "columns snapshot timestamp_s element re im\n";
  out << "data\n";
  for (int t = 0; t < capture.snapshot_count(); ++t) {
    if (capture.switched()) {
      const auto& g = capture.schedule.groups[capture.column_group[t]];
      for (int e : g.elements)
        out << t << " " << fmt(capture.timestamps[t]) << " " << e << " "
            << fmt(capture.snapshots(e, t).real()) << " "
            << fmt(capture.snapshots(e, t).imag()) << "\n";
    } else {
      for (int e = 0; e < capture.element_count(); ++e)
        out << t << " " << fmt(capture.timestamps[t]) << " " << e << " "
            << fmt(capture.snapshots(e, t).real()) << " "
            << fmt(capture.snapshots(e, t).imag()) << "\n";
    }
  }
  out << "end data\n";
  if (include_truth && capture.truth) write_truth(out, *capture.truth);
  out << "end\n";
}

CsiCapture read_capture(std::istream& in, const std::string& origin) {
  CsiCapture cap;
  UraConfig& ura = cap.ura;
  ura.grouping.groups.clear();
  ura.grouping.cpa.clear();

  std::string line;
  int lineno = 0;
  auto next_tokens = [&](std::vector<std::string>& t) -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      t.clear();
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) t.push_back(tok);
      if (!t.empty()) return true;
    }
    return false;
  };

  std::vector<std::string> t;
  if (!next_tokens(t) || t[0] != "csi-capture")
    fail(origin, lineno, "not a csi-capture file");

  int snapshots = -1;
  bool in_truth = false;
  CaptureTruth truth;
  while (next_tokens(t)) {
    const std::string& key = t[0];
    if (in_truth) {
      if (key == "end" && t.size() == 2 && t[1] == "truth") {
        in_truth = false;
        cap.truth = truth;
      } else if (key == "seed") {
        truth.seed = std::stoull(t[1]);
      } else if (key == "noise_variance") {
        truth.noise_variance = std::stod(t[1]);
      } else if (key == "source") {
        SourceSpec src;
        size_t i = 1;
        if (t[i] == "position") {
          src.position = Vec3(std::stod(t[i + 1]), std::stod(t[i + 2]),
                              std::stod(t[i + 3]));
          i += 4;
        } else {
          src.direction = Direction::from_radians(std::stod(t[i + 1]),
                                                  std::stod(t[i + 2]));
          i += 3;
        }
        for (; i + 1 < t.size(); i += 2) {
          if (t[i] == "coherence")
            src.coherence_group = t[i + 1] == "-" ? "" : t[i + 1];
          else if (t[i] == "power") src.power = std::stod(t[i + 1]);
          else if (t[i] == "constant") src.constant_waveform = t[i + 1] == "1";
          else if (t[i] == "planar")
            src.phase_model = t[i + 1] == "1" ? PhaseModel::planar : PhaseModel::exact;
        }
        truth.sources.push_back(std::move(src));
      } else if (key == "pll") {
        for (size_t i = 1; i < t.size(); ++i)
          truth.impairments.pll_phases.push_back(std::stod(t[i]));
      } else if (key == "cable") {
        size_t idx = std::stoul(t[1]);
        if (truth.impairments.cable_delays.size() <= idx)
          truth.impairments.cable_delays.resize(idx + 1);
        for (size_t i = 2; i < t.size(); ++i)
          truth.impairments.cable_delays[idx].push_back(std::stod(t[i]));
      } else if (key == "cfo_hz") {
        truth.impairments.cfo_hz = std::stod(t[1]);
      }
      continue;
    }

    if (key == "array_id") {
      cap.array_id = t.size() > 1 ? t[1] : "";
      ura.id = cap.array_id;
    } else if (key == "shape") {
      ura.nx = std::stoi(t[1]);
      ura.ny = std::stoi(t[2]);
    } else if (key == "spacing_m") {
      ura.spacing = std::stod(t[1]);
    } else if (key == "wavelength_m") {
      ura.wavelength = std::stod(t[1]);
    } else if (key == "center_m") {
      ura.center = Vec3(std::stod(t[1]), std::stod(t[2]), std::stod(t[3]));
    } else if (key == "orientation") {
      if (t.size() != 10) fail(origin, lineno, "orientation needs 9 values");
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) ura.orientation(r, c) = std::stod(t[1 + r * 3 + c]);
    } else if (key == "group") {
      std::vector<int> g;
      for (size_t i = 1; i < t.size(); ++i) g.push_back(std::stoi(t[i]));
      ura.grouping.groups.push_back(std::move(g));
    } else if (key == "cpa") {
      for (size_t i = 1; i < t.size(); ++i)
        ura.grouping.cpa.push_back(std::stoi(t[i]));
    } else if (key == "schedule_groups") {
      cap.schedule.groups.reserve(std::stoul(t[1]));
    } else if (key == "sched") {
      CaptureGroup g;
      g.kind = kind_from(t[1], origin, lineno);
      for (size_t i = 2; i < t.size(); ++i) g.elements.push_back(std::stoi(t[i]));
      cap.schedule.groups.push_back(std::move(g));
    } else if (key == "order") {
      for (size_t i = 1; i < t.size(); ++i)
        cap.schedule.order.push_back(std::stoi(t[i]));
    } else if (key == "packets_per_group") {
      cap.schedule.packets_per_group = std::stoi(t[1]);
    } else if (key == "packet_interval_s") {
      cap.schedule.packet_interval = std::stod(t[1]);
    } else if (key == "column_group") {
      for (size_t i = 1; i < t.size(); ++i)
        cap.column_group.push_back(std::stoi(t[i]));
    } else if (key == "snapshots") {
      snapshots = std::stoi(t[1]);
      if (snapshots < 0) fail(origin, lineno, "negative snapshot count");
      cap.snapshots = CMat::Zero(ura.nx * ura.ny, snapshots);
      cap.timestamps.assign(snapshots, 0.0);
    } else if (key == "columns") {
      // informative only
    } else if (key == "data") {
      if (snapshots < 0) fail(origin, lineno, "data before snapshot count");
      std::vector<std::string> row;
      while (next_tokens(row)) {
        if (row[0] == "end") break;
        if (row.size() != 5) fail(origin, lineno, "data row needs 5 columns");
        int tcol = std::stoi(row[0]);
        int elem = std::stoi(row[2]);
        if (tcol < 0 || tcol >= snapshots || elem < 0 || elem >= ura.nx * ura.ny)
          fail(origin, lineno, "data row out of range");
        cap.timestamps[tcol] = std::stod(row[1]);
        cap.snapshots(elem, tcol) = cplx(std::stod(row[3]), std::stod(row[4]));
      }
    } else if (key == "truth") {
      in_truth = true;
      truth = CaptureTruth{};
    } else if (key == "end") {
      break;
    } else {
      fail(origin, lineno, "unknown capture key '" + key + "'");
    }
  }
  if (snapshots < 0) fail(origin, lineno, "capture has no data");
  ura.validate();
  return cap;
}

void write_cross_capture(std::ostream& out, const CrossArrayCapture& cross) {
  out << "cross-capture v1\n";
  out << "arrays " << cross.array_a << " " << cross.array_b << "\n";
  out << "elements " << cross.element_a << " " << cross.element_b << "\n";
  out << "packets " << cross.values_a.size() << "\n";
  out << "columns packet timestamp_s re_a im_a re_b im_b\n";
  out << "data\n";
  for (int p = 0; p < cross.values_a.size(); ++p)
    out << p << " " << fmt(cross.timestamps[p]) << " "
        << fmt(cross.values_a(p).real()) << " " << fmt(cross.values_a(p).imag())
        << " " << fmt(cross.values_b(p).real()) << " "
        << fmt(cross.values_b(p).imag()) << "\n";
  out << "end data\n";
  out << "end\n";
}

CrossArrayCapture read_cross_capture(std::istream& in, const std::string& origin) {
  CrossArrayCapture cross;
  std::string line;
  int lineno = 0;
  int packets = -1;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> t;
    std::string tok;
    while (ls >> tok) t.push_back(tok);
    if (t.empty()) continue;
    if (t[0] == "cross-capture") continue;
    if (t[0] == "arrays") {
      cross.array_a = std::stoi(t[1]);
      cross.array_b = std::stoi(t[2]);
    } else if (t[0] == "elements") {
      cross.element_a = std::stoi(t[1]);
      cross.element_b = std::stoi(t[2]);
    } else if (t[0] == "packets") {
      packets = std::stoi(t[1]);
      cross.values_a.resize(packets);
      cross.values_b.resize(packets);
      cross.timestamps.assign(packets, 0.0);
    } else if (t[0] == "columns" || t[0] == "data") {
      // fallthrough to rows
    } else if (t[0] == "end") {
      if (t.size() == 1) break;
    } else {
      if (packets < 0) fail(origin, lineno, "row before packet count");
      int p = std::stoi(t[0]);
      if (p < 0 || p >= packets || t.size() != 6)
        fail(origin, lineno, "bad cross-capture row");
      cross.timestamps[p] = std::stod(t[1]);
      cross.values_a(p) = cplx(std::stod(t[2]), std::stod(t[3]));
      cross.values_b(p) = cplx(std::stod(t[4]), std::stod(t[5]));
    }
  }
  if (packets < 0) fail(origin, lineno, "cross capture has no packets");
  return cross;
}

void write_profiles(std::ostream& out, const CalibrationSet& set) {
  out << "calibration-profile v1\n";
  for (const auto& p : set.arrays) {
    out << "array " << p.array_id << "\n";
    out << "groups " << p.group_count() << "\n";
    for (int g = 0; g < p.group_count(); ++g) {
      out << "intra " << g;
      for (double o : p.intra_group[g]) out << " " << fmt(o);
      out << "\n";
    }
    for (size_t g = 0; g < p.group_static.size(); ++g)
      out << "static " << g << " " << fmt(p.group_static[g]) << "\n";
    for (size_t g = 0; g < p.inter_group.size(); ++g)
      out << "inter_group " << g << " " << fmt(p.inter_group[g]) << "\n";
    out << "cpa";
    for (int c : p.cpa) out << " " << c;
    out << "\n";
    out << "end array\n";
  }
  for (const auto& e : set.inter_array)
    out << "inter_array " << e.array_a << " " << e.array_b << " " << e.element_a
        << " " << e.element_b << " " << fmt(e.delta_gamma) << "\n";
  out << "end\n";
}

CalibrationSet read_profiles(std::istream& in, const std::string& origin) {
  CalibrationSet set;
  std::string line;
  int lineno = 0;
  CalibrationProfile current;
  bool in_array = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> t;
    std::string tok;
    while (ls >> tok) t.push_back(tok);
    if (t.empty()) continue;
    if (t[0] == "calibration-profile") continue;
    if (t[0] == "array") {
      current = CalibrationProfile{};
      current.array_id = t[1];
      in_array = true;
    } else if (t[0] == "groups") {
      current.intra_group.resize(std::stoul(t[1]));
    } else if (t[0] == "intra") {
      size_t g = std::stoul(t[1]);
      if (g >= current.intra_group.size()) fail(origin, lineno, "intra group out of range");
      for (size_t i = 2; i < t.size(); ++i)
        current.intra_group[g].push_back(std::stod(t[i]));
    } else if (t[0] == "static") {
      size_t g = std::stoul(t[1]);
      if (current.group_static.size() <= g) current.group_static.resize(g + 1, 0.0);
      current.group_static[g] = std::stod(t[2]);
    } else if (t[0] == "inter_group") {
      size_t g = std::stoul(t[1]);
      if (current.inter_group.size() <= g) current.inter_group.resize(g + 1, 0.0);
      current.inter_group[g] = std::stod(t[2]);
    } else if (t[0] == "cpa") {
      for (size_t i = 1; i < t.size(); ++i) current.cpa.push_back(std::stoi(t[i]));
    } else if (t[0] == "end" && t.size() == 2 && t[1] == "array") {
      if (!in_array) fail(origin, lineno, "end array outside array block");
      set.arrays.push_back(std::move(current));
      in_array = false;
    } else if (t[0] == "inter_array") {
      InterArrayEntry e;
      e.array_a = t[1];
      e.array_b = t[2];
      e.element_a = std::stoi(t[3]);
      e.element_b = std::stoi(t[4]);
      e.delta_gamma = std::stod(t[5]);
      set.inter_array.push_back(std::move(e));
    } else if (t[0] == "end") {
      break;
    } else {
      fail(origin, lineno, "unknown profile key '" + t[0] + "'");
    }
  }
  return set;
}

void write_spectrum(std::ostream& out, const std::string& array_id,
                    const std::string& method, const SpectrumGrid& grid) {
  out << "aoa-spectrum v1\n";
  out << "array_id " << array_id << "\n";
  out << "method " << method << "\n";
  out << "columns theta_deg phi_deg value\n";
  out << "data\n";
  for (int ti = 0; ti < grid.theta.size(); ++ti)
    for (int pj = 0; pj < grid.phi.size(); ++pj)
      out << fmt(rad2deg(grid.theta(ti))) << " " << fmt(rad2deg(grid.phi(pj)))
          << " " << fmt(grid.values(ti, pj)) << "\n";
  out << "end data\n";
  out << "end\n";
}

void write_peaks(std::ostream& out, const std::string& method,
                 const PeakList& peaks) {
  out << "aoa-peaks v1\n";
  out << "method " << method << "\n";
  out << "shortfall " << (peaks.shortfall ? "true" : "false") << "\n";
  out << "columns array_id theta_deg phi_deg value\n";
  for (const auto& p : peaks.peaks)
    out << p.array_id << " " << fmt(rad2deg(p.direction.elevation)) << " "
        << fmt(rad2deg(p.direction.azimuth)) << " " << fmt(p.spectrum_value)
        << "\n";
  out << "end\n";
}

void write_fix(std::ostream& out, const PositionFix& fix, double residual_m) {
  out << "position-fix v1\n";
  out << "method " << (fix.method == LocateMethod::gp ? "gp" : "dpd") << "\n";
  out << "position_m " << fmt(fix.position.x()) << " " << fmt(fix.position.y())
      << " " << fmt(fix.position.z()) << "\n";
  out << "iterations " << fix.iterations << "\n";
  out << "converged " << (fix.converged ? "true" : "false") << "\n";
  out << "spectrum_peak " << fmt(fix.spectrum_peak) << "\n";
  out << "residual_m " << fmt(residual_m) << "\n";
  out << "end\n";
}

void write_lsoi_spectrum(std::ostream& out, const Lsoi& lsoi,
                         const Eigen::VectorXd& values) {
  out << "lsoi-spectrum v1\n";
  out << "center_m " << fmt(lsoi.center.x()) << " " << fmt(lsoi.center.y()) << " "
      << fmt(lsoi.center.z()) << "\n";
  out << "radius_m " << fmt(lsoi.radius) << "\n";
  out << "voxel_m " << fmt(lsoi.voxel) << "\n";
  out << "columns x_m y_m z_m value\n";
  out << "data\n";
  for (size_t k = 0; k < lsoi.points.size(); ++k)
    out << fmt(lsoi.points[k].x()) << " " << fmt(lsoi.points[k].y()) << " "
        << fmt(lsoi.points[k].z()) << " " << fmt(values(static_cast<int>(k)))
        << "\n";
  out << "end data\n";
  out << "end\n";
}

void write_capture_file(const std::string& path, const CsiCapture& capture,
                        bool include_truth) {
  auto out = open_out(path);
  write_capture(out, capture, include_truth);
}
CsiCapture read_capture_file(const std::string& path) {
  auto in = open_in(path);
  return read_capture(in, path);
}
void write_cross_capture_file(const std::string& path, const CrossArrayCapture& cross) {
  auto out = open_out(path);
  write_cross_capture(out, cross);
}
CrossArrayCapture read_cross_capture_file(const std::string& path) {
  auto in = open_in(path);
  return read_cross_capture(in, path);
}
void write_profiles_file(const std::string& path, const CalibrationSet& set) {
  auto out = open_out(path);
  write_profiles(out, set);
}
CalibrationSet read_profiles_file(const std::string& path) {
  auto in = open_in(path);
  return read_profiles(in, path);
}
void write_spectrum_file(const std::string& path, const std::string& array_id,
                         const std::string& method, const SpectrumGrid& grid) {
  auto out = open_out(path);
  write_spectrum(out, array_id, method, grid);
}
void write_peaks_file(const std::string& path, const std::string& method,
                      const PeakList& peaks) {
  auto out = open_out(path);
  write_peaks(out, method, peaks);
}
void write_fix_file(const std::string& path, const PositionFix& fix,
                    double residual_m) {
  auto out = open_out(path);
  write_fix(out, fix, residual_m);
}
void write_lsoi_spectrum_file(const std::string& path, const Lsoi& lsoi,
                              const Eigen::VectorXd& values) {
  auto out = open_out(path);
  write_lsoi_spectrum(out, lsoi, values);
}

}  // namespace arrayloc
