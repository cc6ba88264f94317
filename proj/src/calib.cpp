#include "arrayloc/calib.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <sstream>
#include <stdexcept>

namespace arrayloc {
namespace {

// Columns of each capture-group appearance, keyed by group index.
std::map<int, std::vector<int>> group_columns(const CsiCapture& capture) {
  if (!capture.switched())
    throw std::invalid_argument("calibration: capture is not switched");
  std::map<int, std::vector<int>> cols;
  for (int c = 0; c < capture.snapshot_count(); ++c)
    cols[capture.column_group[c]].push_back(c);
  return cols;
}

// group index and member position of each element within the regular groups
struct ElementSlot {
  int group = -1;
  int member = -1;
};

std::vector<ElementSlot> element_slots(const UraConfig& ura) {
  std::vector<ElementSlot> slots(ura.element_count());
  const auto& groups = ura.grouping.groups;
  for (int g = 0; g < static_cast<int>(groups.size()); ++g)
    for (int k = 0; k < static_cast<int>(groups[g].size()); ++k)
      slots[groups[g][k]] = {g, k};
  return slots;
}

double mean_ratio_phase(const CVec& num, const CVec& den) {
  cplx acc = 0.0;
  for (int i = 0; i < num.size(); ++i) acc += num(i) * std::conj(den(i));
  if (std::abs(acc) == 0.0)
    throw std::invalid_argument("calibration: degenerate phase ratio");
  return std::arg(acc);
}

}  // namespace

const CalibrationProfile& CalibrationSet::for_array(const std::string& id) const {
  for (const auto& p : arrays)
    if (p.array_id == id) return p;
  throw std::invalid_argument("CalibrationSet: no profile for array " + id);
}

IntraGroupMeasurement measure_intra_group(const CsiCapture& capture,
                                          double spread_warn_rad) {
  const auto cols = group_columns(capture);
  const auto& groups = capture.ura.grouping.groups;
  IntraGroupMeasurement out;
  out.offsets.resize(groups.size());

  for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
    // regular capture group carrying exactly this element set
    int gidx = -1;
    for (int i = 0; i < static_cast<int>(capture.schedule.groups.size()); ++i)
      if (capture.schedule.groups[i].kind == GroupKind::regular &&
          capture.schedule.groups[i].elements == groups[g])
        gidx = i;
    auto it = gidx >= 0 ? cols.find(gidx) : cols.end();
    if (it == cols.end() || it->second.size() < 2)
      throw std::invalid_argument(
          "measure_intra_group: fewer than 2 packets for group " + std::to_string(g));
    const auto& packet_cols = it->second;

    out.offsets[g].assign(groups[g].size(), 0.0);
    for (size_t k = 1; k < groups[g].size(); ++k) {
      const int e = groups[g][k];
      const int ref = groups[g][0];
      std::vector<double> phases;
      phases.reserve(packet_cols.size());
      for (int c : packet_cols)
        phases.push_back(
            std::arg(capture.snapshots(e, c) * std::conj(capture.snapshots(ref, c))));
      double mean = circular_mean(phases);
      double spread = 0.0;
      for (double p : phases) spread = std::max(spread, std::abs(wrap_phase(p - mean)));
      if (spread > spread_warn_rad) {
        std::ostringstream msg;
        msg << "group " << g << " element " << e << ": per-snapshot spread "
            << spread << " rad exceeds " << spread_warn_rad
            << " (broadside far-field condition violated?)";
        out.warnings.push_back(msg.str());
      }
      out.offsets[g][k] = wrap_phase(mean);
    }
  }
  return out;
}

std::vector<double> measure_group_statics(
    const CsiCapture& capture, const std::vector<std::vector<double>>& intra) {
  const auto cols = group_columns(capture);
  const auto& layout = capture.ura.grouping;
  const auto slots = element_slots(capture.ura);
  const int gc = static_cast<int>(layout.groups.size());

  auto corrected_phase = [&](int element, int col) {
    const auto& slot = slots[element];
    return std::arg(capture.snapshots(element, col)) - intra[slot.group][slot.member];
  };

  // Links between groups that share a redundant window: within one packet
  // the time phase is common, so CPA ratios expose the static difference
  // (channel phases cancel only under the broadside condition).
  std::vector<double> statics(gc, 0.0);
  std::vector<char> known(gc, 0);
  known[0] = 1;
  struct Link {
    int from, to;
    double value;
  };
  std::vector<Link> links;
  for (int i = 0; i < static_cast<int>(capture.schedule.groups.size()); ++i) {
    const auto& cg = capture.schedule.groups[i];
    if (cg.kind != GroupKind::redundant) continue;
    auto it = cols.find(i);
    if (it == cols.end()) continue;
    for (size_t a = 0; a < cg.elements.size(); ++a)
      for (size_t b = a + 1; b < cg.elements.size(); ++b) {
        const int ga = slots[cg.elements[a]].group;
        const int gb = slots[cg.elements[b]].group;
        if (ga == gb) continue;
        cplx acc = 0.0;
        for (int c : it->second)
          acc += std::polar(1.0, corrected_phase(cg.elements[b], c) -
                                     corrected_phase(cg.elements[a], c));
        links.push_back({ga, gb, std::arg(acc)});
      }
  }

  bool progress = true;
  while (progress) {
    progress = false;
    for (const auto& link : links) {
      if (known[link.from] && !known[link.to]) {
        statics[link.to] = wrap_phase(statics[link.from] + link.value);
        known[link.to] = 1;
        progress = true;
      } else if (known[link.to] && !known[link.from]) {
        statics[link.from] = wrap_phase(statics[link.to] - link.value);
        known[link.from] = 1;
        progress = true;
      }
    }
  }
  for (int g = 0; g < gc; ++g)
    if (!known[g])
      throw std::invalid_argument(
          "measure_group_statics: group " + std::to_string(g) +
          " not reachable from group 0 through redundant CPA windows");
  return statics;
}

CalibrationProfile measure_broadside_profile(const CsiCapture& capture,
                                             double spread_warn_rad) {
  CalibrationProfile profile;
  profile.array_id = capture.array_id;
  auto intra = measure_intra_group(capture, spread_warn_rad);
  profile.intra_group = std::move(intra.offsets);
  profile.group_static = measure_group_statics(capture, profile.intra_group);
  profile.cpa = capture.ura.grouping.cpa;
  return profile;
}

double element_static_offset(const CalibrationProfile& profile,
                             const UraConfig& ura, int element) {
  const auto slots = element_slots(ura);
  const auto& slot = slots[element];
  if (slot.group < 0 || slot.group >= profile.group_count())
    throw std::invalid_argument("calibration profile: missing group for element " +
                                std::to_string(element));
  double offset = profile.intra_group[slot.group][slot.member];
  if (!profile.group_static.empty()) offset += profile.group_static[slot.group];
  return offset;
}

CsiCapture apply_intra_group(const CsiCapture& capture,
                             const CalibrationProfile& profile) {
  if (profile.group_count() != static_cast<int>(capture.ura.grouping.groups.size()))
    throw std::invalid_argument("apply_intra_group: profile group count mismatch");
  for (int g = 0; g < profile.group_count(); ++g)
    if (profile.intra_group[g].size() != capture.ura.grouping.groups[g].size())
      throw std::invalid_argument("apply_intra_group: profile missing group members");

  CsiCapture out = capture;
  const int m = capture.element_count();
  CVec correction(m);
  for (int e = 0; e < m; ++e)
    correction(e) = std::polar(1.0, -element_static_offset(profile, capture.ura, e));
  out.snapshots = correction.asDiagonal() * capture.snapshots;
  return out;
}

CsiCapture derotate_packets(const CsiCapture& capture) {
  const auto cols = group_columns(capture);
  CsiCapture out = capture;
  for (const auto& [gidx, packet_cols] : cols) {
    const auto& elements = capture.schedule.groups[gidx].elements;
    const int ref_col = packet_cols[0];
    for (size_t k = 1; k < packet_cols.size(); ++k) {
      const int c = packet_cols[k];
      cplx acc = 0.0;
      for (int e : elements)
        acc += capture.snapshots(e, c) * std::conj(capture.snapshots(e, ref_col));
      if (std::abs(acc) == 0.0) continue;  // dead packet, leave untouched
      const cplx rot = std::polar(1.0, -std::arg(acc));
      for (int e : elements) out.snapshots(e, c) = capture.snapshots(e, c) * rot;
    }
  }
  return out;
}

std::vector<double> align_inter_group(const CsiCapture& capture) {
  const auto cols = group_columns(capture);
  const auto slots = element_slots(capture.ura);
  const auto& sched = capture.schedule;
  const int regular_count = static_cast<int>(capture.ura.grouping.groups.size());

  // Map regular group -> its capture-group index.
  std::vector<int> regular_to_capture(regular_count, -1);
  for (int i = 0; i < static_cast<int>(sched.groups.size()); ++i)
    if (sched.groups[i].kind == GroupKind::regular)
      for (int g = 0; g < regular_count; ++g)
        if (sched.groups[i].elements == capture.ura.grouping.groups[g])
          regular_to_capture[g] = i;
  for (int g = 0; g < regular_count; ++g)
    if (regular_to_capture[g] < 0 || !cols.count(regular_to_capture[g]))
      throw std::invalid_argument("align_inter_group: group " + std::to_string(g) +
                                  " was never captured");

  // Each capture window (regular or redundant) has an unknown time phase.
  // Shared elements across windows measure phase differences; chain them
  // from group 0's window.
  const int windows = static_cast<int>(sched.groups.size());
  std::vector<double> time_phase(windows, 0.0);
  std::vector<char> known(windows, 0);
  known[regular_to_capture[0]] = 1;

  auto window_link = [&](int wa, int wb) -> std::optional<double> {
    // phase of window wb relative to wa through their shared elements
    const auto& ea = sched.groups[wa].elements;
    const auto& eb = sched.groups[wb].elements;
    auto ca = cols.find(wa);
    auto cb = cols.find(wb);
    if (ca == cols.end() || cb == cols.end()) return std::nullopt;
    cplx acc = 0.0;
    for (int e : ea) {
      if (std::find(eb.begin(), eb.end(), e) == eb.end()) continue;
      const size_t n = std::min(ca->second.size(), cb->second.size());
      for (size_t k = 0; k < n; ++k)
        acc += capture.snapshots(e, cb->second[k]) *
               std::conj(capture.snapshots(e, ca->second[k]));
    }
    if (std::abs(acc) == 0.0) return std::nullopt;
    return std::arg(acc);
  };

  bool progress = true;
  while (progress) {
    progress = false;
    for (int wa = 0; wa < windows; ++wa) {
      if (!known[wa]) continue;
      for (int wb = 0; wb < windows; ++wb) {
        if (known[wb]) continue;
        auto link = window_link(wa, wb);
        if (link) {
          time_phase[wb] = wrap_phase(time_phase[wa] + *link);
          known[wb] = 1;
          progress = true;
        }
      }
    }
  }

  std::vector<double> alignment(regular_count, 0.0);
  std::vector<int> unreachable;
  for (int g = 0; g < regular_count; ++g) {
    const int w = regular_to_capture[g];
    if (!known[w]) {
      unreachable.push_back(g);
      continue;
    }
    alignment[g] = wrap_phase(-time_phase[w]);
  }
  if (!unreachable.empty()) {
    std::ostringstream msg;
    msg << "align_inter_group: CPA chain broken; groups {";
    for (size_t i = 0; i < unreachable.size(); ++i)
      msg << (i ? "," : "") << unreachable[i];
    msg << "} share no redundant window chain with group 0";
    throw std::invalid_argument(msg.str());
  }
  return alignment;
}

CsiCapture stitch_capture(const CsiCapture& capture,
                          const std::vector<double>& inter_group) {
  const auto cols = group_columns(capture);
  const auto slots = element_slots(capture.ura);
  const auto& sched = capture.schedule;
  const int regular_count = static_cast<int>(capture.ura.grouping.groups.size());
  if (static_cast<int>(inter_group.size()) != regular_count)
    throw std::invalid_argument("stitch_capture: alignment phase per group required");

  const int snapshots = sched.packets_per_group;
  CsiCapture out;
  out.array_id = capture.array_id;
  out.ura = capture.ura;
  out.truth = capture.truth;
  out.snapshots = CMat::Zero(capture.element_count(), snapshots);
  out.timestamps.assign(snapshots, 0.0);

  for (int g = 0; g < regular_count; ++g) {
    int widx = -1;
    for (int i = 0; i < static_cast<int>(sched.groups.size()); ++i)
      if (sched.groups[i].kind == GroupKind::regular &&
          sched.groups[i].elements == capture.ura.grouping.groups[g])
        widx = i;
    auto it = widx >= 0 ? cols.find(widx) : cols.end();
    if (it == cols.end() || static_cast<int>(it->second.size()) < snapshots)
      throw std::invalid_argument("stitch_capture: group " + std::to_string(g) +
                                  " has too few packets");
    const cplx rot = std::polar(1.0, inter_group[g]);
    for (int k = 0; k < snapshots; ++k) {
      const int c = it->second[k];
      for (int e : capture.ura.grouping.groups[g])
        out.snapshots(e, k) = capture.snapshots(e, c) * rot;
      if (g == 0) out.timestamps[k] = capture.timestamps[c];
    }
  }
  return out;
}

CalibratedCapture calibrate_capture(const CsiCapture& capture,
                                    const CalibrationProfile& profile) {
  CsiCapture statics_removed = apply_intra_group(capture, profile);
  CsiCapture derotated = derotate_packets(statics_removed);
  std::vector<double> alignment = align_inter_group(derotated);
  CalibratedCapture result{stitch_capture(derotated, alignment), profile};
  result.profile.inter_group = std::move(alignment);
  return result;
}

CalibratedSession calibrate_session(const SessionCapture& session,
                                    const std::vector<CalibrationProfile>& profiles) {
  if (session.arrays.empty())
    throw std::invalid_argument("calibrate_session: empty session");
  if (profiles.size() != session.arrays.size())
    throw std::invalid_argument("calibrate_session: one profile per array required");

  CalibratedSession out;
  std::vector<CsiCapture> derotated;
  for (size_t a = 0; a < session.arrays.size(); ++a) {
    CsiCapture statics_removed = apply_intra_group(session.arrays[a], profiles[a]);
    derotated.push_back(derotate_packets(statics_removed));
    std::vector<double> alignment = align_inter_group(derotated.back());
    out.captures.push_back(stitch_capture(derotated.back(), alignment));
    CalibrationProfile p = profiles[a];
    p.inter_group = std::move(alignment);
    out.profiles.push_back(std::move(p));
  }

  std::vector<UraConfig> uras;
  for (const auto& cap : session.arrays) uras.push_back(cap.ura);

  for (const auto& cross : session.cross) {
    out.inter_array.push_back(align_inter_array(cross, uras, profiles));

    // Time bridge. The cross window's packets carry their own CFO drift;
    // freeze them onto the window's first packet using the common phase of
    // both reference elements, then compare each frozen series against its
    // array's stitched capture. The difference of the two offsets is the
    // CFO drift between the arrays' capture windows.
    const int packets = static_cast<int>(cross.values_a.size());
    if (packets < 1)
      throw std::invalid_argument("calibrate_session: empty cross window");
    CVec frozen_a = cross.values_a, frozen_b = cross.values_b;
    for (int k = 1; k < packets; ++k) {
      cplx acc = cross.values_a(k) * std::conj(cross.values_a(0)) +
                 cross.values_b(k) * std::conj(cross.values_b(0));
      if (std::abs(acc) == 0.0) continue;
      const cplx rot = std::polar(1.0, -std::arg(acc));
      frozen_a(k) *= rot;
      frozen_b(k) *= rot;
    }
    auto window_offset = [&](int array_index, int element, const CVec& frozen,
                             double static_corr) {
      const CsiCapture& stitched = out.captures[array_index];
      const int n = std::min<int>(packets, stitched.snapshot_count());
      cplx acc = 0.0;
      for (int k = 0; k < n; ++k)
        acc += frozen(k) * std::polar(1.0, -static_corr) *
               std::conj(stitched.snapshots(element, k));
      if (std::abs(acc) == 0.0)
        throw std::invalid_argument("calibrate_session: degenerate cross window");
      return std::arg(acc);
    };
    const double corr_a = element_static_offset(profiles[cross.array_a],
                                                uras[cross.array_a], cross.element_a);
    const double corr_b = element_static_offset(profiles[cross.array_b],
                                                uras[cross.array_b], cross.element_b);
    const double d_a = window_offset(cross.array_a, cross.element_a, frozen_a, corr_a);
    const double d_b = window_offset(cross.array_b, cross.element_b, frozen_b, corr_b);
    const cplx rot = std::polar(1.0, wrap_phase(d_b - d_a));
    out.captures[cross.array_b].snapshots *= rot;
  }
  return out;
}

InterArrayEntry align_inter_array(const CrossArrayCapture& cross,
                                  const std::vector<UraConfig>& uras,
                                  const std::vector<CalibrationProfile>& profiles) {
  if (cross.values_a.size() == 0 || cross.values_b.size() == 0)
    throw std::invalid_argument("align_inter_array: capture lacks cross-array elements");
  const auto& ura_a = uras.at(cross.array_a);
  const auto& ura_b = uras.at(cross.array_b);
  double corr_a = element_static_offset(profiles.at(cross.array_a), ura_a, cross.element_a);
  double corr_b = element_static_offset(profiles.at(cross.array_b), ura_b, cross.element_b);

  double raw = mean_ratio_phase(cross.values_b, cross.values_a);
  InterArrayEntry entry;
  entry.array_a = ura_a.id;
  entry.array_b = ura_b.id;
  entry.element_a = cross.element_a;
  entry.element_b = cross.element_b;
  entry.delta_gamma = wrap_phase(raw - (corr_b - corr_a));
  return entry;
}

}  // namespace arrayloc
