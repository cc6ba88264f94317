#include "arrayloc/sim.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "arrayloc/rng.hpp"

namespace arrayloc {
namespace {

// Substream tags for the deterministic draw scheme.
constexpr std::uint64_t kWaveformTag = 0x57415645;  // waveforms, per group
constexpr std::uint64_t kGainTag = 0x4741494e;      // coherent gains, per source
constexpr std::uint64_t kNoiseTag = 0x4e4f4953;     // noise, per (array, element, snapshot)

cplx noise_sample(std::uint64_t seed, int array_index, int element, int snapshot,
                  double variance) {
  if (variance <= 0.0) return 0.0;
  double z0, z1;
  std::uint64_t a = kNoiseTag + static_cast<std::uint64_t>(array_index);
  std::uint64_t b = static_cast<std::uint64_t>(element) * 0x100000000ull +
                    static_cast<std::uint64_t>(snapshot);
  counter_normal_pair(seed, a, b, z0, z1);
  double scale = std::sqrt(variance / 2.0);
  return {scale * z0, scale * z1};
}

}  // namespace

bool HardwareImpairments::all_zero() const {
  for (double p : pll_phases)
    if (p != 0.0) return false;
  for (const auto& arr : cable_delays)
    for (double d : arr)
      if (d != 0.0) return false;
  return cfo_hz == 0.0 && noise_variance == 0.0;
}

double HardwareImpairments::static_phase(int array_index, int element, int chain,
                                         double carrier_hz) const {
  double phase = 0.0;
  if (!pll_phases.empty()) {
    if (chain >= static_cast<int>(pll_phases.size()))
      throw std::invalid_argument("HardwareImpairments: chain index out of range");
    phase += pll_phases[chain];
  }
  if (!cable_delays.empty()) {
    if (array_index >= static_cast<int>(cable_delays.size()) ||
        element >= static_cast<int>(cable_delays[array_index].size()))
      throw std::invalid_argument("HardwareImpairments: cable delay missing");
    phase += 2.0 * kPi * carrier_hz * cable_delays[array_index][element];
  }
  return phase;
}

CaptureSchedule CaptureSchedule::standard_for(const GroupingLayout& layout,
                                              int packets_per_group,
                                              double packet_interval) {
  CaptureSchedule s;
  s.packets_per_group = packets_per_group;
  s.packet_interval = packet_interval;
  for (const auto& g : layout.groups) s.groups.push_back({GroupKind::regular, g});
  const int gc = static_cast<int>(layout.cpa.size());
  if (gc >= 2) {
    int window = std::min(3, gc);
    for (int start = 0; start + window <= gc; ++start) {
      CaptureGroup red;
      red.kind = GroupKind::redundant;
      for (int k = 0; k < window; ++k) red.elements.push_back(layout.cpa[start + k]);
      s.groups.push_back(std::move(red));
    }
  }
  for (int i = 0; i < static_cast<int>(s.groups.size()); ++i) s.order.push_back(i);
  return s;
}

void CaptureSchedule::validate(int element_count) const {
  if (packets_per_group < 1)
    throw std::invalid_argument("CaptureSchedule: packets_per_group must be >= 1");
  if (!(packet_interval > 0.0))
    throw std::invalid_argument("CaptureSchedule: packet_interval must be positive");
  std::vector<char> covered(element_count, 0);
  for (int idx : order) {
    if (idx < 0 || idx >= static_cast<int>(groups.size()))
      throw std::invalid_argument("CaptureSchedule: group index out of range");
    const auto& g = groups[idx];
    if (g.elements.empty() || g.elements.size() > 3)
      throw std::invalid_argument("CaptureSchedule: groups sample 1..3 elements");
    std::vector<char> chain_used(3, 0);
    for (int e : g.elements) {
      if (e < 0 || e >= element_count)
        throw std::invalid_argument("CaptureSchedule: element out of range");
      int chain = e % 3;
      if (chain_used[chain])
        throw std::invalid_argument(
            "CaptureSchedule: two elements of one packet share an RF chain");
      chain_used[chain] = 1;
      if (g.kind == GroupKind::regular) covered[e] = 1;
    }
  }
  for (int e = 0; e < element_count; ++e)
    if (!covered[e])
      throw std::invalid_argument("CaptureSchedule: element never sampled by a regular group");
}

CVec propagation_vector(const UraConfig& ura, const Vec3& p, PhaseModel model) {
  const double k = 2.0 * kPi / ura.wavelength;
  const int m = ura.element_count();
  CVec v(m);
  if (model == PhaseModel::exact) {
    for (int e = 0; e < m; ++e) {
      double r = (p - ura.element_world(e)).norm();
      if (r < 1e-12)
        throw std::invalid_argument("propagation_vector: source on an array element");
      v(e) = std::polar(1.0, -k * r);
    }
    return v;
  }
  Direction dir = direction_from_point(ura, p);
  double range = (p - ura.center).norm();
  return std::polar(1.0, -k * range) * steering_vector(ura, dir);
}

SourceMixer::SourceMixer(const std::vector<SourceSpec>& sources, std::uint64_t seed)
    : sources_(sources), seed_(seed) {
  std::map<std::string, int> label_to_group;
  int anon = 0;
  for (size_t l = 0; l < sources.size(); ++l) {
    const auto& src = sources[l];
    int group;
    if (src.coherence_group.empty()) {
      group = group_count_;  // unlabeled sources are incoherent singletons
      label_to_group["\x01anon" + std::to_string(anon++)] = group;
    } else {
      auto it = label_to_group.find(src.coherence_group);
      if (it != label_to_group.end()) {
        group = it->second;
      } else {
        group = group_count_;
        label_to_group[src.coherence_group] = group;
      }
    }
    if (group == group_count_) {
      ++group_count_;
      waveform_owner_.push_back(-1);
      group_constant_.push_back(false);
    }
    group_of_.push_back(group);
    if (src.waveform && waveform_owner_[group] < 0)
      waveform_owner_[group] = static_cast<int>(l);
    if (src.constant_waveform) group_constant_[group] = true;

    bool is_reference = true;  // first source of its group
    for (size_t prior = 0; prior < l; ++prior)
      if (group_of_[prior] == group) is_reference = false;
    double phase = is_reference
                       ? 0.0
                       : 2.0 * kPi * counter_uniform(seed, kGainTag, l);
    gain_.push_back(std::polar(std::sqrt(src.power), phase));
  }
}

cplx SourceMixer::amplitude(int source_index, int snapshot_index) const {
  int group = group_of_[source_index];
  cplx w;
  if (waveform_owner_[group] >= 0) {
    const auto& seq = *sources_[waveform_owner_[group]].waveform;
    if (snapshot_index >= static_cast<int>(seq.size()))
      throw std::invalid_argument("SourceMixer: explicit waveform shorter than capture");
    w = seq[snapshot_index];
  } else if (group_constant_[group]) {
    w = 1.0;
  } else {
    double phase = 2.0 * kPi * counter_uniform(seed_, kWaveformTag + group,
                                               snapshot_index);
    w = std::polar(1.0, phase);
  }
  return gain_[source_index] * w;
}

namespace {

void check_sources(const std::vector<UraConfig>& uras,
                   const std::vector<SourceSpec>& sources) {
  if (uras.empty()) throw std::invalid_argument("simulate: no arrays");
  if (sources.empty()) throw std::invalid_argument("simulate: no sources");
  for (const auto& src : sources) {
    if (!src.has_location())
      throw std::invalid_argument("simulate: source has neither position nor direction");
    if (src.position) {
      for (const auto& ura : uras)
        if ((*src.position - ura.center).norm() < 1e-9)
          throw std::invalid_argument("simulate: source coincides with an array center");
    }
  }
}

CVec source_vector(const UraConfig& ura, const SourceSpec& src) {
  if (src.position) return propagation_vector(ura, *src.position, src.phase_model);
  return steering_vector(ura, *src.direction);
}

}  // namespace

std::vector<CsiCapture> simulate_ideal(const std::vector<UraConfig>& uras,
                                       const std::vector<SourceSpec>& sources,
                                       int snapshots, double noise_variance,
                                       std::uint64_t seed,
                                       double snapshot_interval) {
  if (snapshots < 1) throw std::invalid_argument("simulate_ideal: snapshots must be >= 1");
  if (noise_variance < 0.0)
    throw std::invalid_argument("simulate_ideal: negative noise variance");
  check_sources(uras, sources);

  SourceMixer mixer(sources, seed);
  const int ns = static_cast<int>(sources.size());

  std::vector<CsiCapture> captures;
  captures.reserve(uras.size());
  for (size_t a = 0; a < uras.size(); ++a) {
    const auto& ura = uras[a];
    const int m = ura.element_count();
    CMat steering(m, ns);
    for (int l = 0; l < ns; ++l) steering.col(l) = source_vector(ura, sources[l]);
    CMat amps(ns, snapshots);
    for (int l = 0; l < ns; ++l)
      for (int t = 0; t < snapshots; ++t) amps(l, t) = mixer.amplitude(l, t);

    CsiCapture cap;
    cap.array_id = ura.id;
    cap.ura = ura;
    cap.snapshots = steering * amps;
    for (int t = 0; t < snapshots; ++t)
      for (int e = 0; e < m; ++e)
        cap.snapshots(e, t) +=
            noise_sample(seed, static_cast<int>(a), e, t, noise_variance);
    cap.timestamps.resize(snapshots);
    for (int t = 0; t < snapshots; ++t) cap.timestamps[t] = t * snapshot_interval;
    CaptureTruth truth;
    truth.sources = sources;
    truth.seed = seed;
    truth.noise_variance = noise_variance;
    cap.truth = std::move(truth);
    captures.push_back(std::move(cap));
  }
  return captures;
}

SessionCapture simulate_switched(const std::vector<UraConfig>& uras,
                                 const std::vector<SourceSpec>& sources,
                                 const HardwareImpairments& impairments,
                                 const CaptureSchedule& schedule,
                                 std::uint64_t seed, bool cross_array) {
  check_sources(uras, sources);
  for (const auto& ura : uras) schedule.validate(ura.element_count());

  SourceMixer mixer(sources, seed);
  const int ns = static_cast<int>(sources.size());
  const int per_array_packets = schedule.total_packets();
  const double dt = schedule.packet_interval;
  const double sigma2 = impairments.noise_variance;

  SessionCapture session;
  for (size_t a = 0; a < uras.size(); ++a) {
    const auto& ura = uras[a];
    const int m = ura.element_count();
    const double carrier = 299792458.0 / ura.wavelength;
    CMat steering(m, ns);
    for (int l = 0; l < ns; ++l) steering.col(l) = source_vector(ura, sources[l]);

    CsiCapture cap;
    cap.array_id = ura.id;
    cap.ura = ura;
    cap.schedule = schedule;
    cap.snapshots = CMat::Zero(m, per_array_packets);
    cap.timestamps.resize(per_array_packets);
    cap.column_group.resize(per_array_packets);

    for (int slot = 0; slot < static_cast<int>(schedule.order.size()); ++slot) {
      const int gidx = schedule.order[slot];
      const auto& group = schedule.groups[gidx];
      for (int p = 0; p < schedule.packets_per_group; ++p) {
        const int col = slot * schedule.packets_per_group + p;
        const int global = static_cast<int>(a) * per_array_packets + col;
        const double t = global * dt;
        cap.timestamps[col] = t;
        cap.column_group[col] = gidx;
        const cplx cfo = std::polar(1.0, -2.0 * kPi * impairments.cfo_hz * t);
        for (int e : group.elements) {
          cplx signal = 0.0;
          for (int l = 0; l < ns; ++l)
            signal += steering(e, l) * mixer.amplitude(l, global);
          const double hw = impairments.static_phase(static_cast<int>(a), e,
                                                     ura.chain_of(e), carrier);
          cap.snapshots(e, col) =
              cfo * std::polar(1.0, hw) * signal +
              noise_sample(seed, static_cast<int>(a), e, global, sigma2);
        }
      }
    }
    CaptureTruth truth;
    truth.sources = sources;
    truth.impairments = impairments;
    truth.seed = seed;
    truth.noise_variance = sigma2;
    cap.truth = std::move(truth);
    session.arrays.push_back(std::move(cap));
  }

  if (cross_array && uras.size() >= 2) {
    // One synchronized window per secondary array, appended after all
    // per-array schedules; both reference elements ride in each packet.
    int window = 0;
    for (size_t b = 1; b < uras.size(); ++b, ++window) {
      CrossArrayCapture cross;
      cross.array_a = 0;
      cross.array_b = static_cast<int>(b);
      cross.element_a = 0;
      cross.element_b = 0;
      const int packets = schedule.packets_per_group;
      cross.values_a.resize(packets);
      cross.values_b.resize(packets);
      cross.timestamps.resize(packets);
      const int base = static_cast<int>(uras.size()) * per_array_packets +
                       window * packets;
      for (int p = 0; p < packets; ++p) {
        const int global = base + p;
        const double t = global * dt;
        cross.timestamps[p] = t;
        const cplx cfo = std::polar(1.0, -2.0 * kPi * impairments.cfo_hz * t);
        auto sample = [&](int array_index, int element) {
          const auto& ura = uras[array_index];
          const double carrier = 299792458.0 / ura.wavelength;
          cplx signal = 0.0;
          for (int l = 0; l < ns; ++l)
            signal += source_vector(ura, sources[l])(element) *
                      mixer.amplitude(l, global);
          const double hw = impairments.static_phase(
              array_index, element, ura.chain_of(element), carrier);
          return cfo * std::polar(1.0, hw) * signal +
                 noise_sample(seed, 0x1000 + array_index, element, global, sigma2);
        };
        cross.values_a(p) = sample(0, cross.element_a);
        cross.values_b(p) = sample(static_cast<int>(b), cross.element_b);
      }
      session.cross.push_back(std::move(cross));
    }
  }
  return session;
}

double inter_array_phase(const Vec3& c1, const Vec3& c2, const Vec3& p,
                         double wavelength) {
  double r1 = (p - c1).norm();
  double r2 = (p - c2).norm();
  if (r1 < 1e-12 || r2 < 1e-12)
    throw std::invalid_argument("inter_array_phase: point coincides with an array center");
  return 2.0 * kPi * (r1 - r2) / wavelength;
}

}  // namespace arrayloc
