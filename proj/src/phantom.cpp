#include "spiralir/phantom.hpp"

#include <cmath>
#include <stdexcept>

namespace spiralir {

void VialPhantomSpec::validate() const {
  if (grid <= 0) throw std::invalid_argument("VialPhantomSpec: grid must be positive");
  for (const auto& v : vials) {
    if (v.radius <= 0 || v.t1_ms <= 0)
      throw std::invalid_argument("VialPhantomSpec: vial radius and t1 must be positive");
  }
  for (std::size_t i = 0; i < vials.size(); ++i)
    for (std::size_t j = i + 1; j < vials.size(); ++j) {
      const double d = std::hypot(vials[i].cx - vials[j].cx, vials[i].cy - vials[j].cy);
      if (d < vials[i].radius + vials[j].radius)
        throw std::invalid_argument("VialPhantomSpec: vials overlap");
    }
}

void CardiacPhantomSpec::validate() const {
  if (grid <= 0) throw std::invalid_argument("CardiacPhantomSpec: grid must be positive");
  if (endo_rx >= epi_rx || endo_ry >= epi_ry)
    throw std::invalid_argument("CardiacPhantomSpec: endocardium must lie inside epicardium");
  if (contraction < 0 || contraction >= 1)
    throw std::invalid_argument("CardiacPhantomSpec: contraction must be in [0, 1)");
  if (cardiac_freq_hz <= 0 || resp_freq_hz <= 0 || cardiac_freq_hz <= resp_freq_hz)
    throw std::invalid_argument("CardiacPhantomSpec: need cardiac_freq > resp_freq > 0");
  if (t1_myocardium_ms <= 0 || t1_blood_ms <= 0 || t1_background_ms <= 0 || m0 <= 0)
    throw std::invalid_argument("CardiacPhantomSpec: tissue parameters must be positive");
  // Full systole must not collapse the endocardium.
  if (endo_rx * (1.0 - contraction) <= 0)
    throw std::invalid_argument("CardiacPhantomSpec: contraction collapses the endocardium");
}

std::pair<std::vector<double>, std::vector<double>> motion_waveforms(
    std::span<const double> frame_times_ms, const CardiacPhantomSpec& spec) {
  for (std::size_t i = 1; i < frame_times_ms.size(); ++i)
    if (frame_times_ms[i] <= frame_times_ms[i - 1])
      throw std::invalid_argument("motion_waveforms: times must be increasing");
  std::vector<double> cardiac(frame_times_ms.size()), resp(frame_times_ms.size());
  for (std::size_t i = 0; i < frame_times_ms.size(); ++i) {
    const double t_s = frame_times_ms[i] * 1e-3;
    cardiac[i] = std::sin(2.0 * kPi * spec.cardiac_freq_hz * t_s);
    resp[i] = std::sin(2.0 * kPi * spec.resp_freq_hz * t_s);
  }
  return {std::move(cardiac), std::move(resp)};
}

namespace {

constexpr int kSupersample = 4;

inline bool inside_ellipse(double x, double y, double cx, double cy, double rx, double ry) {
  const double dx = (x - cx) / rx, dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

// Rasterize by assigning each subsample to exactly one tissue (last hit wins),
// so fractions form a partition of unity per pixel.
template <typename Classify>
std::vector<Grid<double>> rasterize(int grid, int n_tissues, Classify&& classify) {
  std::vector<Grid<double>> frac(n_tissues, Grid<double>(grid, grid, 0.0));
  const double inv = 1.0 / kSupersample;
  const double weight = inv * inv;
  for (int y = 0; y < grid; ++y)
    for (int x = 0; x < grid; ++x)
      for (int sy = 0; sy < kSupersample; ++sy)
        for (int sx = 0; sx < kSupersample; ++sx) {
          const double px = x + (sx + 0.5) * inv;
          const double py = y + (sy + 0.5) * inv;
          frac[classify(px, py)].at(y, x) += weight;
        }
  return frac;
}

}  // namespace

std::vector<Grid<double>> render_fractions(const CardiacPhantomSpec& spec, double cardiac_phase,
                                           double resp_phase) {
  spec.validate();
  const double endo_scale = 1.0 - spec.contraction * (cardiac_phase + 1.0) / 2.0;
  if (endo_scale <= 0) throw std::invalid_argument("render_fractions: endocardium collapsed");
  const double dy = spec.resp_amp_px * resp_phase;
  const double cy = spec.heart_cy + dy;
  return rasterize(spec.grid, 4, [&](double px, double py) -> int {
    if (inside_ellipse(px, py, spec.heart_cx, cy, spec.endo_rx * endo_scale,
                       spec.endo_ry * endo_scale))
      return 3;  // blood pool
    if (inside_ellipse(px, py, spec.heart_cx, cy, spec.epi_rx, spec.epi_ry)) return 2;
    if (inside_ellipse(px, py, spec.grid / 2.0, spec.grid / 2.0, spec.torso_rx, spec.torso_ry))
      return 1;
    return 0;
  });
}

std::vector<Grid<double>> render_fractions(const VialPhantomSpec& spec) {
  spec.validate();
  const int n = static_cast<int>(spec.vials.size());
  return rasterize(spec.grid, n + 1, [&](double px, double py) -> int {
    for (int i = 0; i < n; ++i) {
      const auto& v = spec.vials[i];
      const double dx = px - v.cx, dyy = py - v.cy;
      if (dx * dx + dyy * dyy <= v.radius * v.radius) return i + 1;
    }
    return 0;
  });
}

Grid<cplx> render_frame(const CardiacPhantomSpec& spec, double cardiac_phase, double resp_phase,
                        std::span<const double> tissue_amplitudes) {
  if (tissue_amplitudes.size() != 3)
    throw std::invalid_argument("render_frame: expected {background, myocardium, blood} amplitudes");
  const auto frac = render_fractions(spec, cardiac_phase, resp_phase);
  Grid<cplx> img(spec.grid, spec.grid);
  for (std::size_t p = 0; p < img.size(); ++p) {
    double v = 0;
    for (int t = 0; t < 3; ++t) v += frac[t + 1].v[p] * tissue_amplitudes[t];
    img.v[p] = cplx(v, 0.0);
  }
  return img;
}

namespace {

std::vector<double> bin_center_times(const TrajectorySchedule& schedule, int binning) {
  if (binning < 1 || schedule.entries.size() % binning != 0)
    throw std::invalid_argument("generate_ground_truth: schedule length not divisible by binning");
  const std::size_t n = schedule.entries.size() / binning;
  std::vector<double> t(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < binning; ++j) t[i] += schedule.entries[i * binning + j].time_ms;
    t[i] /= binning;
  }
  return t;
}

Grid<double> label_map(const std::vector<Grid<double>>& frac, std::span<const double> t1_by_tissue) {
  const int h = frac[0].h, w = frac[0].w;
  Grid<double> t1(h, w, 0.0);
  for (std::size_t p = 0; p < t1.size(); ++p) {
    int best = 0;
    double best_f = frac[0].v[p];
    for (std::size_t t = 1; t < frac.size(); ++t)
      if (frac[t].v[p] > best_f) {
        best_f = frac[t].v[p];
        best = static_cast<int>(t);
      }
    t1.v[p] = best == 0 ? 0.0 : t1_by_tissue[best - 1];
  }
  return t1;
}

}  // namespace

GroundTruth generate_ground_truth(const CardiacPhantomSpec& spec,
                                  const TrajectorySchedule& schedule, int binning,
                                  double inv_efficiency) {
  spec.validate();
  const auto times = bin_center_times(schedule, binning);
  const int n = static_cast<int>(times.size());

  const double t1s[] = {spec.t1_background_ms, spec.t1_myocardium_ms, spec.t1_blood_ms};
  std::vector<std::vector<double>> amp(3);
  for (int t = 0; t < 3; ++t)
    amp[t] = bin_average(simulate_ir_spgr(schedule, TissueParams{t1s[t], spec.m0}, inv_efficiency),
                         binning)
                 .values;

  GroundTruth gt;
  gt.frame_times_ms = times;
  auto [cardiac, resp] = motion_waveforms(times, spec);
  gt.cardiac_signal = std::move(cardiac);
  gt.resp_signal = std::move(resp);
  gt.frames = FrameStack(n, spec.grid, spec.grid);
  parallel_for(n, [&](int i) {
    const double a[] = {amp[0][i], amp[1][i], amp[2][i]};
    const auto img = render_frame(spec, gt.cardiac_signal[i], gt.resp_signal[i], a);
    std::copy(img.v.begin(), img.v.end(), gt.frames.frame(i));
  });
  gt.t1_map = label_map(render_fractions(spec, -1.0, 0.0), t1s);
  return gt;
}

GroundTruth generate_ground_truth(const VialPhantomSpec& spec, const TrajectorySchedule& schedule,
                                  int binning, double inv_efficiency) {
  spec.validate();
  const auto times = bin_center_times(schedule, binning);
  const int n = static_cast<int>(times.size());
  const auto frac = render_fractions(spec);
  const int n_vials = static_cast<int>(spec.vials.size());

  std::vector<std::vector<double>> amp(n_vials);
  std::vector<double> t1s(n_vials);
  parallel_for(n_vials, [&](int t) {
    t1s[t] = spec.vials[t].t1_ms;
    amp[t] = bin_average(
                 simulate_ir_spgr(schedule, TissueParams{spec.vials[t].t1_ms, spec.vial_m0},
                                  inv_efficiency),
                 binning)
                 .values;
  });

  GroundTruth gt;
  gt.frame_times_ms = times;
  gt.cardiac_signal.assign(n, 0.0);
  gt.resp_signal.assign(n, 0.0);
  gt.frames = FrameStack(n, spec.grid, spec.grid);
  parallel_for(n, [&](int i) {
    cplx* f = gt.frames.frame(i);
    for (std::size_t p = 0; p < gt.frames.frame_size(); ++p) {
      double v = frac[0].v[p] * spec.background_m0;
      for (int t = 0; t < n_vials; ++t) v += frac[t + 1].v[p] * amp[t][i];
      f[p] = cplx(v, 0.0);
    }
  });
  gt.t1_map = label_map(frac, t1s);
  return gt;
}

VialPhantomSpec default_vial_phantom(int grid) {
  VialPhantomSpec spec;
  spec.grid = grid;
  const double scale = grid / 64.0;
  const double c = grid / 2.0;
  const double t1_lo = 22.0, t1_hi = 2480.0;
  const double ratio = std::pow(t1_hi / t1_lo, 1.0 / 13.0);
  int k = 0;
  // Inner ring of 6, outer ring of 8.
  for (int i = 0; i < 6; ++i, ++k) {
    const double a = 2.0 * kPi * i / 6.0;
    spec.vials.push_back({c + 12.0 * scale * std::cos(a), c + 12.0 * scale * std::sin(a),
                          4.0 * scale, t1_lo * std::pow(ratio, k)});
  }
  for (int i = 0; i < 8; ++i, ++k) {
    const double a = 2.0 * kPi * (i + 0.5) / 8.0;
    spec.vials.push_back({c + 22.5 * scale * std::cos(a), c + 22.5 * scale * std::sin(a),
                          4.0 * scale, t1_lo * std::pow(ratio, k)});
  }
  return spec;
}

}  // namespace spiralir
