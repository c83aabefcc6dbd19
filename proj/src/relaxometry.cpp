#include "spiralir/relaxometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spiralir {

namespace {

SignalEvolution ir_spgr_recursion(const TrajectorySchedule& schedule, const TissueParams& tissue,
                                  double inv_efficiency, bool emit_mz) {
  if (tissue.t1_ms <= 0) throw std::invalid_argument("simulate_ir_spgr: t1_ms must be positive");
  if (tissue.m0 <= 0) throw std::invalid_argument("simulate_ir_spgr: m0 must be positive");
  if (inv_efficiency <= 0 || inv_efficiency > 1)
    throw std::invalid_argument("simulate_ir_spgr: inv_efficiency must be in (0, 1]");

  const double flip = schedule.params.flip_deg * kPi / 180.0;
  const double sin_a = std::sin(flip), cos_a = std::cos(flip);

  SignalEvolution out;
  out.times_ms.reserve(schedule.entries.size());
  out.values.reserve(schedule.entries.size());

  double mz = tissue.m0;
  double t = 0.0;
  std::size_t next_inv = 0;
  auto relax_to = [&](double t_next) {
    const double dt = t_next - t;
    if (dt > 0) mz = tissue.m0 + (mz - tissue.m0) * std::exp(-dt / tissue.t1_ms);
    t = t_next;
  };
  for (const auto& e : schedule.entries) {
    while (next_inv < schedule.inversion_times_ms.size() &&
           schedule.inversion_times_ms[next_inv] <= e.time_ms) {
      relax_to(schedule.inversion_times_ms[next_inv]);
      mz = -inv_efficiency * mz;
      ++next_inv;
    }
    relax_to(e.time_ms);
    out.times_ms.push_back(e.time_ms);
    out.values.push_back(emit_mz ? mz : mz * sin_a);
    mz *= cos_a;
  }
  return out;
}

}  // namespace

SignalEvolution simulate_ir_spgr(const TrajectorySchedule& schedule, const TissueParams& tissue,
                                 double inv_efficiency) {
  return ir_spgr_recursion(schedule, tissue, inv_efficiency, false);
}

SignalEvolution simulate_ir_spgr_mz(const TrajectorySchedule& schedule,
                                    const TissueParams& tissue, double inv_efficiency) {
  return ir_spgr_recursion(schedule, tissue, inv_efficiency, true);
}

double steady_state_spgr(double t1_ms, double tr_ms, double flip_deg) {
  if (t1_ms <= 0 || tr_ms <= 0 || flip_deg <= 0)
    throw std::invalid_argument("steady_state_spgr: arguments must be positive");
  const double e1 = std::exp(-tr_ms / t1_ms);
  const double a = flip_deg * kPi / 180.0;
  return std::sin(a) * (1.0 - e1) / (1.0 - e1 * std::cos(a));
}

SignalEvolution bin_average(const SignalEvolution& s, int binning) {
  if (binning < 1) throw std::invalid_argument("bin_average: binning must be >= 1");
  if (s.values.size() % binning != 0)
    throw std::invalid_argument("bin_average: readout count not divisible by binning");
  SignalEvolution out;
  const std::size_t n = s.values.size() / binning;
  out.times_ms.resize(n);
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double ts = 0, vs = 0;
    for (int j = 0; j < binning; ++j) {
      ts += s.times_ms[i * binning + j];
      vs += s.values[i * binning + j];
    }
    out.times_ms[i] = ts / binning;
    out.values[i] = vs / binning;
  }
  return out;
}

std::optional<double> first_zero_crossing(const SignalEvolution& s) {
  for (std::size_t i = 1; i < s.values.size(); ++i) {
    const double a = s.values[i - 1], b = s.values[i];
    if (a == 0.0) return s.times_ms[i - 1];
    if ((a < 0) != (b < 0)) {
      const double f = a / (a - b);
      return s.times_ms[i - 1] + f * (s.times_ms[i] - s.times_ms[i - 1]);
    }
  }
  return std::nullopt;
}

Dictionary build_dictionary(const TrajectorySchedule& schedule,
                            const std::vector<double>& t1_grid_ms, int frame_binning,
                            double inv_efficiency) {
  if (t1_grid_ms.empty()) throw std::invalid_argument("build_dictionary: empty T1 grid");
  for (std::size_t i = 1; i < t1_grid_ms.size(); ++i)
    if (t1_grid_ms[i] <= t1_grid_ms[i - 1])
      throw std::invalid_argument("build_dictionary: T1 grid must be strictly increasing");
  if (schedule.entries.size() % frame_binning != 0)
    throw std::invalid_argument("build_dictionary: schedule length not divisible by binning");

  Dictionary dict;
  dict.t1_grid_ms = t1_grid_ms;
  dict.atom_len = static_cast<int>(schedule.entries.size()) / frame_binning;
  dict.atoms.resize(t1_grid_ms.size() * static_cast<std::size_t>(dict.atom_len));
  dict.schedule_hash = schedule_hash(schedule);

  parallel_for(static_cast<int>(t1_grid_ms.size()), [&](int i) {
    const auto sig = bin_average(
        simulate_ir_spgr(schedule, TissueParams{t1_grid_ms[i], 1.0}, inv_efficiency),
        frame_binning);
    double norm = 0;
    for (double v : sig.values) norm += v * v;
    norm = std::sqrt(norm);
    if (norm <= 0) throw std::runtime_error("build_dictionary: zero-norm atom");
    double* a = dict.atoms.data() + static_cast<std::size_t>(i) * dict.atom_len;
    for (int k = 0; k < dict.atom_len; ++k) a[k] = sig.values[k] / norm;
  });
  return dict;
}

Dictionary fold_blocks(const Dictionary& dict, int n_blocks) {
  if (n_blocks < 1 || dict.atom_len % n_blocks != 0)
    throw std::invalid_argument("fold_blocks: atom length not divisible by block count");
  Dictionary out;
  out.t1_grid_ms = dict.t1_grid_ms;
  out.atom_len = dict.atom_len / n_blocks;
  out.atoms.resize(dict.t1_grid_ms.size() * static_cast<std::size_t>(out.atom_len));
  out.schedule_hash = splitmix64(dict.schedule_hash ^ fnv1a64("folded") ^ n_blocks);
  for (int i = 0; i < out.n_atoms(); ++i) {
    const double* src = dict.atom(i);
    double* dst = out.atoms.data() + static_cast<std::size_t>(i) * out.atom_len;
    for (int k = 0; k < out.atom_len; ++k) {
      double s = 0;
      for (int b = 0; b < n_blocks; ++b) s += src[b * out.atom_len + k];
      dst[k] = s / n_blocks;
    }
    double norm = 0;
    for (int k = 0; k < out.atom_len; ++k) norm += dst[k] * dst[k];
    norm = std::sqrt(norm);
    if (norm <= 0) throw std::runtime_error("fold_blocks: zero-norm folded atom");
    for (int k = 0; k < out.atom_len; ++k) dst[k] /= norm;
  }
  return out;
}

namespace {

template <typename Scalar>
MatchResult match_impl(std::span<const Scalar> signal, const Dictionary& dict) {
  if (static_cast<int>(signal.size()) != dict.atom_len)
    throw std::invalid_argument("match_fingerprint: signal length != atom length");
  double norm2 = 0;
  for (const auto& v : signal) norm2 += std::norm(cplx(v));
  MatchResult r;
  if (norm2 <= 0) return r;  // flagged invalid, correlation 0
  const double norm = std::sqrt(norm2);
  double best = -1.0;
  int best_i = 0;
  double best_scale = 0;
  for (int i = 0; i < dict.n_atoms(); ++i) {
    const double* a = dict.atom(i);
    cplx dot = 0;
    for (int k = 0; k < dict.atom_len; ++k) dot += cplx(signal[k]) * a[k];
    const double mag = std::abs(dot);
    if (mag > best + 1e-15 * norm) {  // strict improvement keeps ties at smaller T1
      best = mag;
      best_i = i;
      best_scale = mag;
    }
  }
  r.t1_ms = dict.t1_grid_ms[best_i];
  r.scale = best_scale;
  r.correlation = std::min(1.0, best / norm);
  r.valid = true;
  return r;
}

}  // namespace

MatchResult match_fingerprint(std::span<const double> signal, const Dictionary& dict) {
  return match_impl(signal, dict);
}

MatchResult match_fingerprint(std::span<const cplx> signal, const Dictionary& dict) {
  return match_impl(signal, dict);
}

namespace {

// Linear LS for (A, B) at fixed T1*; returns sum of squared residuals.
bool solve_ab(std::span<const double> ti, std::span<const double> s, double t1_star, double& a,
              double& b, double& rss) {
  const std::size_t n = ti.size();
  double s11 = static_cast<double>(n), s12 = 0, s22 = 0, y1 = 0, y2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = -std::exp(-ti[i] / t1_star);
    s12 += e;
    s22 += e * e;
    y1 += s[i];
    y2 += e * s[i];
  }
  const double det = s11 * s22 - s12 * s12;
  if (std::abs(det) < 1e-12 * s11 * std::max(s22, 1e-300)) return false;
  a = (s22 * y1 - s12 * y2) / det;
  b = (s11 * y2 - s12 * y1) / det;
  rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pred = a - b * std::exp(-ti[i] / t1_star);
    rss += (s[i] - pred) * (s[i] - pred);
  }
  return true;
}

}  // namespace

ThreeParamFit fit_three_param(std::span<const double> ti_ms, std::span<const double> s) {
  if (ti_ms.size() != s.size() || ti_ms.size() < 3)
    throw std::invalid_argument("fit_three_param: need >= 3 (TI, S) pairs");
  const double ti_min = *std::min_element(ti_ms.begin(), ti_ms.end());
  const double ti_max = *std::max_element(ti_ms.begin(), ti_ms.end());
  if (ti_max - ti_min < 1e-9)
    throw std::invalid_argument("fit_three_param: degenerate design, all TIs equal");

  const double lo = std::max(1e-3, ti_min > 0 ? ti_min / 10.0 : ti_max / 1e4);
  const double hi = ti_max * 10.0;
  const int n_grid = 96;

  ThreeParamFit best;
  best.residual = std::numeric_limits<double>::infinity();
  auto eval = [&](double t1s) {
    double a, b, rss;
    if (!solve_ab(ti_ms, s, t1s, a, b, rss)) return std::numeric_limits<double>::infinity();
    if (rss < best.residual) {
      best = {a, b, t1s, rss, true};
    }
    return rss;
  };
  for (int i = 0; i < n_grid; ++i) {
    const double t1s = lo * std::pow(hi / lo, i / static_cast<double>(n_grid - 1));
    eval(t1s);
  }
  // Golden-section refinement on log T1* around the grid winner.
  const double step = std::pow(hi / lo, 1.0 / (n_grid - 1));
  double xl = std::log(std::max(lo, best.t1_star_ms / step));
  double xr = std::log(std::min(hi, best.t1_star_ms * step));
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = xr - gr * (xr - xl), x2 = xl + gr * (xr - xl);
  double f1 = eval(std::exp(x1)), f2 = eval(std::exp(x2));
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      xr = x2;
      x2 = x1;
      f2 = f1;
      x1 = xr - gr * (xr - xl);
      f1 = eval(std::exp(x1));
    } else {
      xl = x1;
      x1 = x2;
      f1 = f2;
      x2 = xl + gr * (xr - xl);
      f2 = eval(std::exp(x2));
    }
  }

  // Unidentifiable T1*: no visible decay component.
  double smax = 0;
  for (double v : s) smax = std::max(smax, std::abs(v));
  if (std::abs(best.b) < 1e-6 * std::max(smax, 1e-300)) best.ok = false;
  return best;
}

std::optional<double> look_locker_correct(double a, double b, double t1_star_ms) {
  if (a <= 0) throw std::invalid_argument("look_locker_correct: A must be positive");
  const double ratio = b / a;
  if (ratio <= 1.0) return std::nullopt;
  return t1_star_ms * (ratio - 1.0);
}

std::vector<double> restore_polarity_magnitude(std::span<const double> ti_ms,
                                               std::span<const double> magnitudes) {
  if (ti_ms.size() != magnitudes.size() || ti_ms.empty())
    throw std::invalid_argument("restore_polarity_magnitude: shape mismatch");
  // Assumes samples ordered by TI. Try negating each prefix (IR signal is
  // negative before its zero crossing) and keep the best-fitting restoration.
  std::vector<std::size_t> order(ti_ms.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ti_ms[a] < ti_ms[b]; });

  std::vector<double> best_values(magnitudes.begin(), magnitudes.end());
  double best_rss = std::numeric_limits<double>::infinity();
  for (std::size_t flip = 0; flip <= order.size(); ++flip) {
    std::vector<double> cand(magnitudes.begin(), magnitudes.end());
    for (std::size_t i = 0; i < flip; ++i) cand[order[i]] = -cand[order[i]];
    const auto fit = fit_three_param(ti_ms, cand);
    if (fit.residual < best_rss) {
      best_rss = fit.residual;
      best_values = std::move(cand);
    }
  }
  return best_values;
}

namespace {

template <typename Scalar>
T1Map map_impl(int n_frames, int h, int w, const Scalar* series, const Dictionary& dict,
               double bg_threshold) {
  if (n_frames != dict.atom_len)
    throw std::invalid_argument("map_t1_image: frame count != atom length");
  const std::size_t npx = static_cast<std::size_t>(h) * w;
  T1Map map;
  map.h = h;
  map.w = w;
  map.t1_ms.assign(npx, 0.0);
  map.correlation.assign(npx, 0.0);
  map.scale.assign(npx, 0.0);
  map.valid.assign(npx, 0);

  std::vector<double> norms(npx, 0.0);
  for (int f = 0; f < n_frames; ++f)
    for (std::size_t p = 0; p < npx; ++p)
      norms[p] += std::norm(cplx(series[static_cast<std::size_t>(f) * npx + p]));
  double max_norm = 0;
  for (double v : norms) max_norm = std::max(max_norm, v);
  const double thresh2 = bg_threshold * bg_threshold * max_norm;

  parallel_for(static_cast<int>(npx), [&](int p) {
    if (norms[p] <= thresh2 || norms[p] <= 0) return;
    std::vector<Scalar> sig(n_frames);
    for (int f = 0; f < n_frames; ++f) sig[f] = series[static_cast<std::size_t>(f) * npx + p];
    const auto r = match_fingerprint(std::span<const Scalar>(sig), dict);
    map.t1_ms[p] = r.t1_ms;
    map.correlation[p] = r.correlation;
    map.scale[p] = r.scale;
    map.valid[p] = r.valid ? 1 : 0;
  });
  return map;
}

}  // namespace

T1Map map_t1_image(const FrameStack& series, const Dictionary& dict, double bg_threshold) {
  return map_impl(series.n, series.h, series.w, series.v.data(), dict, bg_threshold);
}

T1Map map_t1_image(int n_frames, int h, int w, std::span<const double> series,
                   const Dictionary& dict, double bg_threshold) {
  if (series.size() != static_cast<std::size_t>(n_frames) * h * w)
    throw std::invalid_argument("map_t1_image: series size mismatch");
  return map_impl(n_frames, h, w, series.data(), dict, bg_threshold);
}

std::vector<double> default_t1_grid() {
  std::vector<double> g;
  for (double t = 100; t <= 3000 + 1e-9; t += 10) g.push_back(t);
  return g;
}

std::vector<double> vial_t1_grid() {
  std::vector<double> g;
  for (double t = 10; t < 100 - 1e-9; t += 2) g.push_back(t);
  for (double t = 100; t < 300 - 1e-9; t += 5) g.push_back(t);
  for (double t = 300; t <= 3000 + 1e-9; t += 10) g.push_back(t);
  return g;
}

}  // namespace spiralir
