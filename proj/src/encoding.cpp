#include "spiralir/encoding.hpp"

#include "spiralir/nn.hpp"


#include <cmath>
#include <random>
#include <stdexcept>

namespace spiralir {

CoilMaps synthetic_coil_maps(int n_coils, int h, int w) {
  if (n_coils <= 0 || h <= 0 || w <= 0)
    throw std::invalid_argument("synthetic_coil_maps: positive dimensions required");
  CoilMaps maps;
  maps.n_coils = n_coils;
  maps.h = h;
  maps.w = w;
  maps.v.resize(static_cast<std::size_t>(n_coils) * h * w);

  const double cx = w / 2.0, cy = h / 2.0;
  const double ring = 0.55 * std::min(h, w);
  const double sigma = 0.6 * std::min(h, w);
  for (int c = 0; c < n_coils; ++c) {
    const double ang = 2.0 * kPi * c / n_coils;
    const double px = cx + ring * std::cos(ang);
    const double py = cy + ring * std::sin(ang);
    const double ax = 0.35 * std::cos(ang + 0.7), ay = 0.35 * std::sin(ang * 1.3 + 0.4);
    cplx* m = maps.coil(c);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
        const double mag = std::exp(-d2 / (2.0 * sigma * sigma));
        const double phase = (ax * (x - cx) + ay * (y - cy)) / std::min(h, w) + 0.3 * c;
        m[static_cast<std::size_t>(y) * w + x] = std::polar(mag, phase);
      }
  }
  // Sum-of-squares normalization, exact at every pixel.
  for (std::size_t p = 0; p < static_cast<std::size_t>(h) * w; ++p) {
    double sos = 0;
    for (int c = 0; c < n_coils; ++c) sos += std::norm(maps.coil(c)[p]);
    const double inv = 1.0 / std::sqrt(sos);
    for (int c = 0; c < n_coils; ++c) maps.coil(c)[p] *= inv;
  }
  return maps;
}

template <typename T>
NudftTables<T> nudft_tables(std::span<const std::array<double, 2>> coords, int h, int w) {
  NudftTables<T> tb;
  tb.h = h;
  tb.w = w;
  tb.ns = static_cast<int>(coords.size());
  tb.ex_re.resize(static_cast<std::size_t>(tb.ns) * w);
  tb.ex_im.resize(static_cast<std::size_t>(tb.ns) * w);
  tb.ey_re.resize(static_cast<std::size_t>(tb.ns) * h);
  tb.ey_im.resize(static_cast<std::size_t>(tb.ns) * h);
  const int cx = w / 2, cy = h / 2;
  for (int j = 0; j < tb.ns; ++j) {
    const double kx = coords[j][0], ky = coords[j][1];
    const cplx step_x = std::polar(1.0, -2.0 * kPi * kx);
    cplx v = std::polar(1.0, 2.0 * kPi * kx * cx);  // x = 0 term
    T* exr = tb.ex_re.data() + static_cast<std::size_t>(j) * w;
    T* exi = tb.ex_im.data() + static_cast<std::size_t>(j) * w;
    for (int x = 0; x < w; ++x, v *= step_x) {
      exr[x] = static_cast<T>(v.real());
      exi[x] = static_cast<T>(v.imag());
    }
    const cplx step_y = std::polar(1.0, -2.0 * kPi * ky);
    cplx u = std::polar(1.0, 2.0 * kPi * ky * cy);
    T* eyr = tb.ey_re.data() + static_cast<std::size_t>(j) * h;
    T* eyi = tb.ey_im.data() + static_cast<std::size_t>(j) * h;
    for (int y = 0; y < h; ++y, u *= step_y) {
      eyr[y] = static_cast<T>(u.real());
      eyi[y] = static_cast<T>(u.imag());
    }
  }
  return tb;
}

namespace {

// GEMM front end so float and double share the plane-transform code; routed
// through the nn shim so BLAS stays single-threaded under frame parallelism.
template <typename T>
void gemm(bool trans_a, int m, int n, int k, T alpha, const T* a, int lda, const T* b, int ldb,
          T beta, T* c, int ldc) {
  nn::detail::gemm_rm(trans_a, false, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace

// Factored evaluation: an (ns x w) X-phase contraction against the image rows,
// then a per-sample contraction along y. The inner products run as GEMMs.
template <typename T>
void nudft_forward_plane(const NudftTables<T>& tb, const T* g_re, const T* g_im, T* out_re,
                         T* out_im) {
  const int h = tb.h, w = tb.w, ns = tb.ns;
  // t(j, y) = sum_x ex(j, x) * g(y, x): four real GEMMs (ns x w) * (w x h).
  std::vector<T> t_re(static_cast<std::size_t>(ns) * h), t_im(t_re.size());
  std::vector<T> gt_re(static_cast<std::size_t>(w) * h), gt_im(gt_re.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      gt_re[static_cast<std::size_t>(x) * h + y] = g_re[static_cast<std::size_t>(y) * w + x];
      gt_im[static_cast<std::size_t>(x) * h + y] = g_im[static_cast<std::size_t>(y) * w + x];
    }
  gemm(false, ns, h, w, T{1}, tb.ex_re.data(), w, gt_re.data(), h, T{0}, t_re.data(), h);
  gemm(false, ns, h, w, T{-1}, tb.ex_im.data(), w, gt_im.data(), h, T{1}, t_re.data(), h);
  gemm(false, ns, h, w, T{1}, tb.ex_re.data(), w, gt_im.data(), h, T{0}, t_im.data(), h);
  gemm(false, ns, h, w, T{1}, tb.ex_im.data(), w, gt_re.data(), h, T{1}, t_im.data(), h);

  for (int j = 0; j < ns; ++j) {
    const T* tr = t_re.data() + static_cast<std::size_t>(j) * h;
    const T* ti = t_im.data() + static_cast<std::size_t>(j) * h;
    const T* eyr = tb.ey_re.data() + static_cast<std::size_t>(j) * h;
    const T* eyi = tb.ey_im.data() + static_cast<std::size_t>(j) * h;
    T acc_re = 0, acc_im = 0;
    for (int y = 0; y < h; ++y) {
      acc_re += tr[y] * eyr[y] - ti[y] * eyi[y];
      acc_im += tr[y] * eyi[y] + ti[y] * eyr[y];
    }
    out_re[j] = acc_re;
    out_im[j] = acc_im;
  }
}

template <typename T>
void nudft_adjoint_plane(const NudftTables<T>& tb, const T* d_re, const T* d_im, T* g_re,
                         T* g_im) {
  const int h = tb.h, w = tb.w, ns = tb.ns;
  // w(j, y) = conj(ey(j, y)) * d(j), then g(y, x) += sum_j w(j, y) conj(ex(j, x)).
  std::vector<T> w_re(static_cast<std::size_t>(ns) * h), w_im(w_re.size());
  for (int j = 0; j < ns; ++j) {
    const T* eyr = tb.ey_re.data() + static_cast<std::size_t>(j) * h;
    const T* eyi = tb.ey_im.data() + static_cast<std::size_t>(j) * h;
    T* wr = w_re.data() + static_cast<std::size_t>(j) * h;
    T* wi = w_im.data() + static_cast<std::size_t>(j) * h;
    const T dr = d_re[j], di = d_im[j];
    for (int y = 0; y < h; ++y) {
      wr[y] = dr * eyr[y] + di * eyi[y];
      wi[y] = di * eyr[y] - dr * eyi[y];
    }
  }
  // Accumulate (h x w) += (ns x h)^T * (ns x w) combinations.
  std::vector<T> acc(static_cast<std::size_t>(h) * w, T{});
  gemm(true, h, w, ns, T{1}, w_re.data(), h, tb.ex_re.data(), w, T{0}, acc.data(), w);
  gemm(true, h, w, ns, T{1}, w_im.data(), h, tb.ex_im.data(), w, T{1}, acc.data(), w);
  for (std::size_t p = 0; p < acc.size(); ++p) g_re[p] += acc[p];
  gemm(true, h, w, ns, T{1}, w_im.data(), h, tb.ex_re.data(), w, T{0}, acc.data(), w);
  gemm(true, h, w, ns, T{-1}, w_re.data(), h, tb.ex_im.data(), w, T{1}, acc.data(), w);
  for (std::size_t p = 0; p < acc.size(); ++p) g_im[p] += acc[p];
}

template struct NudftTables<float>;
template struct NudftTables<double>;
template NudftTables<float> nudft_tables<float>(std::span<const std::array<double, 2>>, int, int);
template NudftTables<double> nudft_tables<double>(std::span<const std::array<double, 2>>, int,
                                                  int);
template void nudft_forward_plane<float>(const NudftTables<float>&, const float*, const float*,
                                         float*, float*);
template void nudft_forward_plane<double>(const NudftTables<double>&, const double*, const double*,
                                          double*, double*);
template void nudft_adjoint_plane<float>(const NudftTables<float>&, const float*, const float*,
                                         float*, float*);
template void nudft_adjoint_plane<double>(const NudftTables<double>&, const double*, const double*,
                                          double*, double*);

namespace {

void split(std::span<const cplx> in, std::vector<double>& re, std::vector<double>& im) {
  re.resize(in.size());
  im.resize(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    re[i] = in[i].real();
    im[i] = in[i].imag();
  }
}

}  // namespace

void nudft_forward(std::span<const cplx> image, std::span<const std::array<double, 2>> coords,
                   const CoilMaps& coils, std::span<cplx> out_data) {
  const std::size_t npx = static_cast<std::size_t>(coils.h) * coils.w;
  if (image.size() != npx) throw std::invalid_argument("nudft_forward: image/coil shape mismatch");
  if (out_data.size() != coords.size() * coils.n_coils)
    throw std::invalid_argument("nudft_forward: output size mismatch");
  const auto tb = nudft_tables<double>(coords, coils.h, coils.w);
  std::vector<double> gre(npx), gim(npx), ore(coords.size()), oim(coords.size());
  for (int c = 0; c < coils.n_coils; ++c) {
    const cplx* cm = coils.coil(c);
    for (std::size_t p = 0; p < npx; ++p) {
      const cplx g = cm[p] * image[p];
      gre[p] = g.real();
      gim[p] = g.imag();
    }
    nudft_forward_plane(tb, gre.data(), gim.data(), ore.data(), oim.data());
    for (std::size_t j = 0; j < coords.size(); ++j)
      out_data[static_cast<std::size_t>(c) * coords.size() + j] = cplx(ore[j], oim[j]);
  }
}

void nudft_adjoint(std::span<const cplx> data, std::span<const std::array<double, 2>> coords,
                   const CoilMaps& coils, std::span<cplx> out_image) {
  const std::size_t npx = static_cast<std::size_t>(coils.h) * coils.w;
  if (out_image.size() != npx) throw std::invalid_argument("nudft_adjoint: image size mismatch");
  if (data.size() != coords.size() * coils.n_coils)
    throw std::invalid_argument("nudft_adjoint: data size mismatch");
  const auto tb = nudft_tables<double>(coords, coils.h, coils.w);
  std::vector<double> dre(coords.size()), dim(coords.size()), gre(npx), gim(npx);
  for (std::size_t p = 0; p < npx; ++p) out_image[p] = 0;
  for (int c = 0; c < coils.n_coils; ++c) {
    for (std::size_t j = 0; j < coords.size(); ++j) {
      const cplx d = data[static_cast<std::size_t>(c) * coords.size() + j];
      dre[j] = d.real();
      dim[j] = d.imag();
    }
    std::fill(gre.begin(), gre.end(), 0.0);
    std::fill(gim.begin(), gim.end(), 0.0);
    nudft_adjoint_plane(tb, dre.data(), dim.data(), gre.data(), gim.data());
    const cplx* cm = coils.coil(c);
    for (std::size_t p = 0; p < npx; ++p)
      out_image[p] += std::conj(cm[p]) * cplx(gre[p], gim[p]);
  }
}

BinnedTrajectory bin_trajectory(const TrajectorySchedule& schedule, const SpiralGeometry& geom,
                                int binning) {
  if (binning < 1 || schedule.entries.size() % binning != 0)
    throw std::invalid_argument("bin_trajectory: schedule length not divisible by binning");
  const auto base = generate_archimedean_spiral(schedule.params.samples_per_interleaf,
                                                geom.n_turns, geom.k_max);
  BinnedTrajectory out;
  const std::size_t n_frames = schedule.entries.size() / binning;
  out.frame_coords.resize(n_frames);
  out.frame_times_ms.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    auto& coords = out.frame_coords[i];
    coords.reserve(binning * base.samples.size());
    double t = 0;
    for (int j = 0; j < binning; ++j) {
      const auto& e = schedule.entries[i * binning + j];
      const auto rot = rotated(base, e.rotation_deg);
      coords.insert(coords.end(), rot.samples.begin(), rot.samples.end());
      t += e.time_ms;
    }
    out.frame_times_ms[i] = t / binning;
  }
  return out;
}

KSpaceSeries simulate_acquisition(const GroundTruth& truth, const TrajectorySchedule& schedule,
                                  const SpiralGeometry& geom, const CoilMaps& coils,
                                  double noise_sigma, std::uint64_t seed) {
  const auto traj = bin_trajectory(schedule, geom,
                                   static_cast<int>(schedule.entries.size() /
                                                    std::max<std::size_t>(1, truth.frames.n)));
  if (static_cast<int>(traj.frame_coords.size()) != truth.frames.n)
    throw std::invalid_argument("simulate_acquisition: binning inconsistent with truth frames");
  if (coils.h != truth.frames.h || coils.w != truth.frames.w)
    throw std::invalid_argument("simulate_acquisition: coil/image shape mismatch");

  KSpaceSeries series;
  series.binning = static_cast<int>(schedule.entries.size() / truth.frames.n);
  series.samples_per_interleaf = schedule.params.samples_per_interleaf;
  series.schedule_hash = schedule_hash(schedule);
  series.frames.resize(truth.frames.n);
  parallel_for(truth.frames.n, [&](int i) {
    KSpaceFrame& f = series.frames[i];
    f.coords = traj.frame_coords[i];
    f.n_coils = coils.n_coils;
    f.frame_time_ms = traj.frame_times_ms[i];
    f.flip_deg = schedule.params.flip_deg;
    f.data.resize(f.coords.size() * coils.n_coils);
    nudft_forward(std::span<const cplx>(truth.frames.frame(i), truth.frames.frame_size()),
                  f.coords, coils, f.data);
  });
  if (noise_sigma > 0) add_complex_noise(series, noise_sigma, seed);
  return series;
}

void add_complex_noise(KSpaceSeries& series, double sigma, std::uint64_t seed) {
  if (sigma < 0) throw std::invalid_argument("add_complex_noise: sigma must be non-negative");
  series.noise_sigma = sigma;
  series.noise_seed = seed;
  if (sigma == 0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (auto& f : series.frames)
    for (auto& d : f.data) d += cplx(gauss(rng), gauss(rng));
}

double series_l2(const KSpaceSeries& series) {
  double s = 0;
  for (const auto& f : series.frames)
    for (const auto& d : f.data) s += std::norm(d);
  return std::sqrt(s);
}

std::size_t series_sample_count(const KSpaceSeries& series) {
  std::size_t n = 0;
  for (const auto& f : series.frames) n += f.data.size();
  return n;
}

double sigma_for_snr_db(const KSpaceSeries& clean, double snr_db) {
  const double norm = series_l2(clean);
  const double n = static_cast<double>(series_sample_count(clean));
  return norm / (std::sqrt(2.0 * n) * std::pow(10.0, snr_db / 20.0));
}

std::vector<double> frame_dcf_weights(const KSpaceFrame& frame) {
  std::vector<double> w(frame.coords.size());
  double k_max = 0;
  for (const auto& c : frame.coords) k_max = std::max(k_max, std::hypot(c[0], c[1]));
  const double floor_r = 0.5 * k_max / std::max<std::size_t>(1, frame.coords.size() / 8);
  double total = 0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    w[j] = std::max(std::hypot(frame.coords[j][0], frame.coords[j][1]), floor_r);
    total += w[j];
  }
  for (auto& x : w) x /= total;
  return w;
}

Grid<cplx> dcf_adjoint_image(const KSpaceFrame& frame, const CoilMaps& coils) {
  const auto w = frame_dcf_weights(frame);
  std::vector<cplx> weighted(frame.data.size());
  for (int c = 0; c < frame.n_coils; ++c)
    for (std::size_t j = 0; j < frame.coords.size(); ++j)
      weighted[static_cast<std::size_t>(c) * frame.coords.size() + j] =
          frame.channel(c)[j] * w[j];

  Grid<cplx> img(coils.h, coils.w);
  nudft_adjoint(weighted, frame.coords, coils, img.v);

  // Calibrate against a centered delta so amplitudes track the image scale.
  std::vector<cplx> delta(static_cast<std::size_t>(coils.h) * coils.w, 0.0);
  delta[static_cast<std::size_t>(coils.h / 2) * coils.w + coils.w / 2] = 1.0;
  std::vector<cplx> db(frame.data.size());
  nudft_forward(delta, frame.coords, coils, db);
  for (std::size_t j = 0; j < db.size(); ++j) db[j] *= w[j % frame.coords.size()];
  std::vector<cplx> dimg(delta.size());
  nudft_adjoint(db, frame.coords, coils, dimg);
  const double cal = std::abs(dimg[static_cast<std::size_t>(coils.h / 2) * coils.w + coils.w / 2]);
  if (cal > 0)
    for (auto& p : img.v) p /= cal;
  return img;
}

std::vector<std::vector<double>> extract_navigator(const KSpaceSeries& series, double radius) {
  if (radius <= 0) throw std::invalid_argument("extract_navigator: radius must be positive");
  if (series.frames.empty()) throw std::invalid_argument("extract_navigator: empty series");
  const int spi = series.samples_per_interleaf;

  // Kept sample indices, identical for every frame since rotations preserve
  // radii; ordered by (interleaf, sample) to match the frame layout.
  std::vector<std::size_t> keep;
  const auto& f0 = series.frames.front();
  for (std::size_t j = 0; j < f0.coords.size(); ++j)
    if (std::hypot(f0.coords[j][0], f0.coords[j][1]) <= radius) keep.push_back(j);
  if (keep.empty())
    throw std::invalid_argument(
        "extract_navigator: no samples within radius; increase the navigator radius");
  (void)spi;

  const int n_frames = static_cast<int>(series.frames.size());
  const std::size_t dim = 2 * keep.size() * f0.n_coils;
  std::vector<std::vector<double>> nav(n_frames, std::vector<double>(dim));
  for (int i = 0; i < n_frames; ++i) {
    const auto& f = series.frames[i];
    if (f.coords.size() != f0.coords.size())
      throw std::invalid_argument("extract_navigator: inconsistent frame sizes");
    std::size_t k = 0;
    for (int c = 0; c < f.n_coils; ++c)
      for (const std::size_t j : keep) {
        const cplx d = f.channel(c)[j];
        nav[i][k++] = d.real();
        nav[i][k++] = d.imag();
      }
  }
  // Z-score per component across frames; flat components go to zero.
  for (std::size_t k = 0; k < dim; ++k) {
    double m = 0;
    for (int i = 0; i < n_frames; ++i) m += nav[i][k];
    m /= n_frames;
    double var = 0;
    for (int i = 0; i < n_frames; ++i) var += (nav[i][k] - m) * (nav[i][k] - m);
    const double sd = std::sqrt(var / n_frames);
    for (int i = 0; i < n_frames; ++i)
      nav[i][k] = sd > 1e-12 ? (nav[i][k] - m) / sd : 0.0;
  }
  return nav;
}

}  // namespace spiralir
