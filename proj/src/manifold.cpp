#include "spiralir/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace spiralir {

void LatentCode::validate() const {
  for (const auto& zi : z) {
    for (double v : zi)
      if (!std::isfinite(v)) throw std::invalid_argument("LatentCode: non-finite component");
    if (zi[2] < 0.0 || zi[2] > 1.0)
      throw std::invalid_argument("LatentCode: contrast component outside [0, 1]");
  }
}

GeneratorConfig GeneratorConfig::make(int matrix, int latent_dim, double param_multiple) {
  if (matrix < 8 || matrix % 4 != 0 || ((matrix / 4) & (matrix / 4 - 1)) != 0)
    throw std::invalid_argument("GeneratorConfig: matrix must be 4 * 2^k with k >= 1");
  const int n_up = static_cast<int>(std::lround(std::log2(matrix / 4.0)));
  const double target = param_multiple * static_cast<double>(matrix) * matrix;

  // Width pattern tapers toward full resolution to keep the large convolution
  // layers cheap; a scalar multiplier is searched to land on the target.
  const double pattern[7] = {4.0, 3.0, 2.0, 1.0, 0.75, 0.75, 0.75};
  auto widths_for = [&](double alpha) {
    std::array<int, 7> c{};
    for (int i = 0; i < 7; ++i) c[i] = std::max(2, static_cast<int>(std::lround(alpha * pattern[i])));
    return c;
  };
  auto params_for = [&](const std::array<int, 7>& c) {
    std::size_t p = 3u * c[0] * 16 + c[0] * 16;  // dense to the 4x4 seed map
    int prev = c[0];
    for (int i = 1; i < 7; ++i) {
      p += 9u * prev * c[i] + c[i];
      prev = c[i];
    }
    p += 9u * prev * 2 + 2;  // final 2-channel conv
    return p;
  };

  double best_alpha = 1.0;
  double best_err = 1e300;
  for (int s = 0; s < 600; ++s) {
    const double alpha = 0.5 * std::pow(1.02, s);
    const double p = static_cast<double>(params_for(widths_for(alpha)));
    const double err = std::abs(std::log(p / target));
    if (err < best_err) {
      best_err = err;
      best_alpha = alpha;
    }
  }
  const auto c = widths_for(best_alpha);

  GeneratorConfig cfg;
  cfg.matrix = matrix;
  cfg.latent_dim = latent_dim;
  using nn::LayerDef;
  using nn::Op;
  cfg.defs.push_back({Op::Dense, {c[0], 4, 4}});
  cfg.defs.push_back({Op::LeakyRelu, {}});
  for (int i = 1; i < 7; ++i) {
    if (i <= n_up) cfg.defs.push_back({Op::Upsample2, {}});
    cfg.defs.push_back({Op::Conv3x3, {c[i], 0, 0}});
    cfg.defs.push_back({Op::LeakyRelu, {}});
  }
  cfg.defs.push_back({Op::Conv3x3, {2, 0, 0}});
  cfg.defs.push_back({Op::Tanh, {}});
  cfg.param_count = params_for(c);

  if (std::abs(cfg.param_count / target - 1.0) > 0.20)
    throw std::runtime_error("GeneratorConfig: could not reach the parameter-count target");
  return cfg;
}

std::vector<double> contrast_signal(const TrajectorySchedule& schedule,
                                    std::span<const double> frame_times_ms) {
  if (schedule.inversion_times_ms.empty())
    throw std::invalid_argument("contrast_signal: schedule has no inversions");
  const double t_sat = schedule.params.block_duration_ms();
  std::vector<double> c(frame_times_ms.size());
  for (std::size_t i = 0; i < frame_times_ms.size(); ++i) {
    const double t = frame_times_ms[i];
    auto it = std::upper_bound(schedule.inversion_times_ms.begin(),
                               schedule.inversion_times_ms.end(), t);
    if (it == schedule.inversion_times_ms.begin())
      throw std::invalid_argument("contrast_signal: frame precedes the first inversion");
    const double dt = t - *std::prev(it);
    c[i] = std::min(1.0, dt / t_sat);
  }
  return c;
}

double compute_data_scale(const KSpaceSeries& series, const CoilMaps& coils) {
  if (series.frames.empty()) throw std::invalid_argument("compute_data_scale: empty series");
  const int n = static_cast<int>(series.frames.size());
  const int stride = std::max(1, n / 16);
  double peak = 0;
  for (int i = 0; i < n; i += stride) {
    const auto img = dcf_adjoint_image(series.frames[i], coils);
    for (const auto& p : img.v) peak = std::max(peak, std::abs(p));
  }
  return peak > 0 ? 0.75 / peak : 1.0;
}

namespace {

struct FrameMeasurements {
  std::vector<float> b_re, b_im;  // scaled, coil-major
};

nn::Network<float> init_generator(const GeneratorConfig& cfg, std::uint64_t seed) {
  auto net = nn::init_network<float>(cfg.defs, {cfg.latent_dim, 1, 1}, seed);
  if (net.output_shape().c != 2 || net.output_shape().h != cfg.matrix ||
      net.output_shape().w != cfg.matrix)
    throw std::logic_error("train_generator: generator output shape mismatch");
  return net;
}

}  // namespace

TrainResult train_generator(const KSpaceSeries& series, const CoilMaps& coils,
                            const LatentCode& latents, const GeneratorConfig& cfg,
                            const TrainConfig& tcfg, const TrainState* resume) {
  const int n_frames = static_cast<int>(series.frames.size());
  if (static_cast<int>(latents.size()) != n_frames)
    throw std::invalid_argument("train_generator: latent count != frame count");
  latents.validate();
  if (coils.h != cfg.matrix || coils.w != cfg.matrix)
    throw std::invalid_argument("train_generator: coil maps do not match the matrix size");

  TrainResult result;
  TrainState& st = result.state;
  if (resume) {
    st = *resume;
  } else {
    st.net = init_generator(cfg, derive_seed(tcfg.seed, "gen-init"));
    st.data_scale = compute_data_scale(series, coils);
    st.lambda1 = tcfg.lambda1;
    st.epoch = 0;
  }

  const auto coilsf = detail::coils_soa<float>(coils);
  std::vector<FrameMeasurements> meas(n_frames);
  for (int i = 0; i < n_frames; ++i) {
    const auto& f = series.frames[i];
    meas[i].b_re.resize(f.data.size());
    meas[i].b_im.resize(f.data.size());
    for (std::size_t j = 0; j < f.data.size(); ++j) {
      meas[i].b_re[j] = static_cast<float>(f.data[j].real() * st.data_scale);
      meas[i].b_im[j] = static_cast<float>(f.data[j].imag() * st.data_scale);
    }
  }

  auto params = st.net.get_params();
  const std::size_t np = params.size();

  // Auto-balance the regularization weight from the losses at initialization.
  if (st.lambda1 < 0) {
    std::vector<double> d(n_frames, 0.0), r(n_frames, 0.0);
    std::mt19937_64 rng(derive_seed(tcfg.seed, "gen-lambda"));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::array<double, 3>> etas(n_frames);
    for (auto& e : etas) e = {gauss(rng), gauss(rng), gauss(rng)};
    parallel_for(
        n_frames,
        [&](int i) {
          std::vector<float> scratch;
          detail::frame_loss_grad<float>(st.net, latents.z[i], series.frames[i].coords,
                                         meas[i].b_re.data(), meas[i].b_im.data(), coilsf, 0.0,
                                         tcfg.sigma_probe, &etas[i], scratch, d[i], r[i]);
        },
        tcfg.threads);
    double d0 = 0, r0 = 0;
    for (int i = 0; i < n_frames; ++i) {
      d0 += d[i];
      r0 += r[i];
    }
    st.lambda1 = 1e-3 * d0 / std::max(r0, 1e-12);
  }

  std::vector<int> order(n_frames);
  std::iota(order.begin(), order.end(), 0);
  std::vector<float> params_good = params;
  auto adam_good = st.adam;

  const int target_epochs = tcfg.epochs;
  while (st.epoch < target_epochs) {
    std::mt19937_64 rng(derive_seed(tcfg.seed, "gen-epoch", st.epoch));
    // The permutation must be a pure function of the epoch seed so a resumed
    // run replays the exact partition sequence.
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::normal_distribution<double> gauss(0.0, 1.0);

    double epoch_data = 0, epoch_reg = 0;
    for (int start = 0; start < n_frames; start += tcfg.batch) {
      const int bsz = std::min(tcfg.batch, n_frames - start);
      std::vector<std::array<double, 3>> etas(bsz);
      for (auto& e : etas) e = {gauss(rng), gauss(rng), gauss(rng)};

      std::vector<std::vector<float>> fgrads(bsz);
      std::vector<double> fdata(bsz, 0.0), freg(bsz, 0.0);
      parallel_for(
          bsz,
          [&](int j) {
            const int i = order[start + j];
            fgrads[j].assign(np, 0.f);
            detail::frame_loss_grad<float>(st.net, latents.z[i], series.frames[i].coords,
                                           meas[i].b_re.data(), meas[i].b_im.data(), coilsf,
                                           st.lambda1, tcfg.sigma_probe, &etas[j], fgrads[j],
                                           fdata[j], freg[j]);
          },
          tcfg.threads);

      // Ordered double-precision reduction keeps the update independent of the
      // thread schedule.
      std::vector<double> gsum(np, 0.0);
      for (int j = 0; j < bsz; ++j) {
        for (std::size_t k = 0; k < np; ++k) gsum[k] += fgrads[j][k];
        epoch_data += fdata[j];
        epoch_reg += freg[j];
      }
      std::vector<float> gmean(np);
      for (std::size_t k = 0; k < np; ++k) gmean[k] = static_cast<float>(gsum[k] / bsz);
      nn::adam_step<float>(params, gmean, st.adam, tcfg.lr);
      st.net.set_params(params);
    }

    const double mean_data = epoch_data / n_frames;
    const double mean_reg = epoch_reg / n_frames;
    if (!std::isfinite(mean_data) || !std::isfinite(mean_reg)) {
      params = params_good;
      st.adam = adam_good;
      st.net.set_params(params);
      result.aborted = true;
      std::fprintf(stderr,
                   "train_generator: non-finite loss at epoch %d, restored last-good state\n",
                   st.epoch);
      break;
    }
    result.data_loss.push_back(mean_data);
    result.reg_loss.push_back(mean_reg);
    params_good = params;
    adam_good = st.adam;
    st.epoch += 1;
    if (tcfg.verbose &&
        (st.epoch == 1 || st.epoch == target_epochs ||
         st.epoch % std::max(1, target_epochs / 20) == 0))
      std::fprintf(stderr, "  epoch %4d/%d  data %.6e  reg %.6e\n", st.epoch, target_epochs,
                   mean_data, mean_reg);
  }
  return result;
}

FrameStack generate_frames(const nn::Network<float>& net, const LatentCode& latents) {
  const auto out_shape = net.output_shape();
  if (out_shape.c != 2) throw std::invalid_argument("generate_frames: expected 2 output channels");
  FrameStack stack(static_cast<int>(latents.size()), out_shape.h, out_shape.w);
  parallel_for(static_cast<int>(latents.size()), [&](int i) {
    nn::Tensor<float> zin(nn::Shape{3, 1, 1});
    for (int k = 0; k < 3; ++k) zin.v[k] = static_cast<float>(latents.z[i][k]);
    const auto out = nn::forward_pass(net, zin);
    cplx* f = stack.frame(i);
    const float* re = out.plane(0);
    const float* im = out.plane(1);
    for (std::size_t p = 0; p < stack.frame_size(); ++p) f[p] = cplx(re[p], im[p]);
  });
  return stack;
}

FrameStack excite_contrast_only(const nn::Network<float>& net, double resp, double cardiac,
                                std::span<const double> contrast_sweep) {
  LatentCode code;
  code.z.reserve(contrast_sweep.size());
  double prev = -1;
  for (double c : contrast_sweep) {
    if (c < 0 || c > 1)
      throw std::invalid_argument("excite_contrast_only: contrast values must lie in [0, 1]");
    if (c < prev)
      throw std::invalid_argument("excite_contrast_only: contrast sweep must be non-decreasing");
    prev = c;
    code.z.push_back({resp, cardiac, c});
  }
  return generate_frames(net, code);
}

FrameStack excite_cine(const nn::Network<float>& net, double resp, double contrast,
                       std::span<const double> cardiac_sweep) {
  if (contrast < 0 || contrast > 1)
    throw std::invalid_argument("excite_cine: contrast must lie in [0, 1]");
  LatentCode code;
  code.z.reserve(cardiac_sweep.size());
  for (double c : cardiac_sweep) code.z.push_back({resp, c, contrast});
  return generate_frames(net, code);
}

double data_term_gradient(const nn::Network<float>& net, const KSpaceSeries& series,
                          const CoilMaps& coils, const LatentCode& latents,
                          std::span<const int> frame_ids, double data_scale,
                          std::vector<double>& grad_out) {
  const auto coilsf = detail::coils_soa<float>(coils);
  grad_out.assign(net.param_count(), 0.0);
  double loss = 0;
  for (const int i : frame_ids) {
    const auto& f = series.frames[i];
    std::vector<float> bre(f.data.size()), bim(f.data.size());
    for (std::size_t j = 0; j < f.data.size(); ++j) {
      bre[j] = static_cast<float>(f.data[j].real() * data_scale);
      bim[j] = static_cast<float>(f.data[j].imag() * data_scale);
    }
    std::vector<float> g(net.param_count(), 0.f);
    double dl = 0, rl = 0;
    detail::frame_loss_grad<float>(net, latents.z[i], f.coords, bre.data(), bim.data(), coilsf,
                                   0.0, 0.0, nullptr, g, dl, rl);
    for (std::size_t k = 0; k < g.size(); ++k) grad_out[k] += g[k];
    loss += dl;
  }
  return loss;
}

}  // namespace spiralir
