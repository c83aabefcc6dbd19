#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spiralir/common.hpp"
#include "spiralir/nn.hpp"
#include "spiralir/relaxometry.hpp"

namespace spiralir {

struct VaeConfig {
  int hidden = 64;
  int latent_dim = 2;
  double beta = 1e-2;
  int epochs = 400;
  int batch = 64;
  double lr = 1e-3;
  double warmup_frac = 0.2;  // linear KL warmup over this fraction of epochs
};

// Conditional VAE: both halves additionally see a known per-frame conditioning
// vector (the deterministic contrast signal in this pipeline), so the latent
// channels are free to carry motion only. An empty conditioning vector gives
// the plain VAE.
struct VAEModel {
  nn::Network<float> encoder;  // [nav, cond] -> hidden -> hidden -> [mu, logvar]
  nn::Network<float> decoder;  // [latent, cond] -> hidden -> hidden -> nav
  VaeConfig config;
  int cond_dim = 0;
  double final_recon = 0.0;
  double final_kl = 0.0;
};

struct LatentSignals {
  std::vector<double> cardiac, resp;  // z-scored
  double cardiac_peak_hz = 0.0, resp_peak_hz = 0.0;
  int cardiac_channel = -1, resp_channel = -1;
  bool labeling_ok = false;
  std::string labeling_note;
};

struct AlignResult {
  std::vector<double> aligned;
  double abs_pearson = 0.0;
};

// Basis spanning the inversion-recovery contrast sweep on the binned frame
// axis: simulated evolutions at log-spaced T1 values plus a constant column.
// Any static object's navigator is a linear mixture of these.
std::vector<std::vector<double>> contrast_basis(const TrajectorySchedule& schedule, int binning,
                                                int n_t1 = 12);

// Remove the deterministic contrast sweep from navigator vectors by projecting
// each component onto the orthogonal complement of the contrast basis, then
// re-z-scoring. Motion (0.05-2.5 Hz) is nearly orthogonal to the smooth
// per-block recovery curves and survives the projection.
std::vector<std::vector<double>> detrend_navigators(
    const std::vector<std::vector<double>>& navigators,
    const std::vector<std::vector<double>>& basis);

// Reconstruction MSE + beta * KL against a standard normal prior, with the
// reparameterization z = mu + exp(logvar/2) * eps. The conditioning vector is
// appended to both network inputs (may be empty). Gradients accumulate into
// the flat per-network vectors; returns the total loss for this sample.
template <typename T>
double vae_loss_grad(const nn::Network<T>& encoder, const nn::Network<T>& decoder,
                     std::span<const T> x, std::span<const T> cond, std::span<const T> eps,
                     double beta, std::vector<T>& enc_grad, std::vector<T>& dec_grad,
                     double* recon_out, double* kl_out) {
  const int d = static_cast<int>(eps.size());
  const int nc = static_cast<int>(cond.size());
  nn::Tensor<T> xin(nn::Shape{static_cast<int>(x.size()) + nc, 1, 1});
  std::copy(x.begin(), x.end(), xin.v.begin());
  std::copy(cond.begin(), cond.end(), xin.v.begin() + x.size());

  nn::Cache<T> enc_cache;
  const auto stats = nn::forward_pass(encoder, xin, &enc_cache);
  if (static_cast<int>(stats.v.size()) != 2 * d)
    throw std::invalid_argument("vae_loss_grad: encoder must emit 2*latent_dim values");

  nn::Tensor<T> z(nn::Shape{d + nc, 1, 1});
  std::vector<T> sigma(d);
  for (int i = 0; i < d; ++i) {
    sigma[i] = std::exp(stats.v[d + i] / T{2});
    z.v[i] = stats.v[i] + sigma[i] * eps[i];
  }
  std::copy(cond.begin(), cond.end(), z.v.begin() + d);

  nn::Cache<T> dec_cache;
  const auto xhat = nn::forward_pass(decoder, z, &dec_cache);
  if (xhat.v.size() != x.size())
    throw std::invalid_argument("vae_loss_grad: decoder output does not match input length");

  const double inv_n = 1.0 / static_cast<double>(x.size());
  double recon = 0.0;
  nn::Tensor<T> dxhat(xhat.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = static_cast<double>(xhat.v[i]) - static_cast<double>(x[i]);
    recon += r * r * inv_n;
    dxhat.v[i] = static_cast<T>(2.0 * r * inv_n);
  }
  double kl = 0.0;
  for (int i = 0; i < d; ++i) {
    const double mu = stats.v[i], lv = stats.v[d + i];
    kl += 0.5 * (mu * mu + std::exp(lv) - 1.0 - lv);
  }

  const auto dz = nn::backward_pass(decoder, dec_cache, dxhat, dec_grad);
  nn::Tensor<T> dstats(stats.shape);
  for (int i = 0; i < d; ++i) {
    dstats.v[i] = dz.v[i] + static_cast<T>(beta) * stats.v[i];
    dstats.v[d + i] = dz.v[i] * eps[i] * sigma[i] / T{2} +
                      static_cast<T>(beta) * T{0.5} * (std::exp(stats.v[d + i]) - T{1});
  }
  nn::backward_pass(encoder, enc_cache, dstats, enc_grad);

  if (recon_out) *recon_out = recon;
  if (kl_out) *kl_out = kl;
  return recon + beta * kl;
}

// Train on z-scored (typically detrended) navigators, optionally conditioned
// on per-frame known signals. Deterministic given the seed; throws
// std::runtime_error with diagnostics if the loss goes non-finite.
VAEModel train_vae(const std::vector<std::vector<double>>& navigators, const VaeConfig& config,
                   std::uint64_t seed,
                   const std::vector<std::vector<double>>& conditions = {});

// Posterior means per frame, smoothed by a centered 3-frame moving average,
// labeled cardiac/respiratory by dominant spectral peak (cardiac 0.6-2.5 Hz,
// respiratory 0.05-0.5 Hz), then z-scored. When both channels peak in the same
// band the labeling error is reported and channels fall back to peak order.
LatentSignals encode_motion(const VAEModel& model,
                            const std::vector<std::vector<double>>& navigators,
                            std::span<const double> frame_times_ms,
                            const std::vector<std::vector<double>>& conditions = {});

// Least-squares affine map of the estimate onto the reference.
AlignResult align_sign_and_scale(std::span<const double> estimate,
                                 std::span<const double> reference);

std::vector<double> moving_average(std::span<const double> x, int window);

// Non-uniform-time periodogram peak location over [f_lo, f_hi] Hz.
double periodogram_peak_hz(std::span<const double> times_ms, std::span<const double> x,
                           double f_lo, double f_hi);

}  // namespace spiralir
