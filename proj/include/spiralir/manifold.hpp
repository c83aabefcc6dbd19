#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "spiralir/common.hpp"
#include "spiralir/encoding.hpp"
#include "spiralir/nn.hpp"
#include "spiralir/trajectory.hpp"

namespace spiralir {

// Per-frame generator input [respiratory, cardiac, contrast].
struct LatentCode {
  std::vector<std::array<double, 3>> z;

  std::size_t size() const { return z.size(); }
  void validate() const;
};

// Eight weight layers: a dense map from the latent vector to a 4x4 seed
// feature map, then 3x3 convolutions with nearest-neighbor upsampling to the
// target matrix; leaky-ReLU hidden activations and a final 2-channel tanh.
// Channel widths are searched so the parameter count lands on
// param_multiple * matrix^2 within +/-20%.
struct GeneratorConfig {
  int matrix = 64;
  int latent_dim = 3;
  std::vector<nn::LayerDef> defs;
  std::size_t param_count = 0;

  static GeneratorConfig make(int matrix, int latent_dim = 3, double param_multiple = 15.0);
};

struct TrainConfig {
  double lambda1 = -1.0;  // < 0 selects the auto-balanced default
  int batch = 20;
  int epochs = 500;
  double lr = 1e-4;
  double sigma_probe = 0.1;
  std::uint64_t seed = 0;
  int threads = 0;
  bool verbose = false;
};

// Everything needed to continue training deterministically.
struct TrainState {
  nn::Network<float> net;
  nn::AdamState<float> adam;
  int epoch = 0;
  double lambda1 = -1.0;
  double data_scale = 1.0;
};

struct TrainResult {
  TrainState state;
  std::vector<double> data_loss;  // per-epoch mean data term per frame
  std::vector<double> reg_loss;   // per-epoch mean Jacobian surrogate per frame
  bool aborted = false;
};

// Saturation-normalized time since the most recent inversion: a sawtooth
// min(1, dt / block_duration) resetting at each inversion pulse. Throws for
// frames before the first inversion.
std::vector<double> contrast_signal(const TrajectorySchedule& schedule,
                                    std::span<const double> frame_times_ms);

// Measurement pre-normalization so the underlying image magnitude sits inside
// the tanh range (~0.75 peak); returns 1 for all-zero measurements.
double compute_data_scale(const KSpaceSeries& series, const CoilMaps& coils);

namespace detail {

template <typename T>
struct CoilsSoA {
  int n_coils = 0, h = 0, w = 0;
  std::vector<T> re, im;  // coil-major planes
};

template <typename T>
CoilsSoA<T> coils_soa(const CoilMaps& coils) {
  CoilsSoA<T> out;
  out.n_coils = coils.n_coils;
  out.h = coils.h;
  out.w = coils.w;
  out.re.resize(coils.v.size());
  out.im.resize(coils.v.size());
  for (std::size_t p = 0; p < coils.v.size(); ++p) {
    out.re[p] = static_cast<T>(coils.v[p].real());
    out.im[p] = static_cast<T>(coils.v[p].imag());
  }
  return out;
}

// Data term ||A(G(z)) - b||^2 plus, when eta is given, the latent-perturbation
// Jacobian surrogate ||G(z + sigma*eta) - G(z)||^2 / sigma^2. Gradients
// accumulate into `grad`; returns data_loss + lambda1 * reg_loss.
template <typename T>
double frame_loss_grad(const nn::Network<T>& net, const std::array<double, 3>& z,
                       std::span<const std::array<double, 2>> coords, const T* b_re,
                       const T* b_im, const CoilsSoA<T>& coils, double lambda1, double sigma,
                       const std::array<double, 3>* eta, std::vector<T>& grad,
                       double& data_loss_out, double& reg_loss_out) {
  const int h = coils.h, w = coils.w;
  const std::size_t npx = static_cast<std::size_t>(h) * w;
  const int ns = static_cast<int>(coords.size());

  nn::Tensor<T> zin(nn::Shape{3, 1, 1});
  for (int k = 0; k < 3; ++k) zin.v[k] = static_cast<T>(z[k]);
  nn::Cache<T> cache;
  const auto out = nn::forward_pass(net, zin, &cache);
  const T* xre = out.plane(0);
  const T* xim = out.plane(1);

  const auto tb = nudft_tables<T>(coords, h, w);
  std::vector<T> gre(npx), gim(npx), pre(ns), pim(ns), sre(npx), sim(npx);
  std::vector<T> dire(npx, T{}), diim(npx, T{});
  double dloss = 0;
  for (int c = 0; c < coils.n_coils; ++c) {
    const T* cre = coils.re.data() + c * npx;
    const T* cim = coils.im.data() + c * npx;
    for (std::size_t p = 0; p < npx; ++p) {
      gre[p] = cre[p] * xre[p] - cim[p] * xim[p];
      gim[p] = cre[p] * xim[p] + cim[p] * xre[p];
    }
    nudft_forward_plane(tb, gre.data(), gim.data(), pre.data(), pim.data());
    const T* br = b_re + static_cast<std::size_t>(c) * ns;
    const T* bi = b_im + static_cast<std::size_t>(c) * ns;
    for (int j = 0; j < ns; ++j) {
      pre[j] -= br[j];
      pim[j] -= bi[j];
      dloss += static_cast<double>(pre[j]) * pre[j] + static_cast<double>(pim[j]) * pim[j];
    }
    std::fill(sre.begin(), sre.end(), T{});
    std::fill(sim.begin(), sim.end(), T{});
    nudft_adjoint_plane(tb, pre.data(), pim.data(), sre.data(), sim.data());
    for (std::size_t p = 0; p < npx; ++p) {
      dire[p] += cre[p] * sre[p] + cim[p] * sim[p];
      diim[p] += cre[p] * sim[p] - cim[p] * sre[p];
    }
  }
  nn::Tensor<T> dout(out.shape);
  for (std::size_t p = 0; p < npx; ++p) {
    dout.plane(0)[p] = T{2} * dire[p];
    dout.plane(1)[p] = T{2} * diim[p];
  }

  double rloss = 0;
  if (eta != nullptr && sigma > 0) {
    nn::Tensor<T> zin2(nn::Shape{3, 1, 1});
    for (int k = 0; k < 3; ++k) zin2.v[k] = static_cast<T>(z[k] + sigma * (*eta)[k]);
    nn::Cache<T> cache2;
    const auto out2 = nn::forward_pass(net, zin2, &cache2);
    const T coef = static_cast<T>(lambda1 * 2.0 / (sigma * sigma));
    nn::Tensor<T> dout2(out.shape);
    for (std::size_t i = 0; i < out.v.size(); ++i) {
      const T d = out2.v[i] - out.v[i];
      rloss += static_cast<double>(d) * d;
      dout2.v[i] = coef * d;
      dout.v[i] -= coef * d;
    }
    rloss /= sigma * sigma;
    nn::backward_pass(net, cache2, dout2, grad);
  }
  nn::backward_pass(net, cache, dout, grad);

  data_loss_out = dloss;
  reg_loss_out = rloss;
  return dloss + lambda1 * rloss;
}

}  // namespace detail

// Minimize sum_i ||A_i(G(z_i)) - b_i||^2 + lambda1 * R_J(theta) over randomly
// re-partitioned frame batches. Latents are never updated. Pass `resume` to
// continue a run; per-epoch seeding makes the continued trajectory identical
// to an uninterrupted one.
TrainResult train_generator(const KSpaceSeries& series, const CoilMaps& coils,
                            const LatentCode& latents, const GeneratorConfig& cfg,
                            const TrainConfig& tcfg, const TrainState* resume = nullptr);

FrameStack generate_frames(const nn::Network<float>& net, const LatentCode& latents);

// Latent excitations of the trained generator.
FrameStack excite_contrast_only(const nn::Network<float>& net, double resp, double cardiac,
                                std::span<const double> contrast_sweep);
FrameStack excite_cine(const nn::Network<float>& net, double resp, double contrast,
                       std::span<const double> cardiac_sweep);

// Summed data term and gradient over the given frames at fixed parameters.
double data_term_gradient(const nn::Network<float>& net, const KSpaceSeries& series,
                          const CoilMaps& coils, const LatentCode& latents,
                          std::span<const int> frame_ids, double data_scale,
                          std::vector<double>& grad_out);

}  // namespace spiralir
