#include "spiralir/motion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace spiralir {

std::vector<std::vector<double>> contrast_basis(const TrajectorySchedule& schedule, int binning,
                                                int n_t1) {
  if (n_t1 < 1) throw std::invalid_argument("contrast_basis: need at least one T1 column");
  std::vector<std::vector<double>> basis;
  for (int q = 0; q < n_t1; ++q) {
    const double t1 = 80.0 * std::pow(3000.0 / 80.0, q / std::max(1.0, n_t1 - 1.0));
    basis.push_back(
        bin_average(simulate_ir_spgr(schedule, TissueParams{t1, 1.0}), binning).values);
  }
  basis.emplace_back(basis.front().size(), 1.0);
  return basis;
}

std::vector<std::vector<double>> detrend_navigators(
    const std::vector<std::vector<double>>& navigators,
    const std::vector<std::vector<double>>& basis) {
  if (navigators.empty()) throw std::invalid_argument("detrend_navigators: empty input");
  const int n = static_cast<int>(navigators.size());
  const std::size_t dim = navigators[0].size();
  const int q = static_cast<int>(basis.size());
  for (const auto& col : basis)
    if (static_cast<int>(col.size()) != n)
      throw std::invalid_argument("detrend_navigators: basis length != frame count");

  // The T1-atom columns are nearly collinear, so orthonormalize by modified
  // Gram-Schmidt with re-orthogonalization and drop negligible directions.
  std::vector<std::vector<double>> ortho;
  double first_norm = 0;
  for (int a = 0; a < q; ++a) {
    std::vector<double> v = basis[a];
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : ortho) {
        double d = 0;
        for (int i = 0; i < n; ++i) d += u[i] * v[i];
        for (int i = 0; i < n; ++i) v[i] -= d * u[i];
      }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (a == 0) first_norm = norm;
    if (norm > 1e-10 * std::max(first_norm, 1.0)) {
      for (double& x : v) x /= norm;
      ortho.push_back(std::move(v));
    }
  }
  if (ortho.empty()) throw std::runtime_error("detrend_navigators: degenerate basis");

  auto out = navigators;
  for (std::size_t k = 0; k < dim; ++k) {
    double pre = 0;
    for (int i = 0; i < n; ++i) pre += navigators[i][k] * navigators[i][k];
    pre = std::sqrt(pre / n);
    for (const auto& u : ortho) {
      double d = 0;
      for (int i = 0; i < n; ++i) d += u[i] * out[i][k];
      for (int i = 0; i < n; ++i) out[i][k] -= d * u[i];
    }
    double m = 0;
    for (int i = 0; i < n; ++i) m += out[i][k];
    m /= n;
    double var = 0;
    for (int i = 0; i < n; ++i) var += (out[i][k] - m) * (out[i][k] - m);
    const double sd = std::sqrt(var / n);
    // Components that were essentially pure contrast collapse to zero rather
    // than having rounding noise amplified by the z-score.
    const bool keep = sd > 1e-12 && sd > 1e-7 * pre;
    for (int i = 0; i < n; ++i) out[i][k] = keep ? (out[i][k] - m) / sd : 0.0;
  }
  return out;
}

VAEModel train_vae(const std::vector<std::vector<double>>& navigators, const VaeConfig& config,
                   std::uint64_t seed, const std::vector<std::vector<double>>& conditions) {
  if (navigators.size() < 100)
    throw std::invalid_argument("train_vae: need at least 100 frames");
  const int n = static_cast<int>(navigators.size());
  const int dim = static_cast<int>(navigators[0].size());
  const int d = config.latent_dim;
  const int nc = conditions.empty() ? 0 : static_cast<int>(conditions[0].size());
  if (!conditions.empty() && conditions.size() != navigators.size())
    throw std::invalid_argument("train_vae: condition count != frame count");

  VAEModel model;
  model.config = config;
  model.cond_dim = nc;
  {
    using nn::LayerDef;
    using nn::Op;
    const LayerDef enc_defs[] = {
        {Op::Dense, {config.hidden, 1, 1}}, {Op::Relu, {}},
        {Op::Dense, {config.hidden, 1, 1}}, {Op::Relu, {}},
        {Op::Dense, {2 * d, 1, 1}},
    };
    const LayerDef dec_defs[] = {
        {Op::Dense, {config.hidden, 1, 1}}, {Op::Relu, {}},
        {Op::Dense, {config.hidden, 1, 1}}, {Op::Relu, {}},
        {Op::Dense, {dim, 1, 1}},
    };
    model.encoder =
        nn::init_network<float>(enc_defs, {dim + nc, 1, 1}, derive_seed(seed, "vae-enc"));
    model.decoder =
        nn::init_network<float>(dec_defs, {d + nc, 1, 1}, derive_seed(seed, "vae-dec"));
  }

  std::vector<std::vector<float>> data(n, std::vector<float>(dim));
  std::vector<std::vector<float>> cond(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < dim; ++k) data[i][k] = static_cast<float>(navigators[i][k]);
    if (nc > 0) cond[i].assign(conditions[i].begin(), conditions[i].end());
  }

  auto enc_params = model.encoder.get_params();
  auto dec_params = model.decoder.get_params();
  nn::AdamState<float> enc_adam, dec_adam;
  std::vector<float> enc_grad, dec_grad;
  std::vector<float> eps(static_cast<std::size_t>(config.batch) * d);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  const int warm_epochs = std::max(1, static_cast<int>(config.epochs * config.warmup_frac));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(seed, "vae-epoch", epoch));
    std::shuffle(order.begin(), order.end(), rng);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double beta =
        config.beta * std::min(1.0, (epoch + 1) / static_cast<double>(warm_epochs));

    double recon_sum = 0, kl_sum = 0;
    for (int start = 0; start < n; start += config.batch) {
      const int bsz = std::min(config.batch, n - start);
      for (int j = 0; j < bsz * d; ++j) eps[j] = static_cast<float>(gauss(rng));
      enc_grad.assign(enc_params.size(), 0.f);
      dec_grad.assign(dec_params.size(), 0.f);
      for (int j = 0; j < bsz; ++j) {
        const int i = order[start + j];
        double recon, kl;
        vae_loss_grad<float>(model.encoder, model.decoder, data[i], cond[i],
                             std::span<const float>(eps.data() + static_cast<std::size_t>(j) * d,
                                                    d),
                             beta, enc_grad, dec_grad, &recon, &kl);
        recon_sum += recon;
        kl_sum += kl;
      }
      const float inv = 1.0f / bsz;
      for (auto& g : enc_grad) g *= inv;
      for (auto& g : dec_grad) g *= inv;
      nn::adam_step<float>(enc_params, enc_grad, enc_adam, config.lr);
      nn::adam_step<float>(dec_params, dec_grad, dec_adam, config.lr);
      model.encoder.set_params(enc_params);
      model.decoder.set_params(dec_params);
    }
    model.final_recon = recon_sum / n;
    model.final_kl = kl_sum / n;
    if (!std::isfinite(model.final_recon) || !std::isfinite(model.final_kl)) {
      std::ostringstream msg;
      msg << "train_vae: non-finite loss at epoch " << epoch << " (recon=" << model.final_recon
          << ", kl=" << model.final_kl << ", lr=" << config.lr << ", beta=" << beta << ")";
      throw std::runtime_error(msg.str());
    }
  }
  return model;
}

std::vector<double> moving_average(std::span<const double> x, int window) {
  if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
  const int n = static_cast<int>(x.size());
  const int half = window / 2;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half), hi = std::min(n - 1, i + half);
    double s = 0;
    for (int j = lo; j <= hi; ++j) s += x[j];
    out[i] = s / (hi - lo + 1);
  }
  return out;
}

double periodogram_peak_hz(std::span<const double> times_ms, std::span<const double> x,
                           double f_lo, double f_hi) {
  if (times_ms.size() != x.size() || x.size() < 4)
    throw std::invalid_argument("periodogram_peak_hz: need matched series of length >= 4");
  double mean = 0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());

  const double df = 0.005;
  double best_f = f_lo, best_p = -1;
  for (double f = f_lo; f <= f_hi + 1e-12; f += df) {
    cplx acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      acc += (x[i] - mean) * std::polar(1.0, -2.0 * kPi * f * times_ms[i] * 1e-3);
    const double p = std::norm(acc);
    if (p > best_p) {
      best_p = p;
      best_f = f;
    }
  }
  return best_f;
}

namespace {

constexpr double kCardiacLo = 0.6, kCardiacHi = 2.5;
constexpr double kRespLo = 0.05, kRespHi = 0.5;

bool in_band(double f, double lo, double hi) { return f >= lo && f <= hi; }

}  // namespace

LatentSignals encode_motion(const VAEModel& model,
                            const std::vector<std::vector<double>>& navigators,
                            std::span<const double> frame_times_ms,
                            const std::vector<std::vector<double>>& conditions) {
  const int n = static_cast<int>(navigators.size());
  if (n == 0 || frame_times_ms.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("encode_motion: navigator/time length mismatch");
  const int nc = model.cond_dim;
  if (nc > 0 && (conditions.size() != navigators.size() ||
                 static_cast<int>(conditions[0].size()) != nc))
    throw std::invalid_argument("encode_motion: conditioning vectors do not match the model");
  const int d = model.config.latent_dim;

  std::vector<std::vector<double>> mu(d, std::vector<double>(n));
  nn::Tensor<float> xin(nn::Shape{static_cast<int>(navigators[0].size()) + nc, 1, 1});
  for (int i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < navigators[i].size(); ++k)
      xin.v[k] = static_cast<float>(navigators[i][k]);
    for (int k = 0; k < nc; ++k)
      xin.v[navigators[i].size() + k] = static_cast<float>(conditions[i][k]);
    const auto stats = nn::forward_pass(model.encoder, xin);
    for (int c = 0; c < d; ++c) mu[c][i] = stats.v[c];
  }
  for (int c = 0; c < d; ++c) mu[c] = moving_average(mu[c], 3);

  std::vector<double> peaks(d);
  for (int c = 0; c < d; ++c) peaks[c] = periodogram_peak_hz(frame_times_ms, mu[c], 0.02, 3.2);

  LatentSignals out;
  int card_ch = -1, resp_ch = -1;
  for (int c = 0; c < d; ++c) {
    if (card_ch < 0 && in_band(peaks[c], kCardiacLo, kCardiacHi)) card_ch = c;
    else if (resp_ch < 0 && in_band(peaks[c], kRespLo, kRespHi)) resp_ch = c;
  }
  if (card_ch >= 0 && resp_ch >= 0) {
    out.labeling_ok = true;
  } else {
    // Fall back to peak-frequency order, flagging the failure.
    card_ch = peaks[0] >= peaks[1] ? 0 : 1;
    resp_ch = 1 - card_ch;
    out.labeling_ok = false;
    std::ostringstream note;
    note << "spectral labeling failed: channel peaks " << peaks[0] << " Hz and " << peaks[1]
         << " Hz do not cover both the cardiac and respiratory bands";
    out.labeling_note = note.str();
  }
  out.cardiac_channel = card_ch;
  out.resp_channel = resp_ch;
  out.cardiac_peak_hz = peaks[card_ch];
  out.resp_peak_hz = peaks[resp_ch];
  out.cardiac = mu[card_ch];
  out.resp = mu[resp_ch];
  zscore(out.cardiac);
  zscore(out.resp);
  return out;
}

AlignResult align_sign_and_scale(std::span<const double> estimate,
                                 std::span<const double> reference) {
  if (estimate.size() != reference.size() || estimate.size() < 2)
    throw std::invalid_argument("align_sign_and_scale: need matched series");
  const int n = static_cast<int>(estimate.size());
  double me = 0, mr = 0;
  for (int i = 0; i < n; ++i) {
    me += estimate[i];
    mr += reference[i];
  }
  me /= n;
  mr /= n;
  double see = 0, ser = 0;
  for (int i = 0; i < n; ++i) {
    see += (estimate[i] - me) * (estimate[i] - me);
    ser += (estimate[i] - me) * (reference[i] - mr);
  }
  if (see <= 1e-24) throw std::invalid_argument("align_sign_and_scale: zero-variance estimate");
  const double a = ser / see;
  const double b = mr - a * me;

  AlignResult res;
  res.aligned.resize(n);
  for (int i = 0; i < n; ++i) res.aligned[i] = a * estimate[i] + b;
  std::vector<double> e(estimate.begin(), estimate.end());
  std::vector<double> r(reference.begin(), reference.end());
  res.abs_pearson = std::abs(pearson(e, r));
  return res;
}

}  // namespace spiralir
