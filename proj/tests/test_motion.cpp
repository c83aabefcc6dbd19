#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "spiralir/analysis.hpp"
#include "spiralir/encoding.hpp"
#include "spiralir/motion.hpp"
#include "spiralir/manifold.hpp"
#include "spiralir/phantom.hpp"

using namespace spiralir;

namespace {

// Two latent sinusoids through a random linear map, mildly noisy.
std::vector<std::vector<double>> synthetic_navigators(int n, int dim, double noise,
                                                      std::vector<double>* s1 = nullptr,
                                                      std::vector<double>* s2 = nullptr) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> mix(2, std::vector<double>(dim));
  for (auto& row : mix)
    for (auto& v : row) v = g(rng);
  std::vector<std::vector<double>> nav(n, std::vector<double>(dim));
  for (int i = 0; i < n; ++i) {
    const double a = std::sin(2.0 * kPi * 1.2 * i * 0.04);
    const double b = std::sin(2.0 * kPi * 0.25 * i * 0.04);
    if (s1) s1->push_back(a);
    if (s2) s2->push_back(b);
    for (int k = 0; k < dim; ++k)
      nav[i][k] = a * mix[0][k] + b * mix[1][k] + noise * g(rng);
  }
  // z-score per component, as extract_navigator provides.
  for (int k = 0; k < dim; ++k) {
    std::vector<double> col(n);
    for (int i = 0; i < n; ++i) col[i] = nav[i][k];
    zscore(col);
    for (int i = 0; i < n; ++i) nav[i][k] = col[i];
  }
  return nav;
}

}  // namespace

TEST_CASE("vae benchmark: two sinusoids through a random linear map") {
  const auto nav = synthetic_navigators(400, 24, 0.01);
  VaeConfig cfg;
  cfg.epochs = 300;
  const auto model = train_vae(nav, cfg, 11);

  // Decoded reconstruction MSE below 5% of the input variance.
  double var = 0;
  for (const auto& row : nav)
    for (double v : row) var += v * v;
  var /= 400.0 * 24.0;
  CHECK(model.final_recon < 0.05 * var);
}

TEST_CASE("vae determinism and seed sensitivity") {
  const auto nav = synthetic_navigators(160, 12, 0.02);
  VaeConfig cfg;
  cfg.epochs = 40;
  const auto a = train_vae(nav, cfg, 5);
  const auto b = train_vae(nav, cfg, 5);
  const auto c = train_vae(nav, cfg, 6);
  CHECK(a.encoder.get_params() == b.encoder.get_params());
  CHECK(a.decoder.get_params() == b.decoder.get_params());
  CHECK(a.encoder.get_params() != c.encoder.get_params());
}

TEST_CASE("huge beta collapses the posterior means") {
  const auto nav = synthetic_navigators(200, 12, 0.01);
  VaeConfig cfg;
  cfg.epochs = 200;
  cfg.beta = 1e6;
  const auto model = train_vae(nav, cfg, 3);
  nn::Tensor<float> x(nn::Shape{12, 1, 1});
  double mean_norm = 0;
  for (const auto& row : nav) {
    for (int k = 0; k < 12; ++k) x.v[k] = static_cast<float>(row[k]);
    const auto stats = nn::forward_pass(model.encoder, x);
    mean_norm += std::hypot(stats.v[0], stats.v[1]);
  }
  mean_norm /= nav.size();
  CHECK(mean_norm < 0.1);
}

TEST_CASE("constant navigators reach zero reconstruction loss") {
  // z-scored constants are all zeros; the decoder reproduces zeros exactly.
  std::vector<std::vector<double>> nav(120, std::vector<double>(8, 0.0));
  VaeConfig cfg;
  cfg.epochs = 200;
  const auto model = train_vae(nav, cfg, 1);
  CHECK(model.final_recon < 1e-3);
}

TEST_CASE("vae input validation") {
  std::vector<std::vector<double>> too_few(50, std::vector<double>(8, 0.0));
  VaeConfig cfg;
  CHECK_THROWS_AS(train_vae(too_few, cfg, 0), std::invalid_argument);
}

TEST_CASE("vae composite gradient check (double precision)") {
  using nn::LayerDef;
  using nn::Op;
  const int dim = 10, d = 2, nc = 1;
  const LayerDef enc_defs[] = {
      {Op::Dense, {16, 1, 1}}, {Op::Relu, {}}, {Op::Dense, {2 * d, 1, 1}}};
  const LayerDef dec_defs[] = {
      {Op::Dense, {16, 1, 1}}, {Op::Relu, {}}, {Op::Dense, {dim, 1, 1}}};
  auto enc = nn::init_network<double>(enc_defs, {dim + nc, 1, 1}, 21);
  auto dec = nn::init_network<double>(dec_defs, {d + nc, 1, 1}, 22);

  std::mt19937_64 rng(33);
  std::normal_distribution<double> g;
  std::vector<double> x(dim), eps(d), cond(nc);
  for (auto& v : x) v = g(rng);
  for (auto& v : eps) v = g(rng);
  for (auto& v : cond) v = 0.5;
  const double beta = 0.05;

  std::vector<double> enc_grad(enc.param_count(), 0.0), dec_grad(dec.param_count(), 0.0);
  vae_loss_grad<double>(enc, dec, x, cond, eps, beta, enc_grad, dec_grad, nullptr, nullptr);

  auto loss = [&]() {
    std::vector<double> eg(enc.param_count(), 0.0), dg(dec.param_count(), 0.0);
    return vae_loss_grad<double>(enc, dec, x, cond, eps, beta, eg, dg, nullptr, nullptr);
  };
  const double h = 1e-5;
  auto check_net = [&](nn::Network<double>& net, const std::vector<double>& analytic) {
    auto params = net.get_params();
    std::mt19937_64 pick_rng(55);
    std::uniform_int_distribution<std::size_t> pick(0, params.size() - 1);
    for (int c = 0; c < 50; ++c) {
      const std::size_t i = pick(pick_rng);
      const double keep = params[i];
      params[i] = keep + h;
      net.set_params(params);
      const double fp = loss();
      params[i] = keep - h;
      net.set_params(params);
      const double fm = loss();
      params[i] = keep;
      net.set_params(params);
      const double fd = (fp - fm) / (2 * h);
      CHECK(std::abs(fd - analytic[i]) / std::max({std::abs(fd), std::abs(analytic[i]), 1e-8}) <
            1e-4);
    }
  };
  check_net(enc, enc_grad);
  check_net(dec, dec_grad);
}

TEST_CASE("moving average and periodogram helpers") {
  std::vector<double> x{1, 2, 3, 4, 5};
  const auto ma = moving_average(x, 3);
  CHECK(ma[0] == doctest::Approx(1.5));
  CHECK(ma[2] == doctest::Approx(3.0));
  CHECK(ma[4] == doctest::Approx(4.5));

  std::vector<double> t, s;
  for (int i = 0; i < 400; ++i) {
    t.push_back(i * 40.0);
    s.push_back(std::sin(2.0 * kPi * 0.8 * i * 0.04));
  }
  CHECK(periodogram_peak_hz(t, s, 0.05, 3.0) == doctest::Approx(0.8).epsilon(0.02));
}

TEST_CASE("align_sign_and_scale") {
  std::vector<double> ref;
  for (int i = 0; i < 200; ++i) ref.push_back(std::sin(0.1 * i));

  SUBCASE("negated estimate aligns exactly") {
    std::vector<double> est(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) est[i] = -ref[i];
    const auto r = align_sign_and_scale(est, ref);
    CHECK(r.abs_pearson == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < ref.size(); ++i)
      CHECK(r.aligned[i] == doctest::Approx(ref[i]).epsilon(1e-9));
  }
  SUBCASE("affine transform is invisible") {
    std::vector<double> est(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) est[i] = 3.0 * ref[i] + 5.0;
    CHECK(align_sign_and_scale(est, ref).abs_pearson == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("white noise stays uncorrelated") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    std::vector<double> est(800), long_ref(800);
    for (int i = 0; i < 800; ++i) {
      est[i] = g(rng);
      long_ref[i] = std::sin(2.0 * kPi * 0.25 * i * 0.04);
    }
    CHECK(align_sign_and_scale(est, long_ref).abs_pearson < 0.15);
  }
  SUBCASE("zero variance throws") {
    std::vector<double> flat(100, 2.0);
    CHECK_THROWS_AS(align_sign_and_scale(flat, ref), std::invalid_argument);
  }
}

namespace {

struct MotionSim {
  TrajectorySchedule schedule;
  GroundTruth truth;
  KSpaceSeries series;
  std::vector<std::vector<double>> cond;
};

MotionSim simulate_moving_phantom() {
  MotionSim sim;
  SequenceParams p;
  p.matrix_size = 32;
  p.interleaves_per_inversion = 500;
  p.n_inversions = 3;
  p.samples_per_interleaf = 64;
  sim.schedule = golden_angle_schedule(p);
  CardiacPhantomSpec spec;
  spec.grid = 32;
  spec.heart_cx = 15;
  spec.heart_cy = 15;
  spec.epi_rx = spec.epi_ry = 8.5;
  spec.endo_rx = spec.endo_ry = 5.0;
  spec.torso_rx = 14.5;
  spec.torso_ry = 13.0;
  spec.resp_amp_px = 2.0;
  // 0.35 Hz avoids near-synchrony with the short block period of this
  // abbreviated schedule; the paper-scale schedule has no such alignment.
  spec.resp_freq_hz = 0.35;
  sim.truth = generate_ground_truth(spec, sim.schedule, 5);
  const auto coils = synthetic_coil_maps(4, 32, 32);
  sim.series = simulate_acquisition(sim.truth, sim.schedule, SpiralGeometry{}, coils, 0.0, 0);
  add_complex_noise(sim.series, sigma_for_snr_db(sim.series, 30.0), 12345);
  for (double t : sim.truth.frame_times_ms) (void)t;
  const auto contrast = contrast_signal(sim.schedule, sim.truth.frame_times_ms);
  sim.cond.resize(contrast.size());
  for (std::size_t i = 0; i < contrast.size(); ++i) sim.cond[i] = {contrast[i]};
  return sim;
}

}  // namespace

TEST_CASE("end-to-end motion estimation on the moving phantom") {
  const auto sim = simulate_moving_phantom();
  const auto nav = extract_navigator(sim.series, 1e-3);
  const auto det = detrend_navigators(nav, contrast_basis(sim.schedule, 5));
  VaeConfig cfg;
  cfg.epochs = 250;
  cfg.beta = 0.05;
  const auto model = train_vae(det, cfg, 42, sim.cond);
  const auto latents = encode_motion(model, det, sim.truth.frame_times_ms, sim.cond);

  CHECK(latents.labeling_ok);
  CHECK(latents.cardiac_peak_hz > 0.6);
  CHECK(latents.cardiac_peak_hz < 2.5);
  CHECK(latents.resp_peak_hz > 0.05);
  CHECK(latents.resp_peak_hz < 0.5);

  const auto agree = motion_agreement(latents, sim.truth.cardiac_signal, sim.truth.resp_signal);
  CHECK(agree.cardiac_abs_pearson > 0.8);
  CHECK(agree.resp_abs_pearson > 0.8);

  // Latent signals are z-scored.
  CHECK(std::abs(mean_of(latents.cardiac)) < 1e-9);
  CHECK(variance_of(latents.cardiac) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("static phantom exercises the labeling-error path") {
  SequenceParams p;
  p.matrix_size = 32;
  p.interleaves_per_inversion = 500;
  p.n_inversions = 2;
  p.samples_per_interleaf = 64;
  const auto sched = golden_angle_schedule(p);
  auto spec = default_vial_phantom(32);
  const auto truth = generate_ground_truth(spec, sched, 5);
  const auto coils = synthetic_coil_maps(4, 32, 32);
  const auto series = simulate_acquisition(truth, sched, SpiralGeometry{}, coils, 0.0, 0);

  const auto nav = extract_navigator(series, 1e-3);
  const auto det = detrend_navigators(nav, contrast_basis(sched, 5));
  VaeConfig cfg;
  cfg.epochs = 30;
  const auto contrast = contrast_signal(sched, truth.frame_times_ms);
  std::vector<std::vector<double>> cond(contrast.size());
  for (std::size_t i = 0; i < contrast.size(); ++i) cond[i] = {contrast[i]};
  const auto model = train_vae(det, cfg, 4, cond);
  const auto latents = encode_motion(model, det, truth.frame_times_ms, cond);
  CHECK(!latents.labeling_ok);
  CHECK(!latents.labeling_note.empty());
  // Raw (z-scored) latents are still returned.
  CHECK(latents.cardiac.size() == truth.frame_times_ms.size());
}

TEST_CASE("detrending removes the contrast sweep but keeps motion") {
  SequenceParams p;
  p.matrix_size = 32;
  p.interleaves_per_inversion = 500;
  p.n_inversions = 3;
  p.samples_per_interleaf = 64;
  const auto sched = golden_angle_schedule(p);
  const auto basis = contrast_basis(sched, 5);
  const int n = static_cast<int>(basis[0].size());

  // Synthetic components: a pure contrast mixture and contrast + motion.
  std::vector<std::vector<double>> nav(n, std::vector<double>(2));
  std::vector<double> motion(n);
  for (int i = 0; i < n; ++i) {
    motion[i] = std::sin(2.0 * kPi * 0.35 * i * 0.04);
    nav[i][0] = 3.0 * basis[2][i] - 1.5 * basis[7][i];
    nav[i][1] = basis[4][i] + 0.2 * motion[i];
  }
  const auto det = detrend_navigators(nav, basis);
  double c0 = 0;
  for (int i = 0; i < n; ++i) c0 += det[i][0] * det[i][0];
  CHECK(c0 < 1e-12);  // pure contrast content vanishes (z-score guard to zero)
  std::vector<double> kept(n);
  for (int i = 0; i < n; ++i) kept[i] = det[i][1];
  CHECK(std::abs(pearson(kept, motion)) > 0.95);
}
