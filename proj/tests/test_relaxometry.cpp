#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "spiralir/relaxometry.hpp"
#include "spiralir/trajectory.hpp"

using namespace spiralir;

namespace {

TrajectorySchedule paper_schedule() { return golden_angle_schedule(SequenceParams{}); }

// Readout train with no inversion pulses, for steady-state checks.
TrajectorySchedule readout_train(int n_readouts, double tr_ms, double flip_deg) {
  TrajectorySchedule s;
  s.params.tr_ms = tr_ms;
  s.params.flip_deg = flip_deg;
  s.params.interleaves_per_inversion = n_readouts;
  s.params.n_inversions = 1;
  for (int i = 0; i < n_readouts; ++i)
    s.entries.push_back({(i + 1) * tr_ms, i, 0.0, i == 0});
  return s;
}

}  // namespace

TEST_CASE("flip=0 recursion matches the closed-form IR curve") {
  auto sched = paper_schedule();
  sched.params.flip_deg = 0.0;
  const TissueParams tissue{800.0, 1.3};
  const auto mz = simulate_ir_spgr_mz(sched, tissue);
  // Only the first block: later blocks start from a partially recovered state.
  for (int i = 0; i < 800; ++i) {
    const double ti = mz.times_ms[i];
    const double expect = tissue.m0 * (1.0 - 2.0 * std::exp(-ti / tissue.t1_ms));
    CHECK(mz.values[i] == doctest::Approx(expect).epsilon(1e-12));
  }
  // The emitted signal is Mz*sin(0) = 0.
  const auto sig = simulate_ir_spgr(sched, tissue);
  for (int i = 0; i < 10; ++i) CHECK(sig.values[i] == 0.0);
}

TEST_CASE("zero crossing at T1*ln2 for an unperturbed readout") {
  auto sched = paper_schedule();
  sched.params.flip_deg = 0.0;
  const auto mz = simulate_ir_spgr_mz(sched, TissueParams{1000.0, 1.0});
  const auto crossing = first_zero_crossing(mz);
  REQUIRE(crossing.has_value());
  CHECK(std::abs(*crossing - 693.147) < 0.5);
}

TEST_CASE("no-inversion long run converges to the SPGR steady state") {
  const auto sched = readout_train(5000, 8.0, 14.0);
  const auto sig = simulate_ir_spgr(sched, TissueParams{1000.0, 1.0});
  const double expect = steady_state_spgr(1000.0, 8.0, 14.0);
  CHECK(std::abs(sig.values.back() - expect) / expect < 1e-9);

  // Terminal value from 2000 readouts is already close to 0.0515 * m0.
  const auto sig2k = simulate_ir_spgr(readout_train(2000, 8.0, 14.0), TissueParams{1000.0, 1.0});
  CHECK(sig2k.values.back() == doctest::Approx(0.0515).epsilon(0.01));
}

TEST_CASE("steady_state_spgr closed form") {
  const double e1 = std::exp(-8.0 / 1000.0);
  CHECK(steady_state_spgr(1000.0, 8.0, 90.0) == doctest::Approx(1.0 - e1).epsilon(1e-12));
  CHECK(steady_state_spgr(1e12, 8.0, 14.0) == doctest::Approx(0.0).epsilon(1e-6));

  // Independent geometric-series oracle: iterate the recursion to convergence.
  const double a = 14.0 * kPi / 180.0;
  double mz = 1.0;
  for (int i = 0; i < 200000; ++i) {
    mz *= std::cos(a);
    mz = 1.0 + (mz - 1.0) * e1;
  }
  CHECK(steady_state_spgr(1000.0, 8.0, 14.0) == doctest::Approx(mz * std::sin(a)).epsilon(1e-9));
  CHECK(steady_state_spgr(1000.0, 8.0, 14.0) == doctest::Approx(0.0516).epsilon(2e-3));

  CHECK_THROWS_AS(steady_state_spgr(-1.0, 8.0, 14.0), std::invalid_argument);
}

TEST_CASE("inversion efficiency scales the post-inversion state") {
  auto sched = paper_schedule();
  sched.params.flip_deg = 0.0;
  const auto full = simulate_ir_spgr_mz(sched, TissueParams{1000.0, 1.0}, 1.0);
  const auto partial = simulate_ir_spgr_mz(sched, TissueParams{1000.0, 1.0}, 0.8);
  // First readout 8 ms after inversion: Mz = 1 - (1 + eff) exp(-t/T1).
  const double e = std::exp(-8.0 / 1000.0);
  CHECK(full.values[0] == doctest::Approx(1.0 - 2.0 * e).epsilon(1e-12));
  CHECK(partial.values[0] == doctest::Approx(1.0 - 1.8 * e).epsilon(1e-12));
  CHECK_THROWS_AS(simulate_ir_spgr(sched, TissueParams{-5.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(simulate_ir_spgr(sched, TissueParams{1000.0, 1.0}, 1.5), std::invalid_argument);
}

TEST_CASE("dictionary construction") {
  const auto sched = paper_schedule();
  SUBCASE("single entry is unit norm") {
    const auto d = build_dictionary(sched, {1000.0}, 5);
    REQUIRE(d.n_atoms() == 1);
    REQUIRE(d.atom_len == 800);
    double norm = 0;
    for (int k = 0; k < d.atom_len; ++k) norm += d.atom(0)[k] * d.atom(0)[k];
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("distinct T1 atoms are distinguishable") {
    const auto d = build_dictionary(sched, {300.0, 2000.0}, 5);
    double dot = 0;
    for (int k = 0; k < d.atom_len; ++k) dot += d.atom(0)[k] * d.atom(1)[k];
    CHECK(std::abs(dot) < 1.0 - 1e-4);
  }
  SUBCASE("default grid on the paper schedule has 291 atoms") {
    const auto grid = default_t1_grid();
    CHECK(grid.size() == 291);
    const auto d = build_dictionary(sched, grid, 5);
    CHECK(d.n_atoms() == 291);
    for (int i = 0; i < d.n_atoms(); ++i) {
      double norm = 0;
      for (int k = 0; k < d.atom_len; ++k) norm += d.atom(i)[k] * d.atom(i)[k];
      CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-9);
    }
  }
  SUBCASE("grid must be strictly increasing") {
    CHECK_THROWS_AS(build_dictionary(sched, {500.0, 500.0}, 5), std::invalid_argument);
    CHECK_THROWS_AS(build_dictionary(sched, {500.0}, 7), std::invalid_argument);
  }
}

TEST_CASE("fingerprint matching") {
  const auto sched = paper_schedule();
  const auto grid = default_t1_grid();
  const auto dict = build_dictionary(sched, grid, 5);

  SUBCASE("self-match returns the atom with correlation 1") {
    const int j = 120;
    std::vector<double> sig(dict.atom(j), dict.atom(j) + dict.atom_len);
    const auto r = match_fingerprint(std::span<const double>(sig), dict);
    CHECK(r.valid);
    CHECK(r.t1_ms == grid[j]);
    CHECK(std::abs(r.correlation - 1.0) < 1e-12);
  }
  SUBCASE("positive scaling leaves the match invariant") {
    const int j = 40;
    std::vector<double> sig(dict.atom(j), dict.atom(j) + dict.atom_len);
    for (auto& v : sig) v *= 2.5;
    const auto r = match_fingerprint(std::span<const double>(sig), dict);
    CHECK(r.t1_ms == grid[j]);
    CHECK(r.scale == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(std::abs(r.correlation - 1.0) < 1e-12);
  }
  SUBCASE("off-grid T1 resolves to a neighboring atom (brute force)") {
    const auto sig =
        bin_average(simulate_ir_spgr(sched, TissueParams{1005.0, 1.0}), 5).values;
    const auto r = match_fingerprint(std::span<const double>(sig), dict);
    CHECK((r.t1_ms == 1000.0 || r.t1_ms == 1010.0));
    // Brute-force oracle over every atom.
    double norm = 0;
    for (double v : sig) norm += v * v;
    norm = std::sqrt(norm);
    double best = -1;
    int best_i = -1;
    for (int i = 0; i < dict.n_atoms(); ++i) {
      double dot = 0;
      for (int k = 0; k < dict.atom_len; ++k) dot += sig[k] * dict.atom(i)[k];
      if (std::abs(dot) > best) {
        best = std::abs(dot);
        best_i = i;
      }
    }
    CHECK(r.t1_ms == grid[best_i]);
    CHECK(r.correlation == doctest::Approx(best / norm).epsilon(1e-12));
  }
  SUBCASE("zero signal is flagged invalid") {
    std::vector<double> sig(dict.atom_len, 0.0);
    const auto r = match_fingerprint(std::span<const double>(sig), dict);
    CHECK(!r.valid);
    CHECK(r.correlation == 0.0);
  }
  SUBCASE("complex matching is global-phase invariant") {
    const int j = 200;
    std::vector<cplx> sig(dict.atom_len);
    const cplx phase = std::polar(3.0, 1.1);
    for (int k = 0; k < dict.atom_len; ++k) sig[k] = phase * dict.atom(j)[k];
    const auto r = match_fingerprint(std::span<const cplx>(sig), dict);
    CHECK(r.t1_ms == grid[j]);
    CHECK(std::abs(r.correlation - 1.0) < 1e-12);
    CHECK(r.scale == doctest::Approx(3.0).epsilon(1e-9));
  }
  SUBCASE("well-separated grid T1s are never confused") {
    for (int j = 0; j < dict.n_atoms(); j += 24) {
      const auto sig =
          bin_average(simulate_ir_spgr(sched, TissueParams{grid[j], 1.0}), 5).values;
      const auto r = match_fingerprint(std::span<const double>(sig), dict);
      CHECK(std::abs(r.t1_ms - grid[j]) <= 5 * 10.0);
    }
  }
}

TEST_CASE("folded dictionary averages the inversion blocks") {
  const auto sched = paper_schedule();
  const auto dict = build_dictionary(sched, {500.0, 1500.0}, 5);
  const auto folded = fold_blocks(dict, 5);
  CHECK(folded.atom_len == 160);
  // Direct fold of the unnormalized simulation.
  const auto evo = bin_average(simulate_ir_spgr(sched, TissueParams{500.0, 1.0}), 5);
  std::vector<double> mean(160, 0.0);
  for (int b = 0; b < 5; ++b)
    for (int k = 0; k < 160; ++k) mean[k] += evo.values[b * 160 + k] / 5.0;
  double norm = 0;
  for (double v : mean) norm += v * v;
  norm = std::sqrt(norm);
  for (int k = 0; k < 160; ++k)
    CHECK(folded.atom(0)[k] == doctest::Approx(mean[k] / norm).epsilon(1e-9));
}

TEST_CASE("three-parameter exponential fit") {
  SUBCASE("noiseless recovery to 1e-6 relative") {
    std::vector<double> ti, s;
    for (int i = 0; i < 11; ++i) {
      ti.push_back(100.0 + 280.0 * i);
      s.push_back(1.0 - 2.0 * std::exp(-ti.back() / 500.0));
    }
    const auto fit = fit_three_param(ti, s);
    CHECK(fit.ok);
    CHECK(std::abs(fit.a - 1.0) < 1e-6);
    CHECK(std::abs(fit.b - 2.0) < 2e-6);
    CHECK(std::abs(fit.t1_star_ms - 500.0) / 500.0 < 1e-6);
  }
  SUBCASE("constant signal is flagged unidentifiable") {
    std::vector<double> ti{100, 200, 300, 400}, s{0.7, 0.7, 0.7, 0.7};
    const auto fit = fit_three_param(ti, s);
    CHECK(!fit.ok);
  }
  SUBCASE("degenerate design throws") {
    std::vector<double> ti{100, 100, 100}, s{0.1, 0.2, 0.3};
    CHECK_THROWS_AS(fit_three_param(ti, s), std::invalid_argument);
  }
  SUBCASE("magnitude data with polarity restoration matches the signed fit") {
    std::vector<double> ti, s, mag;
    for (int i = 0; i < 11; ++i) {
      ti.push_back(50.0 + 300.0 * i);
      s.push_back(0.9 - 1.8 * std::exp(-ti.back() / 700.0));
      mag.push_back(std::abs(s.back()));
    }
    const auto restored = restore_polarity_magnitude(ti, mag);
    const auto fit_signed = fit_three_param(ti, s);
    const auto fit_restored = fit_three_param(ti, restored);
    CHECK(fit_restored.t1_star_ms == doctest::Approx(fit_signed.t1_star_ms).epsilon(1e-6));
    CHECK(fit_restored.a == doctest::Approx(fit_signed.a).epsilon(1e-6));
  }
}

TEST_CASE("Look-Locker correction") {
  CHECK(*look_locker_correct(1.0, 2.0, 500.0) == doctest::Approx(500.0));
  CHECK(*look_locker_correct(1.0, 1.8, 500.0) == doctest::Approx(400.0));
  CHECK(!look_locker_correct(1.0, 0.9, 500.0).has_value());
  CHECK_THROWS_AS(look_locker_correct(-1.0, 2.0, 500.0), std::invalid_argument);

  // Fit of a simulated readout train documents the residual Look-Locker bias.
  auto sched = golden_angle_schedule(SequenceParams{});
  const auto sig = simulate_ir_spgr(sched, TissueParams{1000.0, 1.0});
  std::vector<double> ti(sig.times_ms.begin(), sig.times_ms.begin() + 800);
  std::vector<double> s(sig.values.begin(), sig.values.begin() + 800);
  const auto fit = fit_three_param(ti, s);
  REQUIRE(fit.ok);
  const auto t1 = look_locker_correct(fit.a, fit.b, fit.t1_star_ms);
  REQUIRE(t1.has_value());
  CHECK(std::abs(*t1 - 1000.0) / 1000.0 < 0.10);
}

TEST_CASE("map_t1_image") {
  const auto sched = paper_schedule();
  const auto dict = build_dictionary(sched, {300.0, 800.0, 1500.0, 2500.0}, 5);

  SUBCASE("pixels that are scaled atoms map to exact grid T1s") {
    const int n = dict.atom_len;
    std::vector<double> series(static_cast<std::size_t>(n) * 4);
    const double scales[4] = {1.0, 2.0, 0.5, 3.0};
    for (int f = 0; f < n; ++f)
      for (int p = 0; p < 4; ++p)
        series[static_cast<std::size_t>(f) * 4 + p] = scales[p] * dict.atom(p)[f];
    const auto map = map_t1_image(n, 2, 2, series, dict, 0.0);
    for (int p = 0; p < 4; ++p) {
      CHECK(map.valid[p] == 1);
      CHECK(map.t1_ms[p] == dict.t1_grid_ms[p]);
      CHECK(map.scale[p] == doctest::Approx(scales[p]).epsilon(1e-9));
    }
  }
  SUBCASE("all-zero image is invalid everywhere") {
    std::vector<double> series(static_cast<std::size_t>(dict.atom_len) * 4, 0.0);
    const auto map = map_t1_image(dict.atom_len, 2, 2, series, dict);
    for (int p = 0; p < 4; ++p) CHECK(map.valid[p] == 0);
  }
  SUBCASE("shape mismatch throws") {
    std::vector<double> series(10, 1.0);
    CHECK_THROWS_AS(map_t1_image(5, 1, 2, series, dict), std::invalid_argument);
  }
}

TEST_CASE("vial grid covers the fast-relaxing samples") {
  const auto g = vial_t1_grid();
  CHECK(g.front() == 10.0);
  CHECK(g.back() == 3000.0);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
}
