#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "spiralir/analysis.hpp"
#include "spiralir/config.hpp"

using namespace spiralir;

TEST_CASE("r_squared") {
  std::vector<double> ref{100, 300, 700, 1200, 1900, 2500};
  SUBCASE("identity and affine invariance") {
    CHECK(r_squared(ref, ref) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> affine(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) affine[i] = 2.0 * ref[i] + 3.0;
    CHECK(r_squared(affine, ref) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> neg(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) neg[i] = -ref[i];
    CHECK(r_squared(neg, ref) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("errors") {
    std::vector<double> flat(6, 5.0);
    CHECK_THROWS_AS(r_squared(flat, ref), std::invalid_argument);
    std::vector<double> two{1.0, 2.0};
    CHECK_THROWS_AS(r_squared(two, two), std::invalid_argument);
  }
}

TEST_CASE("icc_a1") {
  std::vector<double> ref{22, 46, 95, 200, 420, 870, 1500, 1900, 2200, 2480, 300, 650, 1100, 80};
  SUBCASE("perfect agreement") {
    CHECK(icc_a1(ref, ref) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("a constant offset is penalized while r_squared ignores it") {
    std::vector<double> offset(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) offset[i] = ref[i] + 500.0;
    const double icc = icc_a1(offset, ref);
    const double r2 = r_squared(offset, ref);
    CHECK(r2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(icc < r2);
    CHECK(icc < 0.9);
  }
  SUBCASE("permutation null is near zero") {
    std::vector<double> shuffled = ref;
    std::mt19937_64 rng(14);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(std::abs(icc_a1(shuffled, ref)) < 0.5);
  }
  SUBCASE("degenerate variance throws") {
    std::vector<double> flat(ref.size(), 0.0);
    CHECK_THROWS_AS(icc_a1(flat, flat), std::invalid_argument);
  }
}

namespace {

// Independent polar-integration oracle for sector areas, using the same
// convention: sector 1 starts at 12 o'clock, counterclockwise, image y down.
std::vector<double> sector_oracle(const EllipseShape& endo, const EllipseShape& epi,
                                  int n_sectors, double border, double pixel_mm) {
  std::vector<double> areas(n_sectors, 0.0);
  const int steps = 400000;
  for (int s = 0; s < steps; ++s) {
    const double phi = (s + 0.5) * 2.0 * kPi / steps;  // from 12 o'clock, CCW
    // Convert to the image-frame direction: theta measured with y up.
    const double theta = phi + kPi / 2.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    auto radial = [&](const EllipseShape& e) {
      const double a = ct / e.rx, b = st / e.ry;
      return 1.0 / std::sqrt(a * a + b * b);
    };
    const double r_endo = radial(endo), r_epi = radial(epi);
    const double wall = r_epi - r_endo;
    const double inner = r_endo + border * wall;
    const double outer = r_epi - border * wall;
    const int sector = std::min(n_sectors - 1, static_cast<int>(phi / (2.0 * kPi / n_sectors)));
    areas[sector] += 0.5 * (outer * outer - inner * inner) * (2.0 * kPi / steps);
  }
  const double to_cm2 = (pixel_mm / 10.0) * (pixel_mm / 10.0);
  for (auto& a : areas) a *= to_cm2;
  return areas;
}

}  // namespace

TEST_CASE("sector areas on concentric circles match the closed form") {
  const EllipseShape endo{40, 40, 10, 10};
  const EllipseShape epi{40, 40, 20, 20};

  SUBCASE("no border exclusion") {
    const auto areas = sector_areas(endo, epi, 6, 0.0, 10.0);
    const double expect = kPi * (400.0 - 100.0) / 6.0;
    for (double a : areas) CHECK(std::abs(a - expect) / expect < 0.005);
  }
  SUBCASE("20 percent border exclusion") {
    const auto areas = sector_areas(endo, epi, 6, 0.2, 10.0);
    const double expect = kPi * (18.0 * 18.0 - 12.0 * 12.0) / 6.0;
    for (double a : areas) CHECK(std::abs(a - expect) / expect < 0.005);
  }
  SUBCASE("pixel spacing converts to cm^2") {
    const auto px10 = sector_areas(endo, epi, 6, 0.0, 10.0);  // 1 px = 1 cm
    const auto px5 = sector_areas(endo, epi, 6, 0.0, 5.0);
    for (int i = 0; i < 6; ++i) CHECK(px5[i] == doctest::Approx(px10[i] / 4.0).epsilon(1e-9));
  }
}

TEST_CASE("sector areas on an elliptical ring match the integration oracle") {
  const EllipseShape endo{50, 45, 9, 12};
  const EllipseShape epi{50, 45, 19, 23};
  const auto areas = sector_areas(endo, epi, 6, 0.2, 8.0);
  const auto oracle = sector_oracle(endo, epi, 6, 0.2, 8.0);
  double total = 0, total_oracle = 0;
  for (int i = 0; i < 6; ++i) {
    CHECK(std::abs(areas[i] - oracle[i]) / oracle[i] < 0.005);
    total += areas[i];
    total_oracle += oracle[i];
  }
  CHECK(std::abs(total - total_oracle) / total_oracle < 0.01);
}

TEST_CASE("sector area validation") {
  const EllipseShape endo{40, 40, 10, 10};
  const EllipseShape epi{40, 40, 20, 20};
  CHECK_THROWS_AS(sector_areas(epi, endo), std::invalid_argument);  // inverted
  const EllipseShape shifted{41, 40, 10, 10};
  CHECK_THROWS_AS(sector_areas(shifted, epi), std::invalid_argument);
  CHECK_THROWS_AS(sector_areas(endo, epi, 6, 0.6), std::invalid_argument);
}

TEST_CASE("systolic wall thickening grows every sector") {
  RunConfig cfg;
  const auto spec = make_cardiac_spec(cfg);
  const EllipseShape epi{spec.heart_cx, spec.heart_cy, spec.epi_rx, spec.epi_ry};
  const EllipseShape endo_dia{spec.heart_cx, spec.heart_cy, spec.endo_rx, spec.endo_ry};
  const double s = 1.0 - spec.contraction;
  const EllipseShape endo_sys{spec.heart_cx, spec.heart_cy, spec.endo_rx * s, spec.endo_ry * s};
  const auto dia = sector_areas(endo_dia, epi, 6, 0.2, cfg.pixel_mm);
  const auto sys = sector_areas(endo_sys, epi, 6, 0.2, cfg.pixel_mm);
  for (int i = 0; i < 6; ++i) CHECK(sys[i] > dia[i]);

  // And the analytic oracle agrees sector by sector.
  const auto dia_oracle = sector_oracle(endo_dia, epi, 6, 0.2, cfg.pixel_mm);
  const auto sys_oracle = sector_oracle(endo_sys, epi, 6, 0.2, cfg.pixel_mm);
  for (int i = 0; i < 6; ++i) {
    CHECK(std::abs(dia[i] - dia_oracle[i]) / dia_oracle[i] < 0.01);
    CHECK(std::abs(sys[i] - sys_oracle[i]) / sys_oracle[i] < 0.01);
  }
}

TEST_CASE("motion agreement") {
  std::vector<double> cardiac, resp;
  for (int i = 0; i < 300; ++i) {
    cardiac.push_back(std::sin(2.0 * kPi * 1.2 * i * 0.04));
    resp.push_back(std::sin(2.0 * kPi * 0.25 * i * 0.04));
  }
  LatentSignals latents;
  latents.cardiac = cardiac;
  latents.resp.resize(resp.size());
  for (std::size_t i = 0; i < resp.size(); ++i) latents.resp[i] = -resp[i];  // sign flip
  const auto agree = motion_agreement(latents, cardiac, resp);
  CHECK(agree.cardiac_abs_pearson == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(agree.resp_abs_pearson == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("agreement report bundles both statistics") {
  std::vector<double> ref{100, 400, 900, 1500, 2000};
  std::vector<double> est{110, 390, 910, 1480, 2050};
  const auto rep = agreement_report(est, ref);
  CHECK(rep.r_squared > 0.99);
  CHECK(rep.icc_a1 > 0.99);
  CHECK(rep.estimate.size() == 5);
}
