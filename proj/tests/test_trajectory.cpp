#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "spiralir/trajectory.hpp"

using namespace spiralir;

TEST_CASE("archimedean spiral endpoints") {
  const auto two = generate_archimedean_spiral(2, 1.0, 0.5);
  CHECK(std::hypot(two.samples[0][0], two.samples[0][1]) < 1e-9);
  CHECK(std::hypot(two.samples[1][0], two.samples[1][1]) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("rotation by 180 degrees negates coordinates") {
  const auto a = generate_archimedean_spiral(64, 4.0, 0.5, 0.0);
  const auto b = generate_archimedean_spiral(64, 4.0, 0.5, 180.0);
  for (int s = 0; s < 64; ++s) {
    CHECK(b.samples[s][0] == doctest::Approx(-a.samples[s][0]).epsilon(1e-12));
    CHECK(b.samples[s][1] == doctest::Approx(-a.samples[s][1]).epsilon(1e-12));
  }
}

TEST_CASE("256-sample spiral against the closed form") {
  const int n = 256;
  const auto sp = generate_archimedean_spiral(n, 8.0, 0.5);
  double prev_r = -1.0;
  for (int s = 0; s < n; ++s) {
    // Independent evaluation of the closed form.
    const double u = s / 255.0;
    const double r_expect = 0.5 * u;
    const double a_expect = 2.0 * kPi * 8.0 * u;
    CHECK(sp.samples[s][0] == doctest::Approx(r_expect * std::cos(a_expect)).epsilon(1e-12));
    CHECK(sp.samples[s][1] == doctest::Approx(r_expect * std::sin(a_expect)).epsilon(1e-12));
    const double r = std::hypot(sp.samples[s][0], sp.samples[s][1]);
    CHECK(r > prev_r);
    CHECK(r <= 0.5 + 1e-12);
    prev_r = r;
  }
  CHECK(prev_r == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("rigid rotation matches angle-offset generation") {
  const auto base = generate_archimedean_spiral(128, 8.0, 0.5);
  const auto rot = rotated(base, 137.5);
  const auto direct = generate_archimedean_spiral(128, 8.0, 0.5, 137.5);
  for (int s = 0; s < 128; ++s) {
    CHECK(rot.samples[s][0] == doctest::Approx(direct.samples[s][0]).epsilon(1e-10));
    CHECK(rot.samples[s][1] == doctest::Approx(direct.samples[s][1]).epsilon(1e-10));
  }
}

TEST_CASE("spiral parameter validation") {
  CHECK_THROWS_AS(generate_archimedean_spiral(1, 8.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(generate_archimedean_spiral(64, 8.0, 0.6), std::invalid_argument);
  CHECK_THROWS_AS(generate_archimedean_spiral(64, 8.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(generate_archimedean_spiral(64, -1.0, 0.5), std::invalid_argument);
}

TEST_CASE("golden angle schedule with paper defaults") {
  SequenceParams p;  // defaults follow the acquisition in the source protocol
  const auto sched = golden_angle_schedule(p);

  CHECK(sched.entries.size() == 4000);
  CHECK(sched.inversion_times_ms.size() == 5);
  // Inversions every 6.9 s: 6.4 s acquisition + 0.5 s delay.
  CHECK(sched.inversion_times_ms[1] - sched.inversion_times_ms[0] ==
        doctest::Approx(6900.0).epsilon(1e-12));
  CHECK(p.block_duration_ms() == doctest::Approx(6400.0));

  CHECK(sched.entries[2].rotation_deg == doctest::Approx(275.0).epsilon(1e-12));

  for (std::size_t i = 1; i < sched.entries.size(); ++i)
    CHECK(sched.entries[i].time_ms > sched.entries[i - 1].time_ms);
  for (int b = 0; b < 5; ++b) {
    const auto& first = sched.entries[static_cast<std::size_t>(b) * 800];
    CHECK(first.post_inversion_first_readout);
    CHECK(first.time_ms ==
          doctest::Approx(sched.inversion_times_ms[b] + p.tr_ms).epsilon(1e-12));
    for (int j = 1; j < 800; ++j) {
      const auto& e = sched.entries[static_cast<std::size_t>(b) * 800 + j];
      CHECK(!e.post_inversion_first_readout);
      CHECK(e.time_ms - sched.entries[static_cast<std::size_t>(b) * 800 + j - 1].time_ms ==
            doctest::Approx(p.tr_ms).epsilon(1e-12));
    }
  }
}

TEST_CASE("golden angle rotations: distinct within the 144-interleaf period") {
  SequenceParams p;
  const auto sched = golden_angle_schedule(p);
  // 144 * 137.5 = 55 * 360 exactly, so the rotation pattern repeats with
  // period 144; within one period all rotations are distinct.
  std::set<long long> seen;
  for (int i = 0; i < 144; ++i) {
    const long long key = std::llround(sched.entries[i].rotation_deg * 1e6);
    CHECK(seen.insert(key).second);
  }
  CHECK(sched.entries[144].rotation_deg ==
        doctest::Approx(sched.entries[0].rotation_deg).epsilon(1e-12));
  for (std::size_t i = 0; i < sched.entries.size(); ++i)
    CHECK(sched.entries[i].rotation_deg ==
          doctest::Approx(std::fmod(i * 137.5, 360.0)).epsilon(1e-9));
}

TEST_CASE("schedule generation is deterministic") {
  SequenceParams p;
  const auto a = golden_angle_schedule(p);
  const auto b = golden_angle_schedule(p);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].time_ms == b.entries[i].time_ms);
    CHECK(a.entries[i].rotation_deg == b.entries[i].rotation_deg);
  }
  CHECK(schedule_hash(a) == schedule_hash(b));

  const auto s1 = generate_archimedean_spiral(256, 8.0, 0.5);
  const auto s2 = generate_archimedean_spiral(256, 8.0, 0.5);
  CHECK(s1.samples == s2.samples);
}

TEST_CASE("density compensation") {
  SUBCASE("two samples normalize to 1") {
    const auto sp = generate_archimedean_spiral(2, 1.0, 0.5);
    const auto w = density_compensation(sp);
    CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w[0] >= 0);
    CHECK(w[1] >= 0);
  }
  SUBCASE("uniform radius gives equal weights") {
    SpiralInterleaf ring;
    for (int i = 0; i < 16; ++i) {
      const double a = 2.0 * kPi * i / 16;
      ring.samples.push_back({0.3 * std::cos(a), 0.3 * std::sin(a)});
    }
    const auto w = density_compensation(ring);
    for (const double v : w) CHECK(v == doctest::Approx(1.0 / 16).epsilon(1e-12));
  }
  SUBCASE("archimedean weights are monotone past the origin floor") {
    const auto sp = generate_archimedean_spiral(256, 8.0, 0.5);
    const auto w = density_compensation(sp);
    double total = 0;
    for (std::size_t s = 1; s < w.size(); ++s) CHECK(w[s] >= w[s - 1] - 1e-15);
    for (const double v : w) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sequence parameter validation") {
  SequenceParams p;
  p.flip_deg = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.flip_deg = 95.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = SequenceParams{};
  p.samples_per_interleaf = 1;
  CHECK_THROWS_AS(golden_angle_schedule(p), std::invalid_argument);
}
